//! Delay-power tradeoff sweeps and their CSV table.

use std::io::Write;
use std::path::Path;

use linksched::{solve, SystemInstance};
use rayon::prelude::*;

use crate::config::RunSpec;
use crate::error::{CliError, ConfigError, ConfigErrorKind};

/// Relative slack allowed when checking that delay does not rise.
const MONOTONE_TOL: f64 = 1e-9;

/// One budget of a sweep. Infeasible budgets carry `NaN` delay and power
/// and no thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffRow {
    pub p_max: f64,
    pub delay: f64,
    pub thresholds: Vec<usize>,
    pub power_used: f64,
    pub feasible: bool,
}

/// Solves one budget on `link`, reporting infeasibility as a row.
pub fn solve_point(link: &SystemInstance<f64>, p_max: f64) -> Result<TradeoffRow, CliError> {
    let inst = link.with_budget(p_max)?;
    match solve(&inst) {
        Ok(sol) => Ok(TradeoffRow {
            p_max,
            delay: sol.delay,
            thresholds: sol.profile.thresholds().to_vec(),
            power_used: sol.power,
            feasible: true,
        }),
        Err(linksched::Error::Infeasible { .. }) => Ok(TradeoffRow {
            p_max,
            delay: f64::NAN,
            thresholds: Vec::new(),
            power_used: f64::NAN,
            feasible: false,
        }),
        Err(e) => Err(e.into()),
    }
}

/// Solves every budget of the grid in parallel; rows follow the grid order.
pub fn run_sweep(spec: &RunSpec) -> Result<Vec<TradeoffRow>, CliError> {
    let grid = spec.sweep_grid.as_deref().ok_or_else(|| ConfigError {
        origin: "sweep".into(),
        line: None,
        kind: ConfigErrorKind::Schema,
        message: "no budget grid".into(),
    })?;
    let rows = grid
        .par_iter()
        .map(|&p| solve_point(&spec.instance, p))
        .collect::<Result<Vec<_>, _>>()?;
    check_tradeoff(&rows)?;
    Ok(rows)
}

/// Checks that along increasing budgets feasibility never flips back and
/// neither the delay nor any threshold rises.
pub fn check_tradeoff(rows: &[TradeoffRow]) -> Result<(), CliError> {
    for w in rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.feasible && !b.feasible {
            return Err(CliError::Tradeoff(format!(
                "budget {} is feasible but {} is not",
                a.p_max, b.p_max
            )));
        }
        if !(a.feasible && b.feasible) {
            continue;
        }
        if b.delay > a.delay + MONOTONE_TOL * a.delay.abs().max(1.0) {
            return Err(CliError::Tradeoff(format!(
                "delay rises from {} at {} W to {} at {} W",
                a.delay, a.p_max, b.delay, b.p_max
            )));
        }
        if let Some(m) = (0..a.thresholds.len()).find(|&m| b.thresholds[m] > a.thresholds[m]) {
            return Err(CliError::Tradeoff(format!(
                "threshold {} rises from {} at {} W to {} at {} W",
                m + 1,
                a.thresholds[m],
                a.p_max,
                b.thresholds[m],
                b.p_max
            )));
        }
    }
    Ok(())
}

/// `x` with `digits` significant digits in the shortest of fixed or
/// exponent notation, trailing zeros dropped, like C's `%.*g`.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_table<W: Write>(rows: &[TradeoffRow], mut out: W) -> std::io::Result<()> {
    let states = rows.iter().map(|r| r.thresholds.len()).max().unwrap_or(0);
    let mut header = String::from("p_max,delay,power_used,feasible");
    for m in 1..=states {
        header.push_str(&format!(",i_star_{m}"));
    }
    writeln!(out, "{header}")?;
    for r in rows {
        let num = |x: f64| {
            if x.is_finite() {
                format_sig(x, 12)
            } else {
                String::new()
            }
        };
        let mut line = format!(
            "{},{},{},{}",
            format_sig(r.p_max, 12),
            num(r.delay),
            num(r.power_used),
            r.feasible
        );
        for m in 0..states {
            line.push(',');
            if let Some(t) = r.thresholds.get(m) {
                line.push_str(&t.to_string());
            }
        }
        writeln!(out, "{line}")?;
    }
    out.flush()
}

/// Writes the table to `path`.
pub fn emit_table(rows: &[TradeoffRow], path: &Path) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    write_table(rows, std::io::BufWriter::new(file)).map_err(io)
}
