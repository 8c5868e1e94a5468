//! Run configuration: a TOML document describing the link, the budget and
//! the per-command settings.
//!
//! ```toml
//! command = "sweep"           # optional, the subcommand takes precedence
//! alpha = 0.5                 # arrival probability per slot
//! buffer = 100                # buffer capacity in packets
//! p_max = 0.8                 # average power budget in watts
//! output = "tradeoff.csv"     # optional, stdout when absent
//!
//! [channel]
//! eta = [0.25, 0.5, 0.25]     # state probabilities, best state first
//! power = [1.0, 2.0, 3.0]     # transmit power per state in watts
//!
//! [sweep]                     # either an explicit grid ...
//! grid = [0.76, 0.8, 0.9, 1.0]
//! # ... or start, stop and a point count
//! # start = 0.76
//! # stop = 1.2
//! # steps = 45
//!
//! [sim]
//! slots = 1000000
//! seed = 42
//! warmup = 10000
//! ```
//!
//! Every value is checked when the file is loaded and errors name the line
//! of the offending value.

use std::ops::Range;
use std::path::{Path, PathBuf};

use linksched::sim::DEFAULT_WARMUP;
use linksched::{ChannelModel, SimConfig, SystemInstance, TrafficModel};
use serde::Deserialize;
use toml::Spanned;

use crate::error::{CliError, ConfigError, ConfigErrorKind};

pub const DEFAULT_SLOTS: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Sweep,
    Simulate,
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Solve => "solve",
            Self::Sweep => "sweep",
            Self::Simulate => "simulate",
            Self::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    /// The link under the configured budget. Without `p_max` in the file the
    /// budget is the power threshold, which only sweeps accept.
    pub instance: SystemInstance<f64>,
    pub command: Command,
    pub sweep_grid: Option<Vec<f64>>,
    pub sim: Option<SimConfig>,
    pub output_path: Option<PathBuf>,
    budget_given: bool,
    origin: String,
}

/// Command-line values that replace their config counterparts.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub command: Option<Command>,
    pub output: Option<PathBuf>,
    pub grid: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub slots: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: Option<Spanned<Command>>,
    alpha: Spanned<f64>,
    buffer: Spanned<usize>,
    p_max: Option<Spanned<f64>>,
    output: Option<String>,
    channel: RawChannel,
    sweep: Option<Spanned<RawSweep>>,
    sim: Option<Spanned<RawSim>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    eta: Spanned<Vec<f64>>,
    power: Spanned<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    grid: Option<Spanned<Vec<f64>>>,
    start: Option<f64>,
    stop: Option<f64>,
    steps: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    slots: Option<u64>,
    seed: Option<u64>,
    warmup: Option<u64>,
}

struct Located<'a> {
    text: &'a str,
    origin: &'a str,
}

impl Located<'_> {
    fn line_of(&self, offset: usize) -> usize {
        1 + self.text[..offset.min(self.text.len())].matches('\n').count()
    }

    fn error(&self, span: Option<Range<usize>>, kind: ConfigErrorKind, message: impl Into<String>) -> ConfigError {
        ConfigError {
            origin: self.origin.to_string(),
            line: span.map(|s| self.line_of(s.start)),
            kind,
            message: message.into(),
        }
    }

    fn invariant<T>(&self, value: &Spanned<T>, message: impl Into<String>) -> ConfigError {
        self.error(Some(value.span()), ConfigErrorKind::Invariant, message)
    }
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<RunSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(parse_config(&text, &path.display().to_string())?)
}

/// Validates a config document; `origin` names it in error messages.
pub fn parse_config(text: &str, origin: &str) -> Result<RunSpec, ConfigError> {
    let at = Located { text, origin };
    if let Err(e) = text.parse::<toml::Table>() {
        return Err(at.error(e.span(), ConfigErrorKind::Parse, e.message()));
    }
    let raw: RawConfig = toml::from_str(text).map_err(|e| at.error(e.span(), ConfigErrorKind::Schema, e.message()))?;

    let channel =
        ChannelModel::new(raw.channel.eta.get_ref().clone(), raw.channel.power.get_ref().clone()).map_err(|e| {
            let message = e.to_string().trim_start_matches("invalid instance: ").to_string();
            if message.contains("power") {
                at.invariant(&raw.channel.power, message)
            } else {
                at.invariant(&raw.channel.eta, message)
            }
        })?;
    let traffic = TrafficModel::new(*raw.alpha.get_ref()).map_err(|_| {
        at.invariant(
            &raw.alpha,
            format!("alpha = {} must lie in (0, 1)", raw.alpha.get_ref()),
        )
    })?;
    let buffer = *raw.buffer.get_ref();
    if buffer < 1 {
        return Err(at.invariant(&raw.buffer, "buffer must hold at least one packet"));
    }
    let p_max = match &raw.p_max {
        Some(p) if !(*p.get_ref() > 0.0 && p.get_ref().is_finite()) => {
            return Err(at.invariant(p, format!("p_max = {} must be positive", p.get_ref())));
        }
        Some(p) => *p.get_ref(),
        None => linksched::power_threshold(&traffic, &channel),
    };
    let instance = SystemInstance::new(channel, traffic, buffer, p_max)
        .map_err(|e| at.error(None, ConfigErrorKind::Invariant, e.to_string()))?;

    let sweep_grid = match &raw.sweep {
        None => None,
        Some(s) => {
            let span = s.get_ref().grid.as_ref().map_or(s.span(), |g| g.span());
            Some(sweep_grid(s.get_ref()).map_err(|m| at.error(Some(span), ConfigErrorKind::Invariant, m))?)
        }
    };
    let sim = match &raw.sim {
        None => None,
        Some(s) => {
            let r = s.get_ref();
            let slots = r.slots.unwrap_or(DEFAULT_SLOTS);
            let warmup = r.warmup.unwrap_or(DEFAULT_WARMUP.min(slots.saturating_sub(1)));
            Some(
                SimConfig::new(slots, r.seed.unwrap_or(DEFAULT_SEED), warmup)
                    .map_err(|e| at.invariant(s, e.to_string()))?,
            )
        }
    };

    let spec = RunSpec {
        instance,
        command: raw.command.as_ref().map_or(Command::Solve, |c| *c.get_ref()),
        sweep_grid,
        sim,
        output_path: raw.output.map(PathBuf::from),
        budget_given: raw.p_max.is_some(),
        origin: origin.to_string(),
    };
    if let Some(c) = &raw.command {
        spec.check_command().map_err(|mut e| {
            e.line = Some(at.line_of(c.span().start));
            e
        })?;
    }
    Ok(spec)
}

fn sweep_grid(s: &RawSweep) -> Result<Vec<f64>, String> {
    let grid = match (&s.grid, s.start, s.stop, s.steps) {
        (Some(g), None, None, None) => g.get_ref().clone(),
        (None, Some(start), Some(stop), Some(steps)) => linspace(start, stop, steps)?,
        _ => return Err("give either `grid` or all of `start`, `stop` and `steps`".into()),
    };
    check_grid(&grid)?;
    Ok(grid)
}

fn linspace(start: f64, stop: f64, steps: usize) -> Result<Vec<f64>, String> {
    match steps {
        0 => Err("a grid needs at least one point".into()),
        1 => Ok(vec![start]),
        _ => {
            let width = stop - start;
            let last = (steps - 1) as f64;
            Ok((0..steps)
                .map(|k| {
                    if k + 1 == steps {
                        stop
                    } else {
                        start + width * k as f64 / last
                    }
                })
                .collect())
        }
    }
}

fn check_grid(grid: &[f64]) -> Result<(), String> {
    if grid.is_empty() {
        return Err("a grid needs at least one point".into());
    }
    if let Some(p) = grid.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
        return Err(format!("grid budget {p} must be positive"));
    }
    if let Some(w) = grid.windows(2).find(|w| w[1] <= w[0]) {
        return Err(format!(
            "grid must be strictly increasing, found {} then {}",
            w[0], w[1]
        ));
    }
    Ok(())
}

/// Parses `start:stop:steps` into an inclusive grid of `steps` points.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let [start, stop, steps] = parts.as_slice() else {
        return Err(format!("expected start:stop:steps, got `{text}`"));
    };
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("`{s}`: {e}"));
    let steps = steps.trim().parse::<usize>().map_err(|e| format!("`{steps}`: {e}"))?;
    let grid = linspace(num(start)?, num(stop)?, steps)?;
    check_grid(&grid)?;
    Ok(grid)
}

impl RunSpec {
    /// Applies command-line values and rechecks what the command needs.
    pub fn with_overrides(mut self, ov: Overrides) -> Result<Self, ConfigError> {
        if let Some(c) = ov.command {
            self.command = c;
        }
        if let Some(p) = ov.output {
            self.output_path = Some(p);
        }
        if let Some(g) = ov.grid {
            check_grid(&g).map_err(|m| self.error(ConfigErrorKind::Invariant, m))?;
            self.sweep_grid = Some(g);
        }
        if ov.seed.is_some() || ov.slots.is_some() {
            let base = self.sim_config();
            let slots = ov.slots.unwrap_or(base.n_slots);
            let warmup = base.warmup_slots.min(slots.saturating_sub(1));
            self.sim = Some(
                SimConfig::new(slots, ov.seed.unwrap_or(base.seed), warmup)
                    .map_err(|e| self.error(ConfigErrorKind::Invariant, e.to_string()))?,
            );
        }
        self.check_command()?;
        Ok(self)
    }

    /// Simulation settings, with the defaults filled in.
    pub fn sim_config(&self) -> SimConfig {
        self.sim
            .unwrap_or_else(|| SimConfig::new(DEFAULT_SLOTS, DEFAULT_SEED, DEFAULT_WARMUP).expect("defaults are valid"))
    }

    /// Whether the file set `p_max` rather than leaving the threshold default.
    pub fn budget_given(&self) -> bool {
        self.budget_given
    }

    fn error(&self, kind: ConfigErrorKind, message: impl Into<String>) -> ConfigError {
        ConfigError {
            origin: self.origin.clone(),
            line: None,
            kind,
            message: message.into(),
        }
    }

    fn check_command(&self) -> Result<(), ConfigError> {
        let missing = |what: &str| {
            self.error(
                ConfigErrorKind::Schema,
                format!("`{}` needs {what}", self.command.name()),
            )
        };
        match self.command {
            Command::Sweep if self.sweep_grid.is_none() => Err(missing("a [sweep] grid or --grid")),
            Command::Solve | Command::Simulate | Command::Verify if !self.budget_given => Err(missing("`p_max`")),
            _ => Ok(()),
        }
    }
}
