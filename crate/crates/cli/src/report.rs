//! Single-budget workflows: solve, simulate and the three-way verification.

use linksched::lp::LpStatus;
use linksched::{
    build_lp, evaluate, min_feasible_power, recover_pi, recover_policy, simulate, solve, solve_lp, Policy, SimConfig,
    SystemInstance,
};
use serde::Serialize;

use crate::config::RunSpec;
use crate::error::CliError;

/// Analytic against LP: relative, absolute below one unit.
pub const LP_BOUND: f64 = 1e-6;
/// Simulation against analytics, relative.
pub const SIM_BOUND: f64 = 0.02;
/// Absolute slack on simulated delay, which matters only near zero delay.
pub const SIM_DELAY_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub p_max: f64,
    pub power_threshold: f64,
    pub delay: f64,
    pub power_used: f64,
    pub thresholds: Vec<usize>,
    /// 1-based channel transmitting with a fractional probability.
    pub fractional_channel: Option<usize>,
    pub empty_queue_prob: f64,
    pub loss_prob: f64,
}

pub fn run_solve(spec: &RunSpec) -> Result<SolveReport, CliError> {
    let inst = &spec.instance;
    let sol = solve(inst).map_err(|e| infeasible_or(e, inst))?;
    let (_, metrics) = evaluate(&sol.policy, inst)?;
    Ok(SolveReport {
        p_max: inst.p_max(),
        power_threshold: inst.power_threshold(),
        delay: sol.delay,
        power_used: sol.power,
        thresholds: sol.profile.thresholds().to_vec(),
        fractional_channel: sol.profile.fractional().map(|m| m + 1),
        empty_queue_prob: sol.pi_star.probs()[0],
        loss_prob: metrics.loss_prob,
    })
}

fn infeasible_or(e: linksched::Error, inst: &SystemInstance<f64>) -> CliError {
    match e {
        linksched::Error::Infeasible { p_max, .. } => {
            let floor = min_feasible_power(inst).map_or(String::new(), |v| format!(" (minimum {v} W)"));
            CliError::Infeasible(format!(
                "budget {p_max} W cannot keep a buffer of {} stable{floor}",
                inst.buffer()
            ))
        }
        other => other.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummary {
    pub seed: u64,
    pub slots: u64,
    pub warmup: u64,
    pub mean_queue: f64,
    pub delay: f64,
    pub power: f64,
    pub drop_count: u64,
    pub transmit_count: u64,
}

fn run_sim(policy: &Policy<f64>, inst: &SystemInstance<f64>, cfg: &SimConfig) -> Result<SimSummary, CliError> {
    let r = simulate(policy, inst, cfg)?;
    Ok(SimSummary {
        seed: cfg.seed,
        slots: cfg.n_slots,
        warmup: cfg.warmup_slots,
        mean_queue: r.mean_queue,
        delay: r.empirical_delay,
        power: r.empirical_power,
        drop_count: r.drop_count,
        transmit_count: r.transmit_count,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateReport {
    pub p_max: f64,
    pub analytic_delay: f64,
    pub analytic_power: f64,
    pub simulation: SimSummary,
}

/// Simulates the optimal policy for the configured budget.
pub fn run_simulate(spec: &RunSpec) -> Result<SimulateReport, CliError> {
    let inst = &spec.instance;
    let sol = solve(inst).map_err(|e| infeasible_or(e, inst))?;
    Ok(SimulateReport {
        p_max: inst.p_max(),
        analytic_delay: sol.delay,
        analytic_power: sol.power,
        simulation: run_sim(&sol.policy, inst, &spec.sim_config())?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub delay: f64,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub pair: String,
    pub lhs: f64,
    pub rhs: f64,
    pub discrepancy: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub p_max: f64,
    pub power_threshold: f64,
    pub min_feasible_power: f64,
    /// `None` when the solver found the budget infeasible.
    pub lp: Option<Estimate>,
    pub analytic: Option<Estimate>,
    /// Skipped for infeasible budgets.
    pub simulation: Option<SimSummary>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

fn check(pair: &str, lhs: f64, rhs: f64, bound: f64, scale: f64) -> Check {
    let discrepancy = (lhs - rhs).abs() / scale;
    Check {
        pair: pair.into(),
        lhs,
        rhs,
        discrepancy,
        bound,
        passed: discrepancy <= bound,
    }
}

/// Solves the budget with the LP and in closed form, simulates the policy
/// recovered from the LP, and compares the three.
pub fn run_verify(spec: &RunSpec) -> Result<VerifyReport, CliError> {
    let inst = &spec.instance;
    let lp = solve_lp(&build_lp(inst))?;
    let closed = match solve(inst) {
        Ok(sol) => Some(sol),
        Err(linksched::Error::Infeasible { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let mut report = VerifyReport {
        p_max: inst.p_max(),
        power_threshold: inst.power_threshold(),
        min_feasible_power: min_feasible_power(inst)?,
        lp: None,
        analytic: None,
        simulation: None,
        checks: Vec::new(),
        passed: true,
    };
    let lp_ok = lp.status == LpStatus::Optimal;
    report.checks.push(Check {
        pair: "feasibility lp vs analytic".into(),
        lhs: f64::from(u8::from(lp_ok)),
        rhs: f64::from(u8::from(closed.is_some())),
        discrepancy: f64::from(u8::from(lp_ok != closed.is_some())),
        bound: 0.0,
        passed: lp_ok == closed.is_some(),
    });
    if lp_ok {
        report.lp = Some(Estimate {
            delay: lp.objective_value,
            power: lp.power_used,
        });
    }
    if let Some(sol) = &closed {
        report.analytic = Some(Estimate {
            delay: sol.delay,
            power: sol.power,
        });
    }
    if let (true, Some(sol)) = (lp_ok, &closed) {
        let unit = |x: f64| x.abs().max(1.0);
        report.checks.push(check(
            "delay analytic vs lp",
            sol.delay,
            lp.objective_value,
            LP_BOUND,
            unit(lp.objective_value),
        ));
        report.checks.push(check(
            "power analytic vs lp",
            sol.power,
            lp.power_used,
            LP_BOUND,
            unit(lp.power_used),
        ));

        let pi = recover_pi(&lp.y, &inst.channel)?;
        let policy = recover_policy(&lp.y, &pi, &inst.traffic)?;
        let sim = run_sim(&policy, inst, &spec.sim_config())?;
        let delay_scale = (sol.delay * SIM_BOUND).max(SIM_DELAY_FLOOR) / SIM_BOUND;
        report.checks.push(check(
            "delay simulation vs analytic",
            sim.delay,
            sol.delay,
            SIM_BOUND,
            delay_scale,
        ));
        report.checks.push(check(
            "power simulation vs analytic",
            sim.power,
            sol.power,
            SIM_BOUND,
            sol.power,
        ));
        report.simulation = Some(sim);
    }
    report.passed = report.checks.iter().all(|c| c.passed);
    Ok(report)
}

/// Seed for point `index` of a run seeded with `base`, independent of the
/// order in which points are scheduled.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
