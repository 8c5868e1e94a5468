//! Linear-programming route to the delay-optimal policy.
//!
//! The variables `y[i][m] = pi_i g[i][m] + xi pi_{i+1} f[i+1][m]` turn both
//! the average delay and the average power into linear functions, so the
//! constrained delay minimization becomes an LP that a plain simplex solves
//! exactly. This module is the ground truth the closed-form solver is
//! checked against.

pub mod simplex;

use crate::error::{Error, Result};
use crate::model::{ChannelModel, Policy, SteadyState, SystemInstance, TrafficModel};
use crate::scalar::Scalar;
use crate::table::Table;

pub use simplex::{LinearProgram, Row, SimplexOptions, SimplexOutcome};

/// The LP over `y`, variables ordered queue-major then channel.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem<T> {
    buffer: usize,
    states: usize,
    pub objective: Vec<T>,
    /// `sum eta_m y[i][m] = 1`
    pub normalization: Row<T>,
    /// `alpha sum eta_m P_m y[i][m] <= p_max`
    pub power: Row<T>,
    /// `y[i][m] - sum_n eta_n y[i][n] - xi sum_n eta_n y[i+1][n] <= 0`, one per cell
    pub structural: Vec<Row<T>>,
}

impl<T: Scalar> LpProblem<T> {
    pub fn variables(&self) -> usize {
        self.objective.len()
    }

    pub fn buffer(&self) -> usize {
        self.buffer
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn index(&self, i: usize, m: usize) -> usize {
        i * self.states + m
    }

    fn program(&self, objective: Vec<T>, with_power: bool) -> LinearProgram<T> {
        let mut inequalities = Vec::with_capacity(self.structural.len() + 1);
        if with_power {
            inequalities.push(self.power.clone());
        }
        inequalities.extend(self.structural.iter().cloned());
        LinearProgram {
            objective,
            equalities: vec![self.normalization.clone()],
            inequalities,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    /// Never expected: the delay objective is bounded below by zero.
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    /// Optimal `y`; all zeros unless `status` is `Optimal`.
    pub y: Table<T>,
    /// Average delay in slots.
    pub objective_value: T,
    /// Average power of `y`.
    pub power_used: T,
    /// `p_max - power_used`; zero means the budget binds.
    pub power_slack: T,
}

pub fn build_lp<T: Scalar>(inst: &SystemInstance<T>) -> LpProblem<T> {
    let q = inst.buffer();
    let ms = inst.states();
    let eta = inst.channel.eta();
    let power = inst.channel.power();
    let alpha = inst.alpha();
    let xi = inst.xi();
    let n = (q + 1) * ms;
    let idx = |i: usize, m: usize| i * ms + m;

    let mut objective = vec![T::zero(); n];
    let mut norm = vec![T::zero(); n];
    let mut pow = vec![T::zero(); n];
    for i in 0..=q {
        for m in 0..ms {
            objective[idx(i, m)] = T::from_usize_lossy(i) * eta[m] / alpha;
            norm[idx(i, m)] = eta[m];
            pow[idx(i, m)] = alpha * eta[m] * power[m];
        }
    }

    let mut structural = Vec::with_capacity(n);
    for i in 0..=q {
        for m in 0..ms {
            let mut coeffs = vec![T::zero(); n];
            for k in 0..ms {
                coeffs[idx(i, k)] = -eta[k];
                // the top row has no i + 1 term
                if i < q {
                    coeffs[idx(i + 1, k)] = -xi * eta[k];
                }
            }
            coeffs[idx(i, m)] = coeffs[idx(i, m)] + T::one();
            structural.push(Row { coeffs, rhs: T::zero() });
        }
    }

    LpProblem {
        buffer: q,
        states: ms,
        objective,
        normalization: Row {
            coeffs: norm,
            rhs: T::one(),
        },
        power: Row {
            coeffs: pow,
            rhs: inst.p_max(),
        },
        structural,
    }
}

pub fn solve_lp<T: Scalar>(lp: &LpProblem<T>) -> Result<LpSolution<T>> {
    solve_lp_with(lp, &SimplexOptions::default())
}

pub fn solve_lp_with<T: Scalar>(lp: &LpProblem<T>, opts: &SimplexOptions<T>) -> Result<LpSolution<T>> {
    let rows = lp.buffer + 1;
    let outcome = simplex::solve(&lp.program(lp.objective.clone(), true), opts)?;
    let empty = |status| LpSolution {
        status,
        y: Table::filled(rows, lp.states, T::zero()),
        objective_value: T::nan(),
        power_used: T::nan(),
        power_slack: T::nan(),
    };
    match outcome {
        SimplexOutcome::Infeasible => Ok(empty(LpStatus::Infeasible)),
        SimplexOutcome::Unbounded => Ok(empty(LpStatus::Unbounded)),
        SimplexOutcome::Optimal { x, objective } => {
            let power_used: T = x.iter().zip(&lp.power.coeffs).map(|(&a, &b)| a * b).sum();
            Ok(LpSolution {
                status: LpStatus::Optimal,
                y: Table::from_fn(rows, lp.states, |i, m| x[lp.index(i, m)]),
                objective_value: objective,
                power_used,
                power_slack: lp.power.rhs - power_used,
            })
        }
    }
}

/// Least average power over all LP-feasible `y`, ignoring the budget.
pub fn min_feasible_power<T: Scalar>(inst: &SystemInstance<T>) -> Result<T> {
    let lp = build_lp(inst);
    let program = lp.program(lp.power.coeffs.clone(), false);
    match simplex::solve(&program, &SimplexOptions::default())? {
        SimplexOutcome::Optimal { objective, .. } => Ok(objective),
        other => Err(Error::InconsistentSolution(format!(
            "minimum-power LP did not reach an optimum: {other:?}"
        ))),
    }
}

/// Queue-length distribution encoded by `y`: `pi_i = sum_m eta_m y[i][m]`.
pub fn recover_pi<T: Scalar>(y: &Table<T>, channel: &ChannelModel<T>) -> Result<SteadyState<T>> {
    if y.cols() != channel.states() {
        return Err(Error::InvalidInstance(format!(
            "y has {} columns for {} channel states",
            y.cols(),
            channel.states()
        )));
    }
    let pi: Vec<T> = (0..y.rows())
        .map(|i| y.row(i).iter().zip(channel.eta()).map(|(&v, &e)| v * e).sum::<T>())
        .collect();
    let total: T = pi.iter().copied().sum();
    if (total - T::one()).abs() > T::lit(1e-8).max(T::feas_tol()) {
        return Err(Error::InconsistentSolution(format!(
            "recovered distribution sums to {total}"
        )));
    }
    SteadyState::new(pi.into_iter().map(|p| p / total).collect())
        .map_err(|e| Error::InconsistentSolution(e.to_string()))
}

/// Transmission probabilities `(g[i][m], f[i+1][m])` realizing one cell of `y`.
///
/// The backlog is served first: `f` takes as much of `y` as `xi pi_{i+1}`
/// allows and `g` absorbs the rest. Values within the snap tolerance of 0 or 1
/// are rounded so that closed classes of the rebuilt chain stay closed.
pub fn canonical_split<T: Scalar>(y: T, pi_here: T, pi_next: T, xi: T, row: usize, channel: usize) -> Result<(T, T)> {
    let tol = T::feas_tol();
    let violation = |detail: String| Error::StructureViolation { row, channel, detail };
    let backlog = xi * pi_next;
    let upper = pi_here + backlog;
    if y < -tol || y > upper + tol * upper.max(T::one()) {
        return Err(violation(format!("y = {y} outside [0, {upper}]")));
    }
    let y = y.max(T::zero()).min(upper);
    if y <= tol && pi_here <= tol && backlog <= tol {
        return Ok((T::zero(), T::zero()));
    }
    let f = if backlog > T::zero() {
        (y / backlog).min(T::one())
    } else {
        T::zero()
    };
    let rest = y - f * backlog;
    let g = if pi_here > T::zero() {
        rest / pi_here
    } else if rest <= tol {
        T::zero()
    } else {
        return Err(violation(format!("remainder {rest} on an empty state")));
    };
    if g > T::one() + tol {
        return Err(violation(format!("g = {g} exceeds 1")));
    }
    Ok((snap(g), snap(f)))
}

fn snap<T: Scalar>(p: T) -> T {
    let tol = T::snap_tol();
    if p <= tol {
        T::zero()
    } else if p >= T::one() - tol {
        T::one()
    } else {
        p
    }
}

/// Policy whose induced chain has distribution `pi` and LP image `y`.
pub fn recover_policy<T: Scalar>(y: &Table<T>, pi: &SteadyState<T>, traffic: &TrafficModel<T>) -> Result<Policy<T>> {
    let q = pi.buffer();
    if y.rows() != q + 1 {
        return Err(Error::InvalidInstance(format!(
            "y has {} rows for buffer {q}",
            y.rows()
        )));
    }
    let p = pi.probs();
    let ms = y.cols();
    let mut g = Table::filled(q + 1, ms, T::zero());
    let mut f = Table::filled(q + 1, ms, T::zero());
    for i in 0..=q {
        let next = if i < q { p[i + 1] } else { T::zero() };
        for m in 0..ms {
            let (gi, fi) = canonical_split(y[(i, m)], p[i], next, traffic.xi(), i, m)?;
            g[(i, m)] = gi;
            if i < q {
                f[(i + 1, m)] = fi;
            }
        }
    }
    Policy::new(g, f)
}
