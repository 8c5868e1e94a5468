//! Closed-form construction of the delay-optimal policy.
//!
//! The optimal LP solution has a threshold structure: channel `m` transmits
//! every backlogged packet once the queue reaches `i_m`, with thresholds
//! non-decreasing from the best channel (always 0) to the worst, and at most
//! one channel transmitting with a fractional probability just below its
//! threshold. Given a candidate profile the stationary distribution is an
//! affine function of `pi_0`, and `pi_0` follows from the power budget. The
//! search over profiles picks the cheapest-delay candidate that meets the
//! budget.

mod profile;
mod tables;

pub use profile::{eval_gamma, ThresholdProfile};
pub use tables::{eval_chi, eval_tables, pi_star, solve_pi0, ClosedFormTables};

use crate::error::{Error, Result};
use crate::lp::canonical_split;
use crate::model::{average_delay, Policy, SteadyState, SystemInstance};
use crate::scalar::Scalar;
use crate::table::Table;

use profile::MonotoneProfiles;

/// Profiles up to this count are searched exhaustively under `Auto`.
pub const EXHAUSTIVE_LIMIT: u128 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchStrategy {
    /// Exhaustive for small instances, frontier otherwise.
    #[default]
    Auto,
    /// Every monotone profile and every admissible fractional channel.
    Exhaustive,
    /// Walk the chain of integral profiles from the zero profile, raising
    /// one threshold at a time along the cheapest delay-per-watt edge, then
    /// bisect that chain for the budget.
    Frontier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSolution<T> {
    pub profile: ThresholdProfile,
    pub pi_star: SteadyState<T>,
    pub y_star: Table<T>,
    pub policy: Policy<T>,
    /// Average delay in slots.
    pub delay: T,
    /// Average power actually spent.
    pub power: T,
}

/// One evaluated profile: its distribution, delay and power.
#[derive(Debug, Clone)]
pub struct Candidate<T> {
    pub profile: ThresholdProfile,
    pub pi0: T,
    pub pi: SteadyState<T>,
    pub delay: T,
    pub power: T,
}

/// Upper bound `pi_i + xi pi_{i+1}` of cell `i`.
fn cell_cap<T: Scalar>(pi: &[T], xi: T, i: usize) -> T {
    pi[i] + pi.get(i + 1).map_or(T::zero(), |&p| xi * p)
}

/// Average power of a threshold-structured distribution, from the
/// per-channel sums of `y`.
fn profile_power<T: Scalar>(inst: &SystemInstance<T>, profile: &ThresholdProfile, pi: &[T], x: T) -> T {
    let xi = inst.xi();
    let eta = inst.channel.eta();
    let power = inst.channel.power();
    let top = profile.top();
    let mut total = T::zero();
    for (m, &t) in profile.thresholds().iter().enumerate() {
        let tail: T = pi[t + 1..=top].iter().copied().sum();
        let mut mass = pi[t] + (T::one() + xi) * tail;
        if profile.fractional() == Some(m) {
            mass = mass + x;
        }
        total = total + eta[m] * mass * power[m];
    }
    total * inst.alpha()
}

/// Evaluates a profile against the instance's budget.
///
/// Integral profiles must not exceed the budget; fractional ones spend it
/// exactly and need the fractional cell to stay within `[0, cap]`.
pub fn evaluate_candidate<T: Scalar>(inst: &SystemInstance<T>, profile: &ThresholdProfile) -> Result<Candidate<T>> {
    let tables = eval_tables(inst, profile);
    let pi0 = solve_pi0(inst, &tables)?;
    let pi = pi_star(&tables, pi0)?;
    let x = tables.fractional_mass(pi0);
    let tol = T::feas_tol();
    if let Some(m) = profile.fractional() {
        let cap = cell_cap(pi.probs(), inst.xi(), profile.thresholds()[m] - 1);
        if x < -tol || x > cap + tol {
            return Err(Error::ProfileInfeasible { pi0: pi0.as_f64() });
        }
    }
    let power = profile_power(inst, profile, pi.probs(), x.max(T::zero()));
    if profile.fractional().is_none() && power > inst.p_max() * (T::one() + tol) {
        return Err(Error::ProfileInfeasible { pi0: pi0.as_f64() });
    }
    Ok(Candidate {
        profile: profile.clone(),
        pi0,
        delay: average_delay(&pi, &inst.traffic),
        pi,
        power,
    })
}

/// Optimal `y` for a profile and its distribution.
///
/// Cells at or above a threshold are full, cells more than one below are
/// empty. The cell just below a threshold is derived from local balance for
/// the best channel of each tie group and is zero for the others.
pub fn assemble_y<T: Scalar>(
    inst: &SystemInstance<T>,
    profile: &ThresholdProfile,
    pi_star: &SteadyState<T>,
) -> Result<Table<T>> {
    let q = inst.buffer();
    let ms = inst.states();
    let xi = inst.xi();
    let eta = inst.channel.eta();
    let pi = pi_star.probs();
    let th = profile.thresholds();
    if pi.len() != q + 1 || th.len() != ms {
        return Err(Error::InvalidInstance(
            "profile or distribution does not match the instance".into(),
        ));
    }
    let tol = T::lit(1e-10).max(T::feas_tol());
    let mut y = Table::filled(q + 1, ms, T::zero());
    for m in 0..ms {
        for i in th[m]..=q {
            y[(i, m)] = cell_cap(pi, xi, i);
        }
        if th[m] == 0 || th[m - 1] == th[m] {
            continue;
        }
        let b = th[m] - 1;
        let below: T = eta[..m].iter().copied().sum();
        let above: T = eta[m..].iter().copied().sum();
        let v = (above * pi[b] - below * xi * pi[b + 1]) / eta[m];
        if v < -tol {
            return Err(Error::StructureViolation {
                row: b,
                channel: m,
                detail: format!("boundary mass {v} is negative"),
            });
        }
        let cap = cell_cap(pi, xi, b);
        if v > cap + tol * cap.max(T::one()) {
            return Err(Error::StructureViolation {
                row: b,
                channel: m,
                detail: format!("boundary mass {v} exceeds {cap}"),
            });
        }
        y[(b, m)] = if v.abs() <= tol { T::zero() } else { v.min(cap) };
    }
    Ok(y)
}

/// Transmission probabilities for a profile: silent below the boundary cell,
/// always on from the threshold up, and the fractional cell split as in
/// [`canonical_split`].
pub fn derive_policy<T: Scalar>(
    inst: &SystemInstance<T>,
    profile: &ThresholdProfile,
    pi_star: &SteadyState<T>,
    y_star: &Table<T>,
) -> Result<Policy<T>> {
    let q = inst.buffer();
    let ms = inst.states();
    let pi = pi_star.probs();
    let mut g = Table::filled(q + 1, ms, T::zero());
    let mut f = Table::filled(q + 1, ms, T::zero());
    for (m, &t) in profile.thresholds().iter().enumerate() {
        for i in t..=q {
            g[(i, m)] = T::one();
            if i < q {
                f[(i + 1, m)] = T::one();
            }
        }
        if t > 0 && profile.fractional() == Some(m) {
            let b = t - 1;
            let (gb, fb) = canonical_split(y_star[(b, m)], pi[b], pi[b + 1], inst.xi(), b, m)?;
            g[(b, m)] = gb;
            f[(b + 1, m)] = fb;
        } else if t > 0 && y_star[(t - 1, m)] > T::feas_tol() {
            return Err(Error::StructureViolation {
                row: t - 1,
                channel: m,
                detail: format!("mass {} on a non-fractional boundary", y_star[(t - 1, m)]),
            });
        }
    }
    Policy::new(g, f)
}

fn finish<T: Scalar>(inst: &SystemInstance<T>, cand: Candidate<T>) -> Result<ThresholdSolution<T>> {
    let y_star = assemble_y(inst, &cand.profile, &cand.pi)?;
    let policy = derive_policy(inst, &cand.profile, &cand.pi, &y_star)?;
    Ok(ThresholdSolution {
        profile: cand.profile,
        pi_star: cand.pi,
        y_star,
        policy,
        delay: cand.delay,
        power: cand.power,
    })
}

fn zero_delay<T: Scalar>(inst: &SystemInstance<T>) -> Result<ThresholdSolution<T>> {
    let profile = ThresholdProfile::zero(inst.states());
    let pi = SteadyState::empty_queue(inst.buffer());
    finish(
        inst,
        Candidate {
            profile,
            pi0: T::one(),
            pi,
            delay: T::zero(),
            power: inst.power_threshold(),
        },
    )
}

pub fn solve<T: Scalar>(inst: &SystemInstance<T>) -> Result<ThresholdSolution<T>> {
    solve_with(inst, SearchStrategy::Auto)
}

pub fn solve_with<T: Scalar>(inst: &SystemInstance<T>, strategy: SearchStrategy) -> Result<ThresholdSolution<T>> {
    if inst.p_max() >= inst.power_threshold() {
        return zero_delay(inst);
    }
    let exhaustive = match strategy {
        SearchStrategy::Exhaustive => true,
        SearchStrategy::Frontier => false,
        SearchStrategy::Auto => MonotoneProfiles::count(inst.states(), inst.buffer()) <= EXHAUSTIVE_LIMIT,
    };
    let best = if exhaustive {
        search_exhaustive(inst)?
    } else {
        Frontier::build(inst).locate(inst)?
    };
    finish(inst, best)
}

fn better<T: Scalar>(delay: T, best: T) -> bool {
    delay < best - T::lit(1e-12) * best.abs().max(T::one())
}

fn search_exhaustive<T: Scalar>(inst: &SystemInstance<T>) -> Result<Candidate<T>> {
    let mut best: Option<Candidate<T>> = None;
    let mut min_power = T::infinity();
    for thresholds in MonotoneProfiles::new(inst.states(), inst.buffer()) {
        let fractional = std::iter::once(None).chain(
            (1..thresholds.len())
                .filter(|&m| thresholds[m - 1] < thresholds[m])
                .map(Some),
        );
        for frac in fractional {
            let profile = ThresholdProfile::new(thresholds.clone(), frac, inst.buffer())?;
            if frac.is_none() {
                let tables = eval_tables(inst, &profile);
                let power = profile_power(inst, &profile, &tables.distribution(T::one() / tables.nu1), T::zero());
                if power.is_finite() {
                    min_power = min_power.min(power);
                }
            }
            let Ok(cand) = evaluate_candidate(inst, &profile) else {
                continue;
            };
            if best.as_ref().is_none_or(|b| better(cand.delay, b.delay)) {
                best = Some(cand);
            }
        }
    }
    best.ok_or(Error::Infeasible {
        p_max: inst.p_max().as_f64(),
        min_power: min_power.as_f64(),
    })
}

/// One integral profile on the delay-power frontier.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint<T> {
    pub thresholds: Vec<usize>,
    pub delay: T,
    pub power: T,
    /// Channel whose threshold was raised to reach this point.
    pub raised: Option<usize>,
}

/// Integral threshold profiles ordered by decreasing power, from the zero
/// profile to the least-power profile. Consecutive points differ by one
/// threshold step; the optimal tradeoff between two neighbours is the
/// fractional profile interpolating them.
#[derive(Debug, Clone, PartialEq)]
pub struct Frontier<T> {
    pub points: Vec<FrontierPoint<T>>,
}

impl<T: Scalar> Frontier<T> {
    pub fn build(inst: &SystemInstance<T>) -> Self {
        let q = inst.buffer();
        let ms = inst.states();
        let integral = |th: &[usize]| -> (T, T) {
            let profile = ThresholdProfile::new(th.to_vec(), None, q).expect("monotone profile");
            let tables = eval_tables(inst, &profile);
            let pi: Vec<T> = tables.distribution(T::one() / tables.nu1);
            let mean: T = pi.iter().enumerate().map(|(i, &p)| T::from_usize_lossy(i) * p).sum();
            (mean / inst.alpha(), profile_power(inst, &profile, &pi, T::zero()))
        };
        let mut th = vec![0; ms];
        let (delay, power) = integral(&th);
        let mut points = vec![FrontierPoint {
            thresholds: th.clone(),
            delay,
            power,
            raised: None,
        }];
        loop {
            let here = points.last().expect("non-empty frontier");
            let (d0, p0) = (here.delay, here.power);
            let mut step: Option<(T, Vec<usize>, T, T, usize)> = None;
            for m in 1..ms {
                if th[m] >= q || (m + 1 < ms && th[m + 1] == th[m]) {
                    continue;
                }
                let mut next = th.clone();
                next[m] += 1;
                let (d, p) = integral(&next);
                let saved = p0 - p;
                if !(saved > T::epsilon() * T::lit(16.0) * p0.abs()) || !d.is_finite() {
                    continue;
                }
                let slope = (d - d0) / saved;
                let take = match &step {
                    None => true,
                    Some((s, v, ..)) => {
                        let tie = (slope - *s).abs() <= T::lit(1e-12) * s.abs().max(T::one());
                        if tie {
                            next < *v
                        } else {
                            slope < *s
                        }
                    }
                };
                if take {
                    step = Some((slope, next, d, p, m));
                }
            }
            let Some((_, next, delay, power, m)) = step else {
                break;
            };
            th = next;
            points.push(FrontierPoint {
                thresholds: th.clone(),
                delay,
                power,
                raised: Some(m),
            });
        }
        Self { points }
    }

    /// Least power reachable by any threshold policy.
    pub fn min_power(&self) -> T {
        self.points.last().expect("non-empty frontier").power
    }

    /// Optimal candidate for the instance's budget.
    pub fn locate(&self, inst: &SystemInstance<T>) -> Result<Candidate<T>> {
        let p_max = inst.p_max();
        // first point whose power fits; powers strictly decrease along the chain
        let k = self.points.partition_point(|pt| pt.power > p_max);
        if k == self.points.len() {
            return Err(Error::Infeasible {
                p_max: p_max.as_f64(),
                min_power: self.min_power().as_f64(),
            });
        }
        let pt = &self.points[k];
        let profile = match pt.raised {
            Some(m) if k > 0 => ThresholdProfile::new(pt.thresholds.clone(), Some(m), inst.buffer())?,
            _ => ThresholdProfile::new(pt.thresholds.clone(), None, inst.buffer())?,
        };
        evaluate_candidate(inst, &profile).or_else(|_| evaluate_candidate(inst, &profile.integral()))
    }
}

/// Threshold of the worse channel in a two-state link, from `pi_0` alone.
pub fn two_state_threshold<T: Scalar>(inst: &SystemInstance<T>, pi0: T) -> Result<usize> {
    if inst.states() != 2 {
        return Err(Error::WrongArity {
            expected: 2,
            found: inst.states(),
        });
    }
    if !(pi0 > T::zero() && pi0 <= T::one()) {
        return Err(Error::ProfileInfeasible { pi0: pi0.as_f64() });
    }
    if inst.p_max() >= inst.power_threshold() {
        return Ok(0);
    }
    let eta1 = inst.channel.eta()[0];
    let ratio = (T::one() - eta1) / (eta1 * inst.xi());
    let level = if (ratio - T::one()).abs() <= T::lit(1e-12) {
        (T::one() / pi0).floor()
    } else {
        ((T::one() - (T::one() - ratio) / pi0).ln() / ratio.ln()).floor()
    };
    let level = level.to_usize().unwrap_or(usize::MAX);
    Ok(level.min(inst.buffer()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{evaluate, ChannelModel, TrafficModel};

    fn inst(eta: &[f64], power: &[f64], alpha: f64, q: usize, p_max: f64) -> SystemInstance<f64> {
        SystemInstance::new(
            ChannelModel::new(eta.to_vec(), power.to_vec()).unwrap(),
            TrafficModel::new(alpha).unwrap(),
            q,
            p_max,
        )
        .unwrap()
    }

    fn paper(p_max: f64) -> SystemInstance<f64> {
        inst(&[0.25, 0.5, 0.25], &[1.0, 2.0, 3.0], 0.5, 100, p_max)
    }

    #[test]
    fn generous_budget_is_zero_delay() {
        for p in [1.0, 1.3] {
            let sol = solve(&paper(p)).unwrap();
            assert_eq!(sol.delay, 0.0);
            assert_eq!(sol.profile.thresholds(), &[0, 0, 0]);
            assert!((sol.power - 1.0).abs() < 1e-15);
            for m in 0..3 {
                assert_eq!(sol.y_star[(0, m)], 1.0);
            }
        }
    }

    #[test]
    fn budget_is_spent_exactly() {
        let sys = paper(0.8);
        let sol = solve(&sys).unwrap();
        assert!(sol.delay > 0.0);
        let (_, metrics) = evaluate(&sol.policy, &sys).unwrap();
        assert!((metrics.avg_power - 0.8).abs() < 1e-8);
        assert!((metrics.avg_delay - sol.delay).abs() < 1e-8);
        assert!(sol.pi_star.probs()[0] > 0.0 && sol.pi_star.probs()[0] < 1.0);
    }

    #[test]
    fn strategies_agree_on_paper_instance() {
        for p in [0.76, 0.8, 0.85, 0.9, 0.99] {
            let a = solve_with(&paper(p), SearchStrategy::Exhaustive).unwrap();
            let b = solve_with(&paper(p), SearchStrategy::Frontier).unwrap();
            assert!((a.delay - b.delay).abs() < 1e-9 * a.delay.max(1.0), "p = {p}");
            assert_eq!(a.profile, b.profile, "p = {p}");
        }
    }

    #[test]
    fn budget_below_frontier_is_infeasible() {
        let err = solve(&paper(0.6)).unwrap_err();
        assert!(matches!(err, Error::Infeasible { .. }));
        let err = solve_with(&paper(0.6), SearchStrategy::Frontier).unwrap_err();
        assert!(matches!(err, Error::Infeasible { .. }));
    }

    #[test]
    fn fractional_budget_outside_segment_is_rejected() {
        // (0, 1) with channel 1 fractional covers budgets in [0.48, 0.6]
        let sys = inst(&[0.5, 0.5], &[1.0, 2.0], 0.4, 20, 0.3);
        let profile = ThresholdProfile::new(vec![0, 1], Some(1), 20).unwrap();
        assert!(matches!(
            evaluate_candidate(&sys, &profile),
            Err(Error::ProfileInfeasible { .. })
        ));
        let sys = sys.with_budget(0.5).unwrap();
        let cand = evaluate_candidate(&sys, &profile).unwrap();
        assert!((cand.power - 0.5).abs() < 1e-12);
    }

    #[test]
    fn policy_pattern_follows_thresholds() {
        let sys = paper(0.8);
        let sol = solve(&sys).unwrap();
        let th = sol.profile.thresholds().to_vec();
        let g = sol.policy.g();
        let f = sol.policy.f();
        for i in 0..=100 {
            assert_eq!(g[(i, 0)], 1.0);
            if i > 0 {
                assert_eq!(f[(i, 0)], 1.0);
            }
            for m in 1..3 {
                if i >= th[m] {
                    assert_eq!(g[(i, m)], 1.0);
                } else if i + 1 < th[m] {
                    assert_eq!(g[(i, m)], 0.0);
                    assert_eq!(f[(i + 1, m)], 0.0);
                } else if sol.profile.fractional() != Some(m) {
                    assert_eq!(g[(i, m)], 0.0);
                }
            }
        }
        assert!(sol.pi_star.probs()[sol.profile.top() + 1..].iter().all(|&p| p == 0.0));
    }

    #[test]
    fn wrong_arity_for_two_state_formula() {
        let err = two_state_threshold(&paper(0.8), 0.5).unwrap_err();
        assert_eq!(err, Error::WrongArity { expected: 2, found: 3 });
    }

    #[test]
    fn two_state_unit_ratio_branch() {
        // eta_1 = alpha makes (1 - eta_1) / (eta_1 xi) = 1
        let sys = inst(&[0.4, 0.6], &[1.0, 2.0], 0.4, 20, 0.3);
        assert_eq!(two_state_threshold(&sys, 0.25).unwrap(), 4);
        let rich = sys.with_budget(5.0).unwrap();
        assert_eq!(two_state_threshold(&rich, 1.0).unwrap(), 0);
    }

    #[test]
    fn two_state_formula_matches_solver() {
        let sys = inst(&[0.5, 0.5], &[1.0, 2.0], 0.4, 20, 0.5);
        let sol = solve(&sys).unwrap();
        let i2 = two_state_threshold(&sys, sol.pi_star.probs()[0]).unwrap();
        assert_eq!(i2, sol.profile.thresholds()[1]);
    }

    #[test]
    fn frontier_is_monotone() {
        let fr = Frontier::build(&paper(0.8));
        assert!(fr
            .points
            .windows(2)
            .all(|w| w[1].power < w[0].power && w[1].delay >= w[0].delay));
        assert!(fr.points.iter().all(|p| p.thresholds[0] == 0));
        assert!((fr.min_power() - 0.75).abs() < 1e-6);
    }

    #[test]
    fn single_precision_solve() {
        let ch = ChannelModel::<f32>::new(vec![0.25, 0.5, 0.25], vec![1.0, 2.0, 3.0]).unwrap();
        let sys = SystemInstance::new(ch, TrafficModel::new(0.5).unwrap(), 30, 0.85).unwrap();
        let sol = solve(&sys).unwrap();
        let ref64 = solve(&paper(0.85)).unwrap();
        assert_eq!(sol.profile.thresholds(), ref64.profile.thresholds());
        assert!((sol.delay as f64 - ref64.delay).abs() < 1e-3);
    }
}
