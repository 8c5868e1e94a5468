//! Instance generators and independent oracles shared by the integration tests.
//!
//! Nothing here calls into the LP or the closed-form solver: the oracles only
//! use the chain metrics, so agreement with the solvers is meaningful.

#![allow(dead_code)]

use linksched::{evaluate, ChannelModel, Policy, SystemInstance, Table, TrafficModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn instance(eta: &[f64], power: &[f64], alpha: f64, q: usize, p_max: f64) -> SystemInstance<f64> {
    SystemInstance::new(
        ChannelModel::new(eta.to_vec(), power.to_vec()).unwrap(),
        TrafficModel::new(alpha).unwrap(),
        q,
        p_max,
    )
    .unwrap()
}

/// The three-state link used in the figures: eta = [1/4, 1/2, 1/4], P = [1, 2, 3] W.
pub fn reference(alpha: f64, q: usize, p_max: f64) -> SystemInstance<f64> {
    instance(&[0.25, 0.5, 0.25], &[1.0, 2.0, 3.0], alpha, q, p_max)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random link with `states` channel states, strictly increasing powers and
/// the budget set to 1 W (replace it with [`SystemInstance::with_budget`]).
pub fn random_link(rng: &mut ChaCha8Rng, states: usize, q: usize, alpha: f64) -> SystemInstance<f64> {
    let raw: Vec<f64> = (0..states).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut eta: Vec<f64> = raw.iter().map(|r| r / total).collect();
    let head: f64 = eta[..states - 1].iter().sum();
    eta[states - 1] = 1.0 - head;
    let mut power = Vec::with_capacity(states);
    let mut level = rng.random_range(0.5..1.5);
    for _ in 0..states {
        power.push(level);
        level += rng.random_range(0.2..2.0);
    }
    instance(&eta, &power, alpha, q, 1.0)
}

/// [`random_link`] with the buffer and arrival rate drawn too.
pub fn draw_link(
    rng: &mut ChaCha8Rng,
    states: usize,
    buffers: std::ops::RangeInclusive<usize>,
    alphas: std::ops::Range<f64>,
) -> SystemInstance<f64> {
    let q = rng.random_range(buffers);
    let alpha = rng.random_range(alphas);
    random_link(rng, states, q, alpha)
}

/// Random policy with entries in `[lo, hi]`.
pub fn random_policy(rng: &mut ChaCha8Rng, q: usize, states: usize, lo: f64, hi: f64) -> Policy<f64> {
    let mut draw = || Table::from_fn(q + 1, states, |_, _| rng.random_range(lo..=hi));
    let g = draw();
    let f = draw();
    Policy::new(g, f).unwrap()
}

/// Full transition matrix of the queue-length chain under `policy`.
pub fn transition_matrix(policy: &Policy<f64>, inst: &SystemInstance<f64>) -> Vec<Vec<f64>> {
    let q = inst.buffer();
    let eta = inst.channel.eta();
    let alpha = inst.alpha();
    let mut p = vec![vec![0.0; q + 1]; q + 1];
    for i in 0..=q {
        let up = if i < q {
            alpha * (0..eta.len()).map(|m| eta[m] * (1.0 - policy.g()[(i, m)])).sum::<f64>()
        } else {
            0.0
        };
        let down = if i > 0 {
            (1.0 - alpha) * (0..eta.len()).map(|m| eta[m] * policy.f()[(i, m)]).sum::<f64>()
        } else {
            0.0
        };
        if i < q {
            p[i][i + 1] = up;
        }
        if i > 0 {
            p[i][i - 1] = down;
        }
        p[i][i] = 1.0 - up - down;
    }
    p
}

fn square(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut out = vec![vec![0.0; n]; n];
    for (row, out_row) in a.iter().zip(&mut out) {
        for (&aik, a_k) in row.iter().zip(a) {
            if aik == 0.0 {
                continue;
            }
            for (o, &akj) in out_row.iter_mut().zip(a_k) {
                *o += aik * akj;
            }
        }
    }
    out
}

/// Distribution after `2^48` steps from an empty queue, by repeated squaring.
pub fn power_iteration(policy: &Policy<f64>, inst: &SystemInstance<f64>) -> Vec<f64> {
    let mut p = transition_matrix(policy, inst);
    for _ in 0..48 {
        p = square(&p);
        // keep rounding drift from compounding across squarings
        for row in &mut p {
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= total);
        }
    }
    let row = p[0].clone();
    let total: f64 = row.iter().sum();
    row.into_iter().map(|x| x / total).collect()
}

/// Threshold policy with an optional partial cell one level below the
/// threshold of `partial.0`, transmitting there with probability `partial.1`.
pub fn threshold_policy(q: usize, thresholds: &[usize], partial: Option<(usize, f64)>) -> Policy<f64> {
    let ms = thresholds.len();
    let mut g = Table::filled(q + 1, ms, 0.0);
    let mut f = Table::filled(q + 1, ms, 0.0);
    for (m, &t) in thresholds.iter().enumerate() {
        for i in t..=q {
            g[(i, m)] = 1.0;
            if i < q {
                f[(i + 1, m)] = 1.0;
            }
        }
    }
    if let Some((m, p)) = partial {
        let b = thresholds[m] - 1;
        g[(b, m)] = p;
        f[(b + 1, m)] = p;
    }
    Policy::new(g, f).unwrap()
}

/// Every non-decreasing vector `0 = t_0 <= ... <= t_{M-1} <= q`.
pub fn monotone_vectors(states: usize, q: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; states];
    fn rec(m: usize, cur: &mut Vec<usize>, q: usize, out: &mut Vec<Vec<usize>>) {
        if m == cur.len() {
            out.push(cur.clone());
            return;
        }
        for t in cur[m - 1]..=q {
            cur[m] = t;
            rec(m + 1, cur, q, out);
        }
    }
    if states == 1 {
        return vec![cur];
    }
    rec(1, &mut cur, q, &mut out);
    out
}

fn metrics(policy: &Policy<f64>, inst: &SystemInstance<f64>) -> (f64, f64) {
    let (_, m) = evaluate(policy, inst).unwrap();
    (m.avg_delay, m.avg_power)
}

/// Least delay over monotone threshold policies with at most one partial
/// cell, the partial probability bisected until the budget binds. `None` when
/// no such policy fits the budget.
pub fn brute_force_delay(inst: &SystemInstance<f64>) -> Option<f64> {
    let q = inst.buffer();
    let budget = inst.p_max();
    let slack = 1e-12 * budget.max(1.0);
    let mut best: Option<f64> = None;
    let mut offer = |d: f64| {
        if best.is_none_or(|b| d < b) {
            best = Some(d);
        }
    };
    for th in monotone_vectors(inst.states(), q) {
        let (d0, p0) = metrics(&threshold_policy(q, &th, None), inst);
        if p0 <= budget + slack {
            offer(d0);
        }
        for m in 1..th.len() {
            if th[m] == 0 {
                continue;
            }
            let at = |p: f64| metrics(&threshold_policy(q, &th, Some((m, p))), inst);
            let (d1, p1) = at(1.0);
            if p1 <= budget + slack {
                offer(d1);
                continue;
            }
            if p0 > budget + slack {
                continue;
            }
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if at(mid).1 <= budget {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            offer(at(lo).0);
        }
    }
    best
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

/// Relative error with an absolute floor for values near zero.
pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1.0)
}
