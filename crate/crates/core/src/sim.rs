//! Slot-level Monte Carlo of the queue under a transmission policy.
//!
//! Each slot observes the backlog left by the previous slot, draws an arrival
//! and a channel state, admits the arrival unless the buffer is full (a drop
//! is counted otherwise), then draws the transmit decision from `g` or `f`
//! and removes one packet on success.
//!
//! Randomness comes from ChaCha8 seeded with the 64-bit seed, split into
//! three streams (arrivals, channel states, transmit decisions) so that each
//! source can be varied independently. Outputs are bit-identical for equal
//! inputs on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Policy, SteadyState, SystemInstance};
use crate::scalar::Scalar;

pub const DEFAULT_WARMUP: u64 = 10_000;

const ARRIVAL_STREAM: u64 = 0;
const CHANNEL_STREAM: u64 = 1;
const DECISION_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub n_slots: u64,
    pub seed: u64,
    /// Slots discarded before statistics are collected.
    pub warmup_slots: u64,
}

impl SimConfig {
    pub fn new(n_slots: u64, seed: u64, warmup_slots: u64) -> Result<Self> {
        if n_slots == 0 || warmup_slots >= n_slots {
            return Err(Error::InvalidInstance(format!(
                "need 1 <= warmup ({warmup_slots}) + 1 <= slots ({n_slots})"
            )));
        }
        Ok(Self {
            n_slots,
            seed,
            warmup_slots,
        })
    }

    /// `n_slots` with the default warmup.
    pub fn with_slots(n_slots: u64, seed: u64) -> Result<Self> {
        Self::new(n_slots, seed, DEFAULT_WARMUP.min(n_slots.saturating_sub(1)))
    }

    pub fn measured_slots(&self) -> u64 {
        self.n_slots - self.warmup_slots
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub alpha: f64,
    /// Time-average backlog at slot ends after warmup.
    pub mean_queue: f64,
    /// `mean_queue / alpha`.
    pub empirical_delay: f64,
    /// Average transmit power per measured slot, in watts.
    pub empirical_power: f64,
    pub drop_count: u64,
    pub transmit_count: u64,
    /// Slot-end backlog histogram over measured slots.
    pub occupancy: Vec<u64>,
    pub measured_slots: u64,
    /// Whole-run counters, warmup included.
    pub arrivals_accepted: u64,
    pub departures: u64,
    pub final_queue: u64,
}

impl SimReport {
    pub fn drop_rate(&self) -> f64 {
        self.drop_count as f64 / self.measured_slots as f64
    }
}

fn streams(seed: u64) -> [ChaCha8Rng; 3] {
    [ARRIVAL_STREAM, CHANNEL_STREAM, DECISION_STREAM].map(|s| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s);
        rng
    })
}

pub fn simulate<T: Scalar>(policy: &Policy<T>, inst: &SystemInstance<T>, cfg: &SimConfig) -> Result<SimReport> {
    let q_max = inst.buffer();
    if policy.buffer() != q_max || policy.states() != inst.states() {
        return Err(Error::InvalidInstance(format!(
            "policy is {} x {} but the instance needs {} x {}",
            policy.buffer() + 1,
            policy.states(),
            q_max + 1,
            inst.states()
        )));
    }
    let alpha = inst.alpha().as_f64();
    let power: Vec<f64> = inst.channel.power().iter().map(|p| p.as_f64()).collect();
    let mut cumulative: Vec<f64> = inst
        .channel
        .eta()
        .iter()
        .scan(0.0, |acc, e| {
            *acc += e.as_f64();
            Some(*acc)
        })
        .collect();
    // guard against the last bucket sitting below 1 by rounding
    *cumulative.last_mut().expect("at least one state") = f64::INFINITY;
    let g: Vec<f64> = policy.g().iter().map(|p| p.as_f64()).collect();
    let f: Vec<f64> = policy.f().iter().map(|p| p.as_f64()).collect();
    let ms = inst.states();

    let [mut arrivals, mut channel, mut decisions] = streams(cfg.seed);
    let mut queue = 0usize;
    let mut occupancy = vec![0u64; q_max + 1];
    let mut energy = 0.0f64;
    let (mut drops, mut sends) = (0u64, 0u64);
    let (mut accepted, mut departed) = (0u64, 0u64);

    for slot in 0..cfg.n_slots {
        let measured = slot >= cfg.warmup_slots;
        let prev = queue;
        let arrived = arrivals.random::<f64>() < alpha;
        let u = channel.random::<f64>();
        let state = cumulative.partition_point(|&c| c <= u).min(ms - 1);
        let u_send = decisions.random::<f64>();

        if arrived {
            if queue == q_max {
                if measured {
                    drops += 1;
                }
            } else {
                queue += 1;
                accepted += 1;
            }
        }
        let p_send = if arrived {
            g[prev * ms + state]
        } else if prev > 0 {
            f[prev * ms + state]
        } else {
            0.0
        };
        if queue > 0 && u_send < p_send {
            queue -= 1;
            departed += 1;
            if measured {
                sends += 1;
                energy += power[state];
            }
        }
        if measured {
            occupancy[queue] += 1;
        }
    }

    let measured = cfg.measured_slots();
    let backlog: u128 = occupancy.iter().enumerate().map(|(i, &c)| i as u128 * c as u128).sum();
    let mean_queue = backlog as f64 / measured as f64;
    Ok(SimReport {
        alpha,
        mean_queue,
        empirical_delay: mean_queue / alpha,
        empirical_power: energy / measured as f64,
        drop_count: drops,
        transmit_count: sends,
        occupancy,
        measured_slots: measured,
        arrivals_accepted: accepted,
        departures: departed,
        final_queue: queue as u64,
    })
}

/// Normalized occupancy histogram.
pub fn empirical_distribution<T: Scalar>(report: &SimReport) -> Result<SteadyState<T>> {
    let total: u64 = report.occupancy.iter().sum();
    if total == 0 {
        return Err(Error::InvalidInstance("empty occupancy histogram".into()));
    }
    let pi = report
        .occupancy
        .iter()
        .map(|&c| T::lit(c as f64 / total as f64))
        .collect();
    SteadyState::new(pi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChannelModel, TrafficModel};

    fn reference_link(q: usize) -> SystemInstance<f64> {
        SystemInstance::new(
            ChannelModel::new(vec![0.25, 0.5, 0.25], vec![1.0, 2.0, 3.0]).unwrap(),
            TrafficModel::new(0.5).unwrap(),
            q,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(0, 1, 0).is_err());
        assert!(SimConfig::new(10, 1, 10).is_err());
        assert_eq!(SimConfig::with_slots(5, 1).unwrap().warmup_slots, 4);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let sys = reference_link(10);
        let policy = Policy::new(
            crate::table::Table::filled(11, 3, 0.4),
            crate::table::Table::filled(11, 3, 0.6),
        )
        .unwrap();
        let cfg = SimConfig::new(50_000, 7, 1_000).unwrap();
        let a = simulate(&policy, &sys, &cfg).unwrap();
        let b = simulate(&policy, &sys, &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate(&policy, &sys, &SimConfig::new(50_000, 8, 1_000).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn conservation_and_histogram_totals() {
        let sys = reference_link(6);
        let policy = Policy::new(
            crate::table::Table::filled(7, 3, 0.3),
            crate::table::Table::filled(7, 3, 0.5),
        )
        .unwrap();
        let cfg = SimConfig::new(20_000, 3, 500).unwrap();
        let r = simulate(&policy, &sys, &cfg).unwrap();
        assert_eq!(r.arrivals_accepted, r.departures + r.final_queue);
        assert_eq!(r.occupancy.iter().sum::<u64>(), cfg.measured_slots());
        assert_eq!(r.empirical_delay, r.mean_queue / 0.5);
    }

    #[test]
    fn never_transmit_saturates() {
        let sys = SystemInstance::new(
            ChannelModel::new(vec![0.25, 0.5, 0.25], vec![1.0, 2.0, 3.0]).unwrap(),
            TrafficModel::new(0.3).unwrap(),
            5,
            1.0,
        )
        .unwrap();
        let r = simulate(&Policy::never(5, 3), &sys, &SimConfig::new(200_000, 1, 10_000).unwrap()).unwrap();
        assert_eq!(r.transmit_count, 0);
        assert_eq!(r.empirical_power, 0.0);
        assert!((r.drop_rate() - 0.3).abs() < 0.3 * 0.02);
        let pi = empirical_distribution::<f64>(&r).unwrap();
        assert_eq!(pi.probs()[5], 1.0);
    }

    #[test]
    fn empty_histogram_is_rejected() {
        let r = SimReport {
            alpha: 0.5,
            mean_queue: 0.0,
            empirical_delay: 0.0,
            empirical_power: 0.0,
            drop_count: 0,
            transmit_count: 0,
            occupancy: vec![0, 0],
            measured_slots: 0,
            arrivals_accepted: 0,
            departures: 0,
            final_queue: 0,
        };
        assert!(empirical_distribution::<f64>(&r).is_err());
    }
}
