//! Delay-optimal probabilistic transmission scheduling for a single wireless
//! link with Bernoulli arrivals, a finite buffer and an `M`-state i.i.d.
//! block-fading channel under an average power budget.
//!
//! Three independent routes compute or check the optimal policy:
//!
//! * [`lp`] solves the linear program over the occupation variables `y` with
//!   a dense simplex and recovers the policy from its vertex;
//! * [`threshold`] builds the policy in closed form from its threshold
//!   structure and searches the threshold profiles;
//! * [`sim`] replays any policy slot by slot.
//!
//! [`model`] holds the shared types and the Markov-chain metrics. Everything
//! numerical is generic over [`Scalar`] (`f32` or `f64`); the `*F64` aliases
//! below name the double-precision instantiations.

// `!(x > 0)` also rejects NaN, which `x <= 0` would let through
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod lp;
pub mod model;
pub mod scalar;
pub mod sim;
pub mod table;
pub mod threshold;

pub use error::{Error, Result};
pub use lp::{build_lp, min_feasible_power, recover_pi, recover_policy, solve_lp, LpProblem, LpSolution, LpStatus};
pub use model::{
    average_delay, average_power, derive_rates, evaluate, packet_loss, power_threshold, steady_state, BirthDeathRates,
    ChannelModel, Metrics, Policy, SteadyState, SystemInstance, TrafficModel,
};
pub use scalar::Scalar;
pub use sim::{empirical_distribution, simulate, SimConfig, SimReport};
pub use table::Table;
pub use threshold::{solve, solve_with, two_state_threshold, SearchStrategy, ThresholdProfile, ThresholdSolution};

pub type ChannelModelF64 = ChannelModel<f64>;
pub type TrafficModelF64 = TrafficModel<f64>;
pub type PolicyF64 = Policy<f64>;
pub type SystemInstanceF64 = SystemInstance<f64>;
pub type SteadyStateF64 = SteadyState<f64>;
pub type MetricsF64 = Metrics<f64>;
pub type LpSolutionF64 = LpSolution<f64>;
pub type ThresholdSolutionF64 = ThresholdSolution<f64>;
