//! Command-line workflows around the `linksched` solvers: config loading,
//! single-budget solves and simulations, budget sweeps with CSV output, and
//! a cross-check of the LP, the closed form and the simulator.

pub mod config;
pub mod error;
pub mod report;
pub mod sweep;

pub use config::{load_config, parse_config, parse_grid, Command, Overrides, RunSpec};
pub use error::{CliError, ConfigError, ConfigErrorKind};
pub use report::{derive_seed, run_simulate, run_solve, run_verify, SimulateReport, SolveReport, VerifyReport};
pub use sweep::{check_tradeoff, emit_table, format_sig, run_sweep, solve_point, write_table, TradeoffRow};
