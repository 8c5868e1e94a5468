use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("simplex exceeded {limit} pivots without terminating")]
    IterationLimit { limit: usize },

    #[error("inconsistent LP solution: {0}")]
    InconsistentSolution(String),

    #[error("structure violation at queue length {row}, channel {channel}: {detail}")]
    StructureViolation { row: usize, channel: usize, detail: String },

    #[error("threshold profile cannot meet the power budget (pi0 = {pi0})")]
    ProfileInfeasible { pi0: f64 },

    #[error("power budget {p_max} is below the minimum feasible average power {min_power}")]
    Infeasible { p_max: f64, min_power: f64 },

    #[error("expected {expected} channel states, found {found}")]
    WrongArity { expected: usize, found: usize },
}
