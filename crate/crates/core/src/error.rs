use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid class {index}: {reason}")]
    InvalidClass { index: usize, reason: String },

    #[error("sensitivities must be strictly decreasing (classes {first} and {second} are out of order or tied)")]
    UnsortedSensitivities { first: usize, second: usize },

    #[error("invalid cost model for queue {index}: {reason}")]
    InvalidCostModel { index: usize, reason: String },

    #[error("a system needs at least one class and one queue")]
    EmptySystem,

    #[error("infeasible: total load exceeds capacity ({load} >= {capacity})")]
    Infeasible { load: f64, capacity: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("row {row} of the routing matrix is not stochastic: {reason}")]
    NotStochastic { row: usize, reason: String },

    #[error("flow on queue {queue} ({flow}) reaches its capacity ({capacity})")]
    InfeasibleFlow { queue: usize, flow: f64, capacity: f64 },

    #[error("invalid prices: {0}")]
    InvalidPrices(String),

    #[error("prices are not decreasing along the delay order (queue {queue}); the allocation is not optimal")]
    NonMonotonePrices { queue: usize },

    #[error("no feasible starting point found")]
    NoFeasibleStart,

    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),

    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),

    #[error("invalid sensitivity distribution: {0}")]
    InvalidDistribution(String),

    #[error("no equilibrium found within the bisection bracket: {0}")]
    NoSolution(String),

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}
