use thiserror::Error;

/// Errors raised by chain models, samplers and the analytic routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("impossible transition: {0}")]
    Imputation(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("degenerate state: stationary mass of {0} is zero")]
    DegenerateState(String),

    #[error("enumeration budget exceeded: {needed} sequences > budget {budget}")]
    Budget { needed: f64, budget: u64 },

    #[error("no coalescence within {max_window} steps ({total_steps} transitions executed)")]
    Timeout { max_window: u64, total_steps: u64 },

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
