use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("Monte Carlo budget B = {budget} too small for rule `{rule}` (minimum feasible B = {min_budget})")]
    BudgetTooSmall {
        rule: String,
        budget: usize,
        min_budget: usize,
    },

    #[error("invalid order-statistic indices: {0}")]
    InvalidIndices(String),

    #[error("degenerate specification: {0}")]
    DegenerateSpec(String),

    #[error("enumeration size {size} exceeds cap {cap}")]
    CapacityExceeded { size: u128, cap: u128 },

    #[error("numerical failure at step {step}: {reason}")]
    NumericalFailure { step: usize, reason: String },

    #[error("estimator failed on resample {resample}: {reason}")]
    EstimatorFailure { resample: usize, reason: String },

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
