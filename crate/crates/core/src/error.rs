use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("phase index {index} out of range for {levels} phase levels")]
    IndexOutOfRange { index: usize, levels: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("antenna positions not monotone after {0} resampling rounds")]
    NonMonotoneGeometry(usize),

    #[error("search space of {size} beams exceeds budget {budget}")]
    BudgetExceeded { size: String, budget: u64 },

    #[error("user {0} has zero receive energy")]
    ZeroEnergyUser(usize),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
