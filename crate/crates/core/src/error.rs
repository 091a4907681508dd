//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid mismatch: amplitudes live on different tau grids")]
    GridMismatch,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("support undefined: amplitude has zero norm")]
    UndefinedSupport,

    #[error("truncation error {lost:.3e} exceeds budget {budget:.3e}")]
    Truncation { lost: f64, budget: f64 },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("input is outside the honest subspace (overlap with reference {overlap:.6})")]
    NotHonest { overlap: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("outcome probabilities sum to {0}, exceeding 1")]
    ProbabilityOverflow(f64),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("overflow guard: N*k = {0} exceeds the exact-count limit")]
    Overflow(usize),

    #[error("malformed announcement: {0}")]
    MalformedAnnouncement(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
