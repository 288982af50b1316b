use thiserror::Error;

/// Errors produced by the bandit library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite numeric input: {0}")]
    NonFinite(&'static str),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported operation: {0}")]
    Unsupported(&'static str),

    #[error("log line {line}: {message}")]
    Log { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
