use thiserror::Error;

/// Errors raised by the tBFA library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TbfaError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("corrupt parameters: {0}")]
    CorruptParams(String),
    #[error("empty dataset")]
    EmptyData,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("non-finite log-likelihood at iteration {iteration}")]
    Divergence { iteration: usize },
    #[error("singular information matrix; null directions: {null_directions:?}")]
    Singular { null_directions: Vec<String> },
    #[error("selection failed: {0}")]
    Selection(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for TbfaError {
    fn from(e: std::io::Error) -> Self {
        TbfaError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, TbfaError>;
