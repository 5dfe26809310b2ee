//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any module in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shapes are incompatible with the requested operation.
    #[error("shape error: {0}")]
    Shape(String),

    /// Malformed input text (corpus files, checkpoints, model files).
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numeric contract was violated (NaN where finite values are required).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An optimizer step was attempted on a parameter with no gradient.
    #[error("missing gradient for parameter `{0}`")]
    MissingGradient(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Shorthand used by parsers to report an error at a 1-based line number.
    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
