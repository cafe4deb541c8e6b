use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    Dimension {
        expected: usize,
        got: usize,
        context: String,
    },

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid game: {0}")]
    Semantic(String),

    /// The input is valid but exceeds what the exhaustive routines support.
    #[error("capability limit: {0}")]
    Capability(String),

    /// An operation was called on input that does not satisfy its contract.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("internal consistency error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn dim(expected: usize, got: usize, context: impl Into<String>) -> Self {
        Error::Dimension {
            expected,
            got,
            context: context.into(),
        }
    }
}
