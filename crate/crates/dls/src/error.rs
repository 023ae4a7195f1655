//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Rejected parameters: invalid loop bounds, missing or non-positive
    /// technique constants, malformed configuration values.
    #[error("configuration error: {0}")]
    Config(String),

    /// API misuse: an operation called in the wrong mode or at the wrong
    /// time (e.g. `end_loop` before the loop terminated).
    #[error("usage error: {0}")]
    Usage(String),

    /// Malformed input data; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A runtime guarantee was violated (e.g. an iteration executed twice).
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
