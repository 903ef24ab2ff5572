use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition or invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// The input is well formed but carries no usable variation
    /// (for example a constant series handed to a variance-normalised statistic).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A numerical operation broke down at a given time step.
    #[error("numerical error at t={step}: {msg}")]
    Numerical { step: usize, msg: String },

    /// A file could not be parsed.
    #[error("format error at line {line}: {msg}")]
    Format { line: u64, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
}
