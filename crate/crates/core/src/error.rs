use thiserror::Error;

/// Crate-wide error type. Variants map onto the CLI exit-code contract:
/// validation errors (bad inputs/config), numerical failures (solver or
/// tolerance breakdowns), and I/O or format problems.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("memory budget exceeded: need {needed} bytes, budget {budget} bytes ({what})")]
    MemoryBudget {
        needed: u64,
        budget: u64,
        what: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
