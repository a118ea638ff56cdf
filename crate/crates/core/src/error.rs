//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A value violated an operation's preconditions (empty string,
    /// non-finite number, bad residue, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An experiment or tool configuration is unusable (missing artifact,
    /// empty grid, incompatible recipe).
    #[error("configuration error: {0}")]
    Config(String),

    /// A data file or dataset is malformed or empty.
    #[error("data error: {0}")]
    Data(String),

    /// An internal invariant was violated; indicates a bug.
    #[error("internal invariant violation: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the CLI: 2 configuration, 3 data, 4 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::InvalidInput(_) | Error::Data(_) | Error::Io(_) => 3,
            Error::Internal(_) => 4,
        }
    }
}
