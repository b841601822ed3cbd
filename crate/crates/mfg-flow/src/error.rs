//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the solver, pipeline, and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or inconsistent dimensions.
    #[error("config error: {0}")]
    Config(String),

    /// A vector that should lie on the probability simplex does not,
    /// beyond the repair tolerance.
    #[error("simplex violation: {0}")]
    Simplex(String),

    /// Numerical failure: CFL violation, non-convergence, non-finite values.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Malformed dataset or checkpoint contents.
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
