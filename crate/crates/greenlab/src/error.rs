//! Error taxonomy shared by all modules.

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the laboratory.
///
/// `InvalidInput` and `InvalidMap` are caller errors (bad parameters or a bad
/// map description). `Degenerate`, `NonConvergence` and `Numeric` are runtime
/// numerical failures. `Unsupported` marks operations that are well-defined
/// mathematically but outside what this implementation can run (for example
/// measure sampling for a P^2 map with no preimage solver).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("degenerate evaluation: {0}")]
    Degenerate(String),

    #[error("no convergence in {what} after {iterations} iterations")]
    NonConvergence { what: String, iterations: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid_input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn invalid_map(msg: impl Into<String>) -> Self {
        Error::InvalidMap(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }
}
