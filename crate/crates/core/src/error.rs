use thiserror::Error;

/// Errors produced by samplers, targets and diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is outside its allowed range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Inputs are structurally wrong (dimension mismatch, empty pool, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The chain reached a state it cannot legally be in, e.g. a walker
    /// sitting on a point of zero target density.
    #[error("invalid chain state: {0}")]
    InvalidState(String),

    /// A numerical computation failed (singular matrix, zero variance, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
