//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("operands live on different grids: {0}")]
    GridMismatch(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite values in {0}")]
    NonFinite(String),

    #[error("velocity field is not divergence-free: max spectral divergence {max_div:e} exceeds {tol:e}")]
    NotDivergenceFree { max_div: f64, tol: f64 },

    #[error("not enough data for {what}: need {need}, have {have}")]
    InsufficientData {
        what: &'static str,
        need: usize,
        have: usize,
    },

    #[error("construction failed: {0}")]
    ConstructionFailed(String),

    #[error("time integration aborted: {0}")]
    Unstable(String),

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parameter(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
