use thiserror::Error;

/// Failures reported by every fallible operation in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parameters outside the supported regime: {0}")]
    OutOfRegime(String),
    #[error("value out of floating range: {0}")]
    Range(String),
    #[error("failed to converge: {0}")]
    NonConvergence(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl Error {
    /// True for errors caused by bad input rather than by a numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidParameter(_) | Error::OutOfRegime(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
