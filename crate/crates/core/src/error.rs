use thiserror::Error;

#[derive(Debug, Error)]
pub enum MnsError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    /// Raised when an internal cross-check fails beyond roundoff; indicates a bug.
    #[error("numerical consistency check failed: {0}")]
    NumericalConsistency(String),
}

pub type Result<T> = std::result::Result<T, MnsError>;
