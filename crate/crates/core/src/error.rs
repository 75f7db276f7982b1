use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error(
        "Fock truncation breached: top-two-level population {population:.3e} exceeds \
         tolerance {tolerance:.1e} at cutoff N = {cutoff}; rerun with a larger fock cutoff"
    )]
    Truncation {
        population: f64,
        tolerance: f64,
        cutoff: usize,
    },

    #[error("state invariant violated: {0}")]
    Invariant(String),

    #[error("precondition not met: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
