//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPsd { min_eig: f64 },

    #[error("matrix is numerically singular (min eigenvalue {min_eig:.3e})")]
    Singular { min_eig: f64 },

    #[error("corruption fraction {eps} outside (0, {max}]")]
    EpsOutOfRange { eps: f64, max: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("negative weight at index {index}: {value}")]
    NegativeWeight { index: usize, value: f64 },

    #[error("weight vector violates simplex constraints: {0}")]
    SimplexViolation(String),

    #[error("spectral norm bound exceeded: estimate {estimate:.3e} > 2x supplied bound {bound:.3e}")]
    NormBoundExceeded { estimate: f64, bound: f64 },

    #[error("solver did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("binary search bracket exhausted: {0}")]
    BracketExhausted(String),

    #[error("malformed sample file: {0}")]
    MalformedFile(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
