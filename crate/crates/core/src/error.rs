use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SvwError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: expected {expected} nodes, got {actual}")]
    GridMismatch { expected: usize, actual: usize },

    #[error("inverse of the speed primitive did not converge for y = {y} after {iterations} iterations")]
    IterationFailure { y: f64, iterations: usize },

    #[error("time step {dt} exceeds the accuracy bound dx/(2 c2) = {bound}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("window selects no samples")]
    EmptyWindow,

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("io failure: {0}")]
    Io(#[from] io::Error),

    #[error("serialization failure: {0}")]
    Json(#[from] serde_json::Error),
}

impl SvwError {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            SvwError::ConfigInvalid(_) | SvwError::InvalidParameter(_) | SvwError::CflViolation { .. } => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, SvwError>;
