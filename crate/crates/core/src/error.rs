use std::fmt;

use crate::moments::InfeasibilityReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("basis of {count} multi-indices exceeds the cap of {cap}; use a smaller dimension or degree")]
    BasisCap { count: u128, cap: usize },

    #[error("moment-matching LP infeasible after {} attempt(s): {}", .0.attempts, .0)]
    Infeasible(Box<InfeasibilityReport>),

    #[error("packing stopped at {achieved} of {requested} matrices: {stats}")]
    Packing {
        achieved: usize,
        requested: usize,
        stats: CrossNormStats,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("divergence undefined: {0}")]
    Divergence(String),

    #[error("oracle contract violation: {0}")]
    Contract(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn shape(expected: impl fmt::Display, got: impl fmt::Display) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}

/// Summary of the cross-norms observed while a rejection sampler ran.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CrossNormStats {
    pub attempts: usize,
    pub rejected: usize,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl fmt::Display for CrossNormStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} attempts, {} rejected, cross-norm min/mean/max = {:.4}/{:.4}/{:.4}",
            self.attempts, self.rejected, self.min, self.mean, self.max
        )
    }
}
