use thiserror::Error;

/// Errors raised across the synthesis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid privacy budget {0}: epsilon must be finite and > 0")]
    InvalidBudget(f64),

    #[error("invalid dimension {got}: expected a value in [{min}, {max}]")]
    InvalidDimension { got: usize, min: usize, max: usize },

    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("epsilon * n = {0} must exceed 1")]
    InvalidRegime(f64),

    #[error("point {index} lies outside the domain: {reason}")]
    OutOfDomain { index: usize, reason: String },

    #[error("lattice would hold {count} anchors (cap {cap}); increase the cell side")]
    LatticeTooLarge { count: usize, cap: usize },

    #[error("linear program failed after {iterations} pivots: {reason}")]
    Solver { iterations: usize, reason: String },

    #[error("transport instance too large ({reason}); use the sampled estimator")]
    SizeOverflow { reason: String },

    #[error("row {row}, column {col}: {reason}")]
    Parse { row: usize, col: usize, reason: String },

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Validation failures map to exit code 2, everything else to 3.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::InvalidBudget(_)
                | Error::InvalidDimension { .. }
                | Error::InsufficientData { .. }
                | Error::InvalidRegime(_)
                | Error::OutOfDomain { .. }
                | Error::Parse { .. }
                | Error::Malformed(_)
        )
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_budget(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidBudget(epsilon))
    }
}
