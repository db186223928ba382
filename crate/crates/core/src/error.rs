use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("grid step mismatch: {left} vs {right}")]
    GridMismatch { left: f64, right: f64 },

    #[error("kernel series is not summable: L1 norm {0:.6} >= 1")]
    NotSummable(f64),

    #[error("process is not stationary: spectral radius {0:.6} >= 1")]
    Unstable(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("non-positive values: {0}")]
    NonPositive(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("did not converge: {0}")]
    NoConvergence(String),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}

/// Rejects NaN and infinities with a named parameter error.
pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite, got {value}")))
    }
}
