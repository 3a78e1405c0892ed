use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("points are coincident (separation {separation:e} λ is below {floor:e} λ)")]
    CoincidentPoints { separation: f64, floor: f64 },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("dense system needs {required} bytes, above the {cap} byte cap; use the iterative solver")]
    MemoryCap { required: u64, cap: u64 },

    #[error("iterative solver did not converge in {iterations} iterations (best relative residual {best_residual:e})")]
    NotConverged { iterations: usize, best_residual: f64 },

    #[error("linear system is singular or ill-conditioned (condition estimate {condition:e}, residual {residual:e})")]
    Singular { condition: f64, residual: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("no sign change in bracket: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    NoBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("polarization ellipse undefined for zero intensity")]
    ZeroIntensity,

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

/// Rejects NaN and infinities.
pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::param(name, format!("must be finite, got {value}")))
    }
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<f64> {
    ensure_finite(name, value)?;
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::param(name, format!("must be positive, got {value}")))
    }
}
