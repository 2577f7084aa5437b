use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sizing error: {0}")]
    Sizing(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("self-check `{what}` failed: {value:.3e} exceeds tolerance {tolerance:.3e}")]
    SelfCheck {
        what: &'static str,
        value: f64,
        tolerance: f64,
    },

    #[error("non-finite state at t = {t}; last valid time {last_valid}")]
    BlowUp { t: f64, last_valid: f64 },

    #[error("caustic at t = {t}: A + iB vanishes on the time grid, refine dt")]
    Caustic { t: f64 },

    #[error("operator failed linearity spot-check (defect {defect:.3e})")]
    NotLinear { defect: f64 },

    #[error("fit refused: {0}")]
    FitRefused(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
