use thiserror::Error;

/// Errors produced by the solvers, the simulator and the analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("transport speed `{field}` is not positive at x = {x} (value {value})")]
    NonPositiveSpeed {
        field: &'static str,
        x: f64,
        value: f64,
    },

    #[error("parameter `{field}` is invalid: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("successive approximation did not converge after {iterations} iterations (last correction {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("point ({x}, {y}) lies outside the kernel domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error("CFL condition violated: {0}")]
    CflViolation(String),

    #[error("non-finite state detected at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("input history covers {available} s but {required} s are required")]
    InsufficientHistory { available: f64, required: f64 },

    #[error("|P(s)| dropped to {min_abs:e} on the contour (threshold {threshold:e}); refine the scan window")]
    InconclusiveContour { min_abs: f64, threshold: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
