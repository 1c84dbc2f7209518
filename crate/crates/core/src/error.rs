use alloc::string::String;

/// Errors raised by the core numerics.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Matrix/vector shapes do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// A parameter violates its documented domain.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter {
        /// Name of the offending field.
        field: &'static str,
        /// Human readable constraint.
        reason: String,
    },
    /// A computation left the representable floating point range.
    #[error("numerical divergence: {0}")]
    Divergence(String),
    /// Too many Monte Carlo trials produced non-finite states.
    #[error("{diverged} of {trials} trials diverged")]
    TrialsDiverged {
        /// Number of non-finite trials.
        diverged: usize,
        /// Total number of trials run.
        trials: usize,
    },
    /// Adaptive quadrature did not reach the requested tolerance.
    #[error("quadrature did not converge to {tol:e} (last change {achieved:e})")]
    Tolerance {
        /// Requested absolute tolerance.
        tol: f64,
        /// Change between the last two refinements.
        achieved: f64,
    },
}

/// Result alias for the core crate.
pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
