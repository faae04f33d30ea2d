//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by entropy functionals, learners, and oracle estimators.
#[derive(Debug, Error)]
pub enum MeeError {
    /// The information potential came out nonpositive, so its logarithm is
    /// undefined. Only possible for sign-changing windowing functions; the
    /// chosen window is unusable on this data.
    #[error("information potential is nonpositive ({0}); the windowing function is unusable on this data")]
    NonpositivePotential(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Projected-gradient target optimization failed; `target` names which
    /// population target could not be fit.
    #[error("optimization of target `{target}` failed: {source}")]
    TargetFailed {
        target: &'static str,
        #[source]
        source: Box<MeeError>,
    },
}

impl MeeError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        MeeError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
