//! Error taxonomy shared by every module.

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum MdriError {
    /// Structurally invalid call: empty grids, mismatched shapes, bad configuration.
    #[error("usage error: {0}")]
    Usage(String),

    /// Parameter outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Linear-algebra failure: non-PSD covariance, singular matrix, asymmetry.
    #[error("matrix error: {0}")]
    Matrix(String),

    /// A moment or MGF oracle failed at a specific exponent.
    #[error("oracle failure at p = {p}: {reason}")]
    OracleFailure { p: f64, reason: String },

    /// The MGF is infinite for every nonzero grid point; no finite norm exists.
    #[error("no finite norm: {0}")]
    NoFiniteNorm(String),

    /// Empirical input fails the centering precondition.
    #[error("input not centered: mean {mean:.6e} exceeds 3 standard errors ({standard_error:.6e})")]
    NotCentered { mean: f64, standard_error: f64 },

    /// The entropy integral diverges at this exponent; the polynomial bound is unavailable.
    #[error("entropy integral diverges at p = {p} (fitted covering exponent {kappa:.4})")]
    EntropyDivergence { p: f64, kappa: f64 },

    /// The entropy series diverges for every admissible chaining parameter.
    #[error("chaining unavailable: {0}")]
    ChainingUnavailable(String),

    /// A conjugate grid does not cover the queried point; carries the box that would.
    #[error("query outside conjugate grid; extend axes to cover {required:?}")]
    GridExtension { required: Vec<(f64, f64)> },

    /// Direction set violates the separation requirement.
    #[error("invalid direction set: {0}")]
    InvalidDirectionSet(String),
}

pub type Result<T> = std::result::Result<T, MdriError>;
