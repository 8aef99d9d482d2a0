//! Error type shared by the whole crate.

use thiserror::Error;

/// Crate-wide error enumeration.
#[derive(Debug, Error)]
pub enum Error {
    /// A physical or mathematical precondition was violated (e.g. a
    /// non-positive stretch, a non-orthonormal frame).
    #[error("domain error: {0}")]
    Domain(String),

    /// An invalid configuration value (e.g. a zero Ogden exponent).
    #[error("configuration error: {0}")]
    Config(String),

    /// An API contract was violated by the caller (e.g. requesting a stress
    /// component that the deformation mode cannot determine).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A deformation-mode block consists entirely of zero stresses, so its
    /// RMS weight is undefined.
    #[error("degenerate mode weight: {0}")]
    DegenerateWeight(String),

    /// Refinement was asked to fit a model with an empty active set.
    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    /// The requested operation is not defined for this library type.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A dataset file could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
