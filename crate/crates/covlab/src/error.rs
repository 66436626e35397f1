use thiserror::Error;

/// Errors surfaced by covlab operations.
#[derive(Debug, Error)]
pub enum CovError {
    /// A parameter violated its precondition (non-positive mesh size, empty
    /// dimension, malformed input, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A ratio of measures was requested where the denominator vanished.
    #[error("undefined ratio: measure of ball with radius {radius} is zero")]
    UndefinedRatio { radius: f64 },

    /// A map evaluation produced a non-finite value.
    #[error("map evaluation failed at {point:?}: {reason}")]
    Evaluation { point: Vec<f64>, reason: String },

    /// An image-side integral was requested for a map without an inverse.
    #[error("map has no inverse oracle and grid mode is disabled")]
    MissingInverse,

    /// A point sits on the boundary of the open domain (zero complement
    /// distance), where the extended metric is undefined.
    #[error("point {point:?} has zero distance to the domain complement")]
    BoundaryPoint { point: Vec<f64> },

    /// Dimensions of two arguments do not match.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, CovError>;
