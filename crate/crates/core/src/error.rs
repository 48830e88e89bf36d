//! Error type shared by every stage of the pipeline.

use thiserror::Error;

/// Failures surfaced by curvature estimation, matrix factorization,
/// sampling, and posterior estimation.
#[derive(Debug, Error)]
pub enum CovError {
    /// The objective never rose above its center value on both sides of the
    /// expansion point, so no curvature scale could be bracketed.
    #[error("no curvature bracket found after {doublings} step doublings (flat or non-convex direction)")]
    FlatDirection { doublings: u32 },

    /// The objective returned NaN or infinity where a finite value was required.
    #[error("objective returned a non-finite value during {context}")]
    NonFiniteValue { context: &'static str },

    /// Rounding noise swamped the signal; no digit of the result is trustworthy.
    #[error("lost precision during {context}: every estimate is smaller than its own error bound")]
    LostPrecision { context: &'static str },

    /// An iterative procedure hit its cap without meeting its tolerance.
    #[error("{what} did not converge within {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Cholesky factorization hit a non-positive pivot.
    #[error("matrix is not positive definite: pivot {pivot} is non-positive")]
    NotPositiveDefinite { pivot: usize },

    /// Every eigenvalue of the assembled Hessian was non-positive.
    #[error("degenerate Hessian: no positive eigenvalues")]
    DegenerateHessian,

    /// Two inputs that must share a dimension do not.
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    /// A covariance-like matrix had a non-positive diagonal entry.
    #[error("non-positive diagonal entry at index {index}")]
    NonPositiveDiagonal { index: usize },

    /// Every importance weight in a batch was zero or rejected.
    #[error("all importance weights are zero")]
    AllWeightsZero,

    /// Batch pooling needs at least two batches to estimate anything.
    #[error("at least 2 batches are required, got {got}")]
    InsufficientBatches { got: usize },

    /// An option value was outside its documented range.
    #[error("invalid options: {0}")]
    InvalidOptions(String),

    /// An error that occurred while working on one coordinate or direction
    /// of a larger problem, tagged with that index.
    #[error("coordinate {index}: {source}")]
    AtCoordinate {
        index: usize,
        #[source]
        source: Box<CovError>,
    },
}

impl CovError {
    /// Wraps an error with the coordinate (or direction) index it belongs to.
    pub fn at_coordinate(self, index: usize) -> CovError {
        CovError::AtCoordinate {
            index,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, CovError>;
