//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by distribution construction, bound computation,
/// classifier evaluation, and vicinity geometry.
#[derive(Debug, Error)]
pub enum Error {
    /// A density evaluation produced NaN or infinity.
    #[error("distribution produced a non-finite density value at cell {cell}")]
    NonFiniteDensity { cell: usize },

    /// A class carries zero probability mass on the grid domain.
    #[error("class {class} has zero mass on the domain")]
    EmptyClass { class: usize },

    /// More than 1% of the analytic mass falls outside the requested domain.
    #[error("domain clips {clipped_percent:.3}% of the distribution's mass (limit 1%)")]
    DomainTooSmall { clipped_percent: f64 },

    /// Grid cells are too coarse to discretize the vicinity kernel.
    #[error(
        "grid cell size {cell_size} exceeds the resolution floor {max_allowed} \
         (epsilon/5) along dimension {dim}"
    )]
    ResolutionTooCoarse {
        dim: usize,
        cell_size: f64,
        max_allowed: f64,
    },

    /// Tolerance level outside [0, 1/2).
    #[error("tolerance level kappa={kappa} is outside [0, 0.5)")]
    KappaOutOfRange { kappa: f64 },

    /// Operation has a closed form only for the L-infinity norm.
    #[error("operation supports only the L-infinity norm (got p={p}); use the numeric path")]
    UnsupportedNorm { p: String },

    /// Requested evaluation mode is not available for this classifier.
    #[error("mode unsupported: {reason}")]
    ModeUnsupported { reason: String },

    /// A kappa sweep produced a decreasing accuracy bound, which signals a
    /// grid-resolution artifact.
    #[error(
        "accuracy bound decreased between kappa={kappa_lo} (bound {bound_lo}) and \
         kappa={kappa_hi} (bound {bound_hi}); refine the grid"
    )]
    MonotonicityViolation {
        kappa_lo: f64,
        bound_lo: f64,
        kappa_hi: f64,
        bound_hi: f64,
    },

    /// Dimension not covered by the analytic or numeric path of an operation.
    #[error("dimension {dim} unsupported: {reason}")]
    DimUnsupported { dim: usize, reason: String },

    /// A specification violates its declared invariants.
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    /// A persisted artifact failed to parse or validate.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
