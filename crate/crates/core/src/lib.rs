//! Bayes-error bounds for robust classification on grid distributions.
//!
//! The crate computes the irreducible-error upper bounds on vanilla accuracy,
//! deterministic robust accuracy, and probabilistic robust accuracy of any
//! classifier over a discretized joint distribution, and evaluates concrete
//! classifiers (Bayes, smoothed, noisy, vicinity-voting) against those bounds.
//!
//! Pipeline sketch:
//!
//! 1. [`distributions`] builds a [`distributions::GridDistribution`] from an
//!    analytic spec or labeled samples (KDE).
//! 2. [`kernels`] turns an L^p vicinity into a grid [`kernels::Stencil`].
//! 3. [`bayes`] convolves, hardens, finds the boundary region, and produces
//!    the three bounds plus tolerance sweeps.
//! 4. [`classifiers`] and [`evaluation`] score decision rules against the
//!    same distribution and compare them with the bounds.
//! 5. [`geometry`] checks the vicinity-overlap facts the bounds rely on.

pub mod bayes;
pub mod classifiers;
pub mod distributions;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod grid;
pub mod kernels;
pub mod rng;

pub use error::{Error, Result};
pub use grid::GridGeometry;
pub use kernels::{NormOrder, Stencil, VicinityKernel};
