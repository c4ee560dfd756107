//! Monte Carlo simulation and verification toolkit for self-training
//! (pseudo-labeling) of linear classifiers on two-component mixture models.
//!
//! The crate simulates the classical semi-supervised pipeline: fit a rough
//! classifier on a few labeled samples, pseudo-label a large unlabeled batch,
//! keep only confident predictions, refit, and iterate. For the Gaussian
//! mixture `x = y·X·μ + σ·g` every step of that pipeline has a closed-form
//! description in terms of the co-tangent of the angle between the iterate and
//! the mixture direction `μ`; the [`theory`] module implements those
//! predictions and the remaining modules measure them empirically.
//!
//! Module map:
//!
//! - [`numerics`]: normal tail/pdf, alignment geometry, reproducible RNG streams
//! - [`distributions`]: mixture specifications and samplers
//! - [`estimators`]: averaging, thresholded self-training, logistic / ridge /
//!   early-stopping refits
//! - [`theory`]: co-tangent update map, sandwich bounds, regularization factors,
//!   rejection and folded-tail bounds
//! - [`landscape`]: population loss scans along the `μ`-ray
//! - [`bounds`]: finite-class margin/clustering machinery and transfer checks
//! - [`experiments`]: configuration-driven sweep runner with CSV/JSON output
//!
//! Every Monte-Carlo entry point takes a [`numerics::SeedSpec`]; identical
//! seeds produce identical results regardless of worker count (the `parallel`
//! feature only changes how independent trials are scheduled).

pub mod bounds;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod landscape;
pub mod numerics;
pub mod parallel;
pub mod theory;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
