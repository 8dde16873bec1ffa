//! Similarity-based Bayesian mixture-of-experts regression.
//!
//! The gate assigns a new input to training points through a learned
//! Mahalanobis similarity, and each training output votes for the Gaussian
//! experts that explain it. Fitting is mean-field variational Bayes with local
//! log-sum-exp linearizations; predictions are Monte Carlo Gaussian mixtures.

pub mod cluster;
pub mod distributions;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod predict;
pub mod rng;
pub mod scalar;
pub mod special;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Real;

/// Dense row-major `f64` matrix.
pub type Mat = linalg::Matrix<f64>;
/// `f64` lower-triangular factor.
pub type Lower = linalg::LowerTriangular<f64>;
/// `f64` normal–inverse-Wishart parameters.
pub type Niw = distributions::NiwParams<f64>;
