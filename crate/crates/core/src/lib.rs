//! Average-treatment-effect estimation for randomized experiments with
//! network interference.
//!
//! Units sit on a random graph drawn from a graphon; each outcome depends on
//! the unit's own treatment and on the fraction of treated neighbors. The
//! crate provides the graph and outcome generators, the difference-in-means,
//! regression-adjusted and kernel (nonparametric) estimators, a spectral
//! variance estimator, and a seeded Monte Carlo harness.

pub mod analysis;
pub mod error;
pub mod estimators;
pub mod graphon;
pub mod kernels;
pub mod linalg;
pub mod network;
pub mod outcome;
pub mod quadrature;
pub mod rng;
pub mod sim;
pub mod spectral;
pub mod stats;
pub mod trial;
pub mod variance;

pub use error::{Error, Result};
