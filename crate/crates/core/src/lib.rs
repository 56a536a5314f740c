//! Indistinguishability spectra of multivariate Gaussians.
//!
//! The crate computes the `(eps, delta)` spectrum of an ordered pair of
//! Gaussians, both in closed form for the structured pairs that arise from the
//! Gaussian mechanism, Gaussian random projection and approximate least
//! squares, and by a Monte Carlo estimator with a Hoeffding guarantee for any
//! pair. The spectra drive noise calibration for the mechanisms in
//! [`mechanism`]. Mechanisms, spectrum kinds and global-leverage solvers are
//! registered by name and selected at runtime.

pub mod error;
pub mod gauss_mech;
pub mod gl;
pub mod linalg;
pub mod mechanism;
pub mod ndis;
pub mod numerics;
pub mod ols;
pub mod registry;
pub mod rp;
pub mod spectrum;

pub use error::{Error, Result};
pub use linalg::{Matrix, MvGaussian, RegressionData};
pub use ndis::{ISPoint, NdisPair, QuadForm};
pub use numerics::SeedStream;
