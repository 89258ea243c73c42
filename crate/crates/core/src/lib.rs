//! Multi-view imaging of extended targets in a multistatic sensing network.
//!
//! The crate is organised along the processing chain:
//!
//! 1. [`geometry`] and [`signal`] describe the scene and simulate what every
//!    receive array observes, condensed into per-receiver sample covariances.
//! 2. [`single_view`] turns one sample covariance into an image on a dynamic
//!    grid by penalized maximum-likelihood covariance fitting (coordinate
//!    descent over intensities, projected gradient descent over positions).
//! 3. [`interp`] resamples every irregular single-view image onto a shared
//!    raster with edge-preserving natural neighbour interpolation.
//! 4. [`fusion`] merges the rasters with a weighted least-squares criterion,
//!    an l1 sparsity term and anisotropic total variation, solved by ADMM.
//! 5. [`metrics`] scores images (P-ISLR, IoU) and provides diagnostics and a
//!    matched-filter baseline imager.
//!
//! [`pipeline`] wires the stages together with on-disk artifacts.

pub mod error;
pub mod fusion;
pub mod geometry;
pub mod interp;
pub mod metrics;
pub mod numerics;
pub mod pipeline;
pub mod raster;
pub mod signal;
pub mod single_view;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
