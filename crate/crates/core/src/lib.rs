//! Averaging points on the Stiefel and Grassmann manifolds.
//!
//! The closed-form estimators project the arithmetic mean of the samples
//! back onto the manifold ([`barycenter::proj_mean_polar`],
//! [`barycenter::proj_mean_qr`], [`barycenter::proj_mean_grassmann`]). The
//! iterative baselines are R-barycenters built from the polar, QR and
//! orthographic retractions and the Riemannian mean on Grassmann.
//! [`simulation`] reproduces the error-vs-sample-size sweeps and [`cli`]
//! exposes them on the command line.

pub mod barycenter;
pub mod cli;
pub mod error;
pub mod grassmann;
pub mod linalg;
pub mod simulation;
pub mod stiefel;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use linalg::Mat;
