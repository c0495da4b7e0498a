//! Two-mode Gaussian resource calculus.
//!
//! Covariance-matrix toolkit for Gaussian quantum states: symplectic
//! transformations and decompositions, squeezing of formation (SOF),
//! Gaussian entanglement of formation (EOF), a six-parameter family of
//! states whose EOF saturates the h0[SOF] bound, a passive-transformation
//! pipeline that drives arbitrary two-mode states into that family, and a
//! seeded Monte-Carlo harness that checks E(sigma_out) = h0[S(sigma_in)]
//! on random states.
//!
//! All core math is generic over the scalar type (see [`scalar::Scalar`]);
//! the `*64` aliases at the crate root are the working-precision entry
//! points used by the CLI and harness.

pub mod cov;
pub mod decomp;
pub mod error;
pub mod harness;
pub mod io;
pub mod maxeof;
pub(crate) mod optimize;
pub mod resources;
pub mod scalar;
pub mod special;
pub mod symp;
pub mod tol;
pub mod transforms;

pub use error::{Error, Result};

/// Working-precision aliases.
pub type Cov64 = cov::CovarianceMatrix<f64>;
pub type Symp64 = symp::SymplecticMatrix<f64>;
pub type Spec64 = transforms::TransformSpec<f64>;
pub type Tol64 = tol::Tolerances<f64>;

/// Single-precision aliases; they build and run, but the default
/// tolerances in [`tol::Tolerances`] are below f32 resolution.
pub type Cov32 = cov::CovarianceMatrix<f32>;
pub type Symp32 = symp::SymplecticMatrix<f32>;
