//! Koopman spectral analysis toolkit: learn observables that span an
//! (approximately) invariant subspace of the Koopman operator by minimizing
//! the residual sum of squares of linear least-squares regression, then run
//! dynamic mode decomposition on the learned observables for spectral
//! analysis, prediction, and unstable-phenomena detection.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the default `f64` instantiation used by the CLI and the
//! file formats.

pub mod dmd;
pub mod dynamics;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod scalar;
pub mod series;

pub use linalg::{
    biorthonormalize, eig_general, pinv, svd, CMat, ComplexEigenSystem, LinalgError, Mat,
    SvdFactors,
};
pub use nn::{Mlp, NetMode, OptKind, OptimizerState};
pub use scalar::Scalar;

/// Dense real matrix in the default 64-bit precision.
pub type Matrix = Mat<f64>;
/// Dense complex matrix in the default 64-bit precision.
pub type CMatrix = CMat<f64>;
/// Eigensystem in the default 64-bit precision.
pub type EigenSystem = ComplexEigenSystem<f64>;
