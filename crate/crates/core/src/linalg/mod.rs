//! Dense real/complex linear algebra: SVD, Moore–Penrose pseudoinverse,
//! general real eigendecomposition with complex output, and
//! biorthonormalization of left/right eigenvector pairs.

mod cmat;
mod eig;
mod mat;
mod svd;

pub use cmat::CMat;
pub use eig::{biorthonormalize, biorthonormalize_with_gap, eig_general, ComplexEigenSystem};
pub use mat::Mat;
pub use svd::{default_rank_tol, pinv, svd, SvdFactors};

use thiserror::Error;

/// Absolute eigenvalue gap below which a pair is treated as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("shape mismatch in {op}: expected {expected}, found {found}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },
    #[error("matrix for {op} must be square, found {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("non-finite entry at ({row}, {col}) in input to {op}")]
    NonFinite {
        op: &'static str,
        row: usize,
        col: usize,
    },
    #[error("SVD did not converge after {iterations} iterations")]
    SvdNoConvergence { iterations: usize },
    #[error("eigensolver did not converge after {iterations} iterations on eigenvalue {index}")]
    EigNoConvergence { iterations: usize, index: usize },
    #[error(
        "near-degenerate eigenvalue pair ({i}, {j}): gap {gap:e} below threshold {threshold:e}"
    )]
    DegenerateEigenvalues {
        i: usize,
        j: usize,
        gap: f64,
        threshold: f64,
    },
    #[error("left/right eigenvector pair {index} is numerically defective (|z^H w| = {inner:e})")]
    DefectivePair { index: usize, inner: f64 },
    #[error("singular matrix in {op}")]
    Singular { op: &'static str },
    #[error("empty matrix not allowed in {op}")]
    Empty { op: &'static str },
}

pub type Result<V> = std::result::Result<V, LinalgError>;
