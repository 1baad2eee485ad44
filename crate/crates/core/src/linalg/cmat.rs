use std::ops::{Index, IndexMut};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::{LinalgError, Mat, Result};
use crate::scalar::Scalar;

/// Dense complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CMat<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> CMat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::new(T::zero(), T::zero()); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real(m: &Mat<T>) -> Self {
        Self::from_fn(m.rows(), m.cols(), |i, j| Complex::new(m[(i, j)], T::zero()))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn col(&self, j: usize) -> Vec<Complex<T>> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, values: &[Complex<T>]) {
        assert_eq!(values.len(), self.rows);
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "cmat matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let t = out[(i, j)] + a * other[(k, j)];
                    out[(i, j)] = t;
                }
            }
        }
        out
    }

    pub fn matmul_real(&self, other: &Mat<T>) -> Self {
        assert_eq!(self.cols, other.rows(), "cmat matmul_real dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols());
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..other.cols() {
                    let t = out[(i, j)] + a.scale(other[(k, j)]);
                    out[(i, j)] = t;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(self.cols, v.len(), "cmat matvec dimension mismatch");
        (0..self.rows)
            .map(|i| {
                (0..self.cols).fold(Complex::new(T::zero(), T::zero()), |acc, j| {
                    acc + self[(i, j)] * v[j]
                })
            })
            .collect()
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape(), "cmat sub shape mismatch");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, a| acc.max(a.norm()))
    }

    pub fn frobenius_norm(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, a| acc + a.norm_sqr())
            .sqrt()
    }

    /// Real part as a real matrix.
    pub fn real(&self) -> Mat<T> {
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)].re)
    }

    /// Largest |imaginary part| over all entries.
    pub fn max_imag_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, a| acc.max(a.im.abs()))
    }

    /// Solve `self * X = rhs` by LU with partial pivoting.
    pub fn solve(&self, rhs: &Self) -> Result<Self> {
        if self.rows != self.cols {
            return Err(LinalgError::NotSquare {
                op: "complex solve",
                rows: self.rows,
                cols: self.cols,
            });
        }
        if rhs.rows != self.rows {
            return Err(LinalgError::ShapeMismatch {
                op: "complex solve",
                expected: format!("{} rhs rows", self.rows),
                found: format!("{}", rhs.rows),
            });
        }
        let n = self.rows;
        let mut lu = self.clone();
        let mut x = rhs.clone();
        for k in 0..n {
            let mut piv = k;
            let mut best = lu[(k, k)].norm();
            for i in k + 1..n {
                let a = lu[(i, k)].norm();
                if a > best {
                    best = a;
                    piv = i;
                }
            }
            if best == T::zero() {
                return Err(LinalgError::Singular { op: "complex solve" });
            }
            if piv != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(piv, j)];
                    lu[(piv, j)] = t;
                }
                for j in 0..x.cols {
                    let t = x[(k, j)];
                    x[(k, j)] = x[(piv, j)];
                    x[(piv, j)] = t;
                }
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                for j in k + 1..n {
                    let t = lu[(i, j)] - f * lu[(k, j)];
                    lu[(i, j)] = t;
                }
                for j in 0..x.cols {
                    let t = x[(i, j)] - f * x[(k, j)];
                    x[(i, j)] = t;
                }
            }
        }
        for j in 0..x.cols {
            for i in (0..n).rev() {
                let mut acc = x[(i, j)];
                for k in i + 1..n {
                    acc = acc - lu[(i, k)] * x[(k, j)];
                }
                x[(i, j)] = acc / lu[(i, i)];
            }
        }
        Ok(x)
    }
}

impl<T: Scalar> Index<(usize, usize)> for CMat<T> {
    type Output = Complex<T>;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T: Scalar> IndexMut<(usize, usize)> for CMat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}
