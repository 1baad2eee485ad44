use serde::{Deserialize, Serialize};

use super::{LinalgError, Mat, Result};
use crate::scalar::Scalar;

/// Thin singular value decomposition `M = U * diag(S) * V^T`.
///
/// `U` is rows x k and `V` is cols x k with k = min(rows, cols); both are
/// column-orthonormal and `S` is sorted non-increasing. The sign of each
/// column pair is fixed so the largest-magnitude entry of the `U` column is
/// non-negative.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvdFactors<T> {
    pub u: Mat<T>,
    pub s: Vec<T>,
    pub v: Mat<T>,
}

impl<T: Scalar> SvdFactors<T> {
    /// Number of singular values above `rel_tol * s_max`.
    pub fn rank(&self, rel_tol: T) -> usize {
        if self.s.is_empty() {
            return 0;
        }
        let cutoff = rel_tol * self.s[0];
        self.s.iter().take_while(|&&x| x > cutoff).count()
    }

    /// Reconstruct `U * diag(S) * V^T`.
    pub fn reconstruct(&self) -> Mat<T> {
        let k = self.s.len();
        let mut us = self.u.clone();
        for j in 0..k {
            for i in 0..us.rows() {
                us[(i, j)] = us[(i, j)] * self.s[j];
            }
        }
        us.matmul(&self.v.transpose())
    }
}

/// Default relative rank cutoff: `max(rows, cols) * machine epsilon`.
pub fn default_rank_tol<T: Scalar>(rows: usize, cols: usize) -> T {
    T::from_usize(rows.max(cols)).unwrap() * T::epsilon()
}

/// Thin SVD of a dense real matrix.
///
/// Golub–Kahan–Reinsch: Householder bidiagonalization followed by implicit
/// shifted QR on the bidiagonal, run on the transpose when cols > rows.
pub fn svd<T: Scalar>(m: &Mat<T>) -> Result<SvdFactors<T>> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(LinalgError::Empty { op: "svd" });
    }
    m.ensure_finite("svd")?;
    let mut f = if m.rows() >= m.cols() {
        svd_tall(m.clone())?
    } else {
        let SvdFactors { u, s, v } = svd_tall(m.transpose())?;
        SvdFactors { u: v, s, v: u }
    };
    fix_signs(&mut f);
    Ok(f)
}

/// Columns of `u` get a deterministic sign: largest-|entry| non-negative.
fn fix_signs<T: Scalar>(f: &mut SvdFactors<T>) {
    for j in 0..f.s.len() {
        let mut best = 0usize;
        let mut best_abs = T::zero();
        for i in 0..f.u.rows() {
            let a = f.u[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if f.u[(best, j)] < T::zero() {
            for i in 0..f.u.rows() {
                f.u[(i, j)] = -f.u[(i, j)];
            }
            for i in 0..f.v.rows() {
                f.v[(i, j)] = -f.v[(i, j)];
            }
        }
    }
}

/// SVD for rows >= cols, after the classic Jama/LINPACK routine.
fn svd_tall<T: Scalar>(mut a: Mat<T>) -> Result<SvdFactors<T>> {
    let m = a.rows();
    let n = a.cols();
    debug_assert!(m >= n);
    let nu = n;
    let mut s = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    let mut work = vec![T::zero(); m];
    let mut u = Mat::<T>::zeros(m, nu);
    let mut v = Mat::<T>::zeros(n, n);

    // Bidiagonalize, storing Householder vectors in a, u, v.
    let nct = (m - 1).min(n);
    let nrt = n.saturating_sub(2).min(m);
    for k in 0..nct.max(nrt) {
        if k < nct {
            s[k] = T::zero();
            for i in k..m {
                s[k] = s[k].hypot(a[(i, k)]);
            }
            if s[k] != T::zero() {
                if a[(k, k)] < T::zero() {
                    s[k] = -s[k];
                }
                for i in k..m {
                    a[(i, k)] = a[(i, k)] / s[k];
                }
                a[(k, k)] += T::one();
            }
            s[k] = -s[k];
        }
        for j in k + 1..n {
            if k < nct && s[k] != T::zero() {
                let mut t = T::zero();
                for i in k..m {
                    t += a[(i, k)] * a[(i, j)];
                }
                t = -t / a[(k, k)];
                for i in k..m {
                    let d = t * a[(i, k)];
                    a[(i, j)] += d;
                }
            }
            e[j] = a[(k, j)];
        }
        if k < nct {
            for i in k..m {
                u[(i, k)] = a[(i, k)];
            }
        }
        if k < nrt {
            e[k] = T::zero();
            for i in k + 1..n {
                e[k] = e[k].hypot(e[i]);
            }
            if e[k] != T::zero() {
                if e[k + 1] < T::zero() {
                    e[k] = -e[k];
                }
                for i in k + 1..n {
                    e[i] = e[i] / e[k];
                }
                e[k + 1] += T::one();
            }
            e[k] = -e[k];
            if k + 1 < m && e[k] != T::zero() {
                for w in work.iter_mut().take(m).skip(k + 1) {
                    *w = T::zero();
                }
                for j in k + 1..n {
                    for i in k + 1..m {
                        work[i] += e[j] * a[(i, j)];
                    }
                }
                for j in k + 1..n {
                    let t = -e[j] / e[k + 1];
                    for i in k + 1..m {
                        let d = t * work[i];
                        a[(i, j)] += d;
                    }
                }
            }
            for i in k + 1..n {
                v[(i, k)] = e[i];
            }
        }
    }

    // Final bidiagonal of order p.
    let p = n.min(m + 1);
    if nct < n {
        s[nct] = a[(nct, nct)];
    }
    if m < p {
        s[p - 1] = T::zero();
    }
    if nrt + 1 < p {
        e[nrt] = a[(nrt, p - 1)];
    }
    e[p - 1] = T::zero();

    // Accumulate U.
    for j in nct..nu {
        for i in 0..m {
            u[(i, j)] = T::zero();
        }
        u[(j, j)] = T::one();
    }
    for k in (0..nct).rev() {
        if s[k] != T::zero() {
            for j in k + 1..nu {
                let mut t = T::zero();
                for i in k..m {
                    t += u[(i, k)] * u[(i, j)];
                }
                t = -t / u[(k, k)];
                for i in k..m {
                    let d = t * u[(i, k)];
                    u[(i, j)] += d;
                }
            }
            for i in k..m {
                u[(i, k)] = -u[(i, k)];
            }
            u[(k, k)] = T::one() + u[(k, k)];
            for i in 0..k {
                u[(i, k)] = T::zero();
            }
        } else {
            for i in 0..m {
                u[(i, k)] = T::zero();
            }
            u[(k, k)] = T::one();
        }
    }

    // Accumulate V.
    for k in (0..n).rev() {
        if k < nrt && e[k] != T::zero() {
            for j in k + 1..nu {
                let mut t = T::zero();
                for i in k + 1..n {
                    t += v[(i, k)] * v[(i, j)];
                }
                t = -t / v[(k + 1, k)];
                for i in k + 1..n {
                    let d = t * v[(i, k)];
                    v[(i, j)] += d;
                }
            }
        }
        for i in 0..n {
            v[(i, k)] = T::zero();
        }
        v[(k, k)] = T::one();
    }

    // Implicit-shift QR on the bidiagonal.
    let mut pp = p;
    let pp_minus1 = pp - 1;
    let eps = T::epsilon();
    let tiny = T::min_positive_value() / eps;
    let mut total_iter = 0usize;
    let iter_cap = 200 * p.max(1);
    while pp > 0 {
        total_iter += 1;
        if total_iter > iter_cap {
            return Err(LinalgError::SvdNoConvergence {
                iterations: total_iter,
            });
        }

        // Negligibility scan: decide the next action (kase) and block start k.
        let mut k: isize = pp as isize - 2;
        while k >= 0 {
            let ku = k as usize;
            if s[ku].abs() + s[ku + 1].abs() == T::zero()
                || e[ku].abs() <= tiny + eps * (s[ku].abs() + s[ku + 1].abs())
            {
                e[ku] = T::zero();
                break;
            }
            k -= 1;
        }
        let kase;
        if k == pp as isize - 2 {
            kase = 4;
        } else {
            let mut ks: isize = pp as isize - 1;
            while ks > k {
                let ksu = ks as usize;
                let t = if ks != pp as isize { e[ksu].abs() } else { T::zero() }
                    + if ks != k + 1 { e[ksu - 1].abs() } else { T::zero() };
                if s[ksu].abs() <= tiny + eps * t {
                    s[ksu] = T::zero();
                    break;
                }
                ks -= 1;
            }
            if ks == k {
                kase = 3;
            } else if ks == pp as isize - 1 {
                kase = 1;
            } else {
                kase = 2;
                k = ks;
            }
        }
        let k = (k + 1) as usize;

        match kase {
            // Deflate negligible s[pp-1].
            1 => {
                let mut f = e[pp - 2];
                e[pp - 2] = T::zero();
                for j in (k..pp - 1).rev() {
                    let mut t = s[j].hypot(f);
                    let cs = s[j] / t;
                    let sn = f / t;
                    s[j] = t;
                    if j != k {
                        f = -sn * e[j - 1];
                        e[j - 1] = cs * e[j - 1];
                    }
                    for i in 0..n {
                        t = cs * v[(i, j)] + sn * v[(i, pp - 1)];
                        v[(i, pp - 1)] = -sn * v[(i, j)] + cs * v[(i, pp - 1)];
                        v[(i, j)] = t;
                    }
                }
            }
            // Split at negligible s[k-1].
            2 => {
                let mut f = e[k - 1];
                e[k - 1] = T::zero();
                for j in k..pp {
                    let mut t = s[j].hypot(f);
                    let cs = s[j] / t;
                    let sn = f / t;
                    s[j] = t;
                    f = -sn * e[j];
                    e[j] = cs * e[j];
                    for i in 0..m {
                        t = cs * u[(i, j)] + sn * u[(i, k - 1)];
                        u[(i, k - 1)] = -sn * u[(i, j)] + cs * u[(i, k - 1)];
                        u[(i, j)] = t;
                    }
                }
            }
            // One QR step.
            3 => {
                let scale = s[pp - 1]
                    .abs()
                    .max(s[pp - 2].abs())
                    .max(e[pp - 2].abs())
                    .max(s[k].abs())
                    .max(e[k].abs());
                let sp = s[pp - 1] / scale;
                let spm1 = s[pp - 2] / scale;
                let epm1 = e[pp - 2] / scale;
                let sk = s[k] / scale;
                let ek = e[k] / scale;
                let b = ((spm1 + sp) * (spm1 - sp) + epm1 * epm1) / T::c(2.0);
                let c = (sp * epm1) * (sp * epm1);
                let mut shift = T::zero();
                if b != T::zero() || c != T::zero() {
                    shift = (b * b + c).sqrt();
                    if b < T::zero() {
                        shift = -shift;
                    }
                    shift = c / (b + shift);
                }
                let mut f = (sk + sp) * (sk - sp) + shift;
                let mut g = sk * ek;

                for j in k..pp - 1 {
                    let mut t = f.hypot(g);
                    let mut cs = f / t;
                    let mut sn = g / t;
                    if j != k {
                        e[j - 1] = t;
                    }
                    f = cs * s[j] + sn * e[j];
                    e[j] = cs * e[j] - sn * s[j];
                    g = sn * s[j + 1];
                    s[j + 1] = cs * s[j + 1];
                    for i in 0..n {
                        t = cs * v[(i, j)] + sn * v[(i, j + 1)];
                        v[(i, j + 1)] = -sn * v[(i, j)] + cs * v[(i, j + 1)];
                        v[(i, j)] = t;
                    }
                    t = f.hypot(g);
                    cs = f / t;
                    sn = g / t;
                    s[j] = t;
                    f = cs * e[j] + sn * s[j + 1];
                    s[j + 1] = -sn * e[j] + cs * s[j + 1];
                    g = sn * e[j + 1];
                    e[j + 1] = cs * e[j + 1];
                    if j < m - 1 {
                        for i in 0..m {
                            t = cs * u[(i, j)] + sn * u[(i, j + 1)];
                            u[(i, j + 1)] = -sn * u[(i, j)] + cs * u[(i, j + 1)];
                            u[(i, j)] = t;
                        }
                    }
                }
                e[pp - 2] = f;
            }
            // Convergence of s[k].
            _ => {
                if s[k] <= T::zero() {
                    s[k] = if s[k] < T::zero() { -s[k] } else { T::zero() };
                    for i in 0..=pp_minus1.min(n - 1) {
                        v[(i, k)] = -v[(i, k)];
                    }
                }
                let mut kk = k;
                while kk < pp_minus1 {
                    if s[kk] >= s[kk + 1] {
                        break;
                    }
                    s.swap(kk, kk + 1);
                    if kk < n - 1 {
                        for i in 0..n {
                            let t = v[(i, kk + 1)];
                            v[(i, kk + 1)] = v[(i, kk)];
                            v[(i, kk)] = t;
                        }
                    }
                    if kk < m - 1 {
                        for i in 0..m {
                            let t = u[(i, kk + 1)];
                            u[(i, kk + 1)] = u[(i, kk)];
                            u[(i, kk)] = t;
                        }
                    }
                    kk += 1;
                }
                pp -= 1;
            }
        }
    }

    s.truncate(n);
    Ok(SvdFactors { u, s, v })
}

/// Moore–Penrose pseudoinverse with relative rank cutoff.
///
/// Singular values at or below `rank_tol * s_max` are treated as zero; the
/// all-zero matrix yields the zero matrix of transposed shape. `None` selects
/// the default cutoff `max(rows, cols) * eps`.
pub fn pinv<T: Scalar>(m: &Mat<T>, rank_tol: Option<T>) -> Result<Mat<T>> {
    let f = svd(m)?;
    Ok(pinv_from_svd(&f, rank_tol_value(m, rank_tol)))
}

pub(crate) fn rank_tol_value<T: Scalar>(m: &Mat<T>, rank_tol: Option<T>) -> T {
    rank_tol.unwrap_or_else(|| default_rank_tol(m.rows(), m.cols()))
}

/// Pseudoinverse assembled from precomputed factors: `V_r S_r^{-1} U_r^T`.
pub(crate) fn pinv_from_svd<T: Scalar>(f: &SvdFactors<T>, rel_tol: T) -> Mat<T> {
    let r = f.rank(rel_tol);
    let n = f.v.rows();
    let m = f.u.rows();
    let mut out = Mat::<T>::zeros(n, m);
    for t in 0..r {
        let inv = T::one() / f.s[t];
        for i in 0..n {
            let vi = f.v[(i, t)] * inv;
            if vi == T::zero() {
                continue;
            }
            for j in 0..m {
                out[(i, j)] += vi * f.u[(j, t)];
            }
        }
    }
    out
}
