use num_complex::Complex;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

use super::{CMat, LinalgError, Mat, Result, DEGENERACY_GAP};
use crate::scalar::Scalar;

/// Eigendecomposition of a real square matrix with complex output.
///
/// `values[i]` pairs with right eigenvector `right.col(i)` and left
/// eigenvector `left.col(i)` (in the `z^H A = lambda z^H` sense). Eigenvalues
/// are sorted by descending magnitude, ties broken by descending real then
/// imaginary part; eigenvectors have unit norm with the largest-magnitude
/// component made real and non-negative.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexEigenSystem<T> {
    pub values: Vec<Complex<T>>,
    pub right: CMat<T>,
    pub left: CMat<T>,
}

impl<T: Scalar> ComplexEigenSystem<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Gram matrix `Z^H W`; the identity after biorthonormalization.
    pub fn gram(&self) -> CMat<T> {
        self.left.hermitian().matmul(&self.right)
    }
}

/// Deterministic eigenvalue ordering: |.| desc, re desc, im desc.
pub(crate) fn eig_order<T: Scalar>(a: &Complex<T>, b: &Complex<T>) -> Ordering {
    b.norm()
        .partial_cmp(&a.norm())
        .unwrap_or(Ordering::Equal)
        .then(b.re.partial_cmp(&a.re).unwrap_or(Ordering::Equal))
        .then(b.im.partial_cmp(&a.im).unwrap_or(Ordering::Equal))
}

/// General (non-symmetric) real eigendecomposition with right and left
/// eigenvectors, via Householder Hessenberg reduction and the shifted
/// Francis QR iteration. Left vectors come from the transposed problem.
pub fn eig_general<T: Scalar>(m: &Mat<T>) -> Result<ComplexEigenSystem<T>> {
    if m.rows() != m.cols() {
        return Err(LinalgError::NotSquare {
            op: "eig_general",
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    if m.rows() == 0 {
        return Err(LinalgError::Empty { op: "eig_general" });
    }
    m.ensure_finite("eig_general")?;

    let (values, right) = schur_eigen(m)?;
    let (lvalues, lvecs) = schur_eigen(&m.transpose())?;

    // A^T v = mu v with mu = conj(lambda) makes v the left vector for lambda.
    let n = values.len();
    let mut used = vec![false; n];
    let mut left = CMat::<T>::zeros(n, n);
    for i in 0..n {
        let target = values[i].conj();
        let mut best = usize::MAX;
        let mut best_dist = T::infinity();
        for (j, lv) in lvalues.iter().enumerate() {
            if used[j] {
                continue;
            }
            let dist = (*lv - target).norm();
            if dist < best_dist {
                best_dist = dist;
                best = j;
            }
        }
        used[best] = true;
        left.set_col(i, &lvecs.col(best));
    }

    Ok(ComplexEigenSystem {
        values,
        right,
        left,
    })
}

/// Rescale left eigenvectors so that `z_j^H w_i = delta_ij`, then polish the
/// Gram matrix to the identity. Right vectors are kept as-is. Fails when two
/// eigenvalues are closer than the default gap threshold.
pub fn biorthonormalize<T: Scalar>(sys: &ComplexEigenSystem<T>) -> Result<ComplexEigenSystem<T>> {
    biorthonormalize_with_gap(sys, T::c(DEGENERACY_GAP))
}

/// [`biorthonormalize`] with an explicit absolute eigenvalue-gap threshold.
pub fn biorthonormalize_with_gap<T: Scalar>(
    sys: &ComplexEigenSystem<T>,
    gap: T,
) -> Result<ComplexEigenSystem<T>> {
    let k = sys.values.len();
    for i in 0..k {
        for j in i + 1..k {
            let g = (sys.values[i] - sys.values[j]).norm();
            if g < gap {
                return Err(LinalgError::DegenerateEigenvalues {
                    i,
                    j,
                    gap: g.f64(),
                    threshold: gap.f64(),
                });
            }
        }
    }

    let mut left = sys.left.clone();
    let tiny = T::min_positive_value().sqrt();
    for i in 0..k {
        let mut d = Complex::new(T::zero(), T::zero());
        for r in 0..left.rows() {
            d = d + left[(r, i)].conj() * sys.right[(r, i)];
        }
        if d.norm() < tiny {
            return Err(LinalgError::DefectivePair {
                index: i,
                inner: d.norm().f64(),
            });
        }
        // (z/c)^H w = z^H w / conj(c), so c = conj(d) gives inner product 1.
        let c = d.conj();
        for r in 0..left.rows() {
            let t = left[(r, i)] / c;
            left[(r, i)] = t;
        }
    }

    // One correction step forces Z^H W = I to solver precision.
    let zh = left.hermitian();
    let gram = zh.matmul(&sys.right);
    let polished = gram.solve(&zh)?;
    Ok(ComplexEigenSystem {
        values: sys.values.clone(),
        right: sys.right.clone(),
        left: polished.hermitian(),
    })
}

/// Eigenvalues and right eigenvectors via real Schur form, sorted and
/// normalized by the crate conventions.
fn schur_eigen<T: Scalar>(a: &Mat<T>) -> Result<(Vec<Complex<T>>, CMat<T>)> {
    let n = a.rows();
    let mut h = a.clone();
    let mut v = Mat::<T>::identity(n);
    orthes(&mut h, &mut v);
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    hqr2(&mut h, &mut v, &mut d, &mut e)?;

    let mut values = Vec::with_capacity(n);
    let mut vectors = CMat::<T>::zeros(n, n);
    let mut j = 0usize;
    while j < n {
        if e[j] == T::zero() {
            values.push(Complex::new(d[j], T::zero()));
            let col: Vec<Complex<T>> =
                (0..n).map(|i| Complex::new(v[(i, j)], T::zero())).collect();
            vectors.set_col(j, &col);
            j += 1;
        } else {
            values.push(Complex::new(d[j], e[j]));
            values.push(Complex::new(d[j + 1], e[j + 1]));
            let col: Vec<Complex<T>> = (0..n)
                .map(|i| Complex::new(v[(i, j)], v[(i, j + 1)]))
                .collect();
            let conj: Vec<Complex<T>> = col.iter().map(|c| c.conj()).collect();
            vectors.set_col(j, &col);
            vectors.set_col(j + 1, &conj);
            j += 2;
        }
    }

    for j in 0..n {
        normalize_column(&mut vectors, j);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig_order(&values[i], &values[j]).then(i.cmp(&j)));
    let sorted_values: Vec<Complex<T>> = order.iter().map(|&i| values[i]).collect();
    let mut sorted_vectors = CMat::<T>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        sorted_vectors.set_col(dst, &vectors.col(src));
    }
    Ok((sorted_values, sorted_vectors))
}

/// Unit norm, then rotate so the largest-magnitude entry is real positive.
fn normalize_column<T: Scalar>(m: &mut CMat<T>, j: usize) {
    let n = m.rows();
    let mut norm_sq = T::zero();
    let mut best = 0usize;
    let mut best_abs = T::zero();
    for i in 0..n {
        let a = m[(i, j)];
        norm_sq += a.norm_sqr();
        if a.norm() > best_abs {
            best_abs = a.norm();
            best = i;
        }
    }
    let norm = norm_sq.sqrt();
    if norm == T::zero() {
        return;
    }
    let pivot = m[(i_idx(best), j)];
    let phase = if pivot.norm() == T::zero() {
        Complex::new(T::one(), T::zero())
    } else {
        pivot.conj() / Complex::new(pivot.norm(), T::zero())
    };
    let scale = phase / Complex::new(norm, T::zero());
    for i in 0..n {
        let t = m[(i, j)] * scale;
        m[(i, j)] = t;
    }
}

#[inline]
fn i_idx(i: usize) -> usize {
    i
}

/// Householder reduction to upper Hessenberg form, accumulating the
/// orthogonal transform in `v` (Algol orthes/ortran as in EISPACK).
fn orthes<T: Scalar>(h: &mut Mat<T>, v: &mut Mat<T>) {
    let n = h.rows();
    if n < 3 {
        return;
    }
    let low = 0usize;
    let high = n - 1;
    let mut ort = vec![T::zero(); n];

    for m in (low + 1)..high {
        let mut scale = T::zero();
        for i in m..=high {
            scale += h[(i, m - 1)].abs();
        }
        if scale != T::zero() {
            let mut hh = T::zero();
            for i in (m..=high).rev() {
                ort[i] = h[(i, m - 1)] / scale;
                hh += ort[i] * ort[i];
            }
            let mut g = hh.sqrt();
            if ort[m] > T::zero() {
                g = -g;
            }
            hh -= ort[m] * g;
            ort[m] -= g;

            for j in m..n {
                let mut f = T::zero();
                for i in (m..=high).rev() {
                    f += ort[i] * h[(i, j)];
                }
                f = f / hh;
                for i in m..=high {
                    let t = h[(i, j)] - f * ort[i];
                    h[(i, j)] = t;
                }
            }
            for i in 0..=high {
                let mut f = T::zero();
                for j in (m..=high).rev() {
                    f += ort[j] * h[(i, j)];
                }
                f = f / hh;
                for j in m..=high {
                    let t = h[(i, j)] - f * ort[j];
                    h[(i, j)] = t;
                }
            }
            ort[m] = scale * ort[m];
            h[(m, m - 1)] = scale * g;
        }
    }

    for m in ((low + 1)..high).rev() {
        if h[(m, m - 1)] != T::zero() {
            for i in (m + 1)..=high {
                ort[i] = h[(i, m - 1)];
            }
            for j in m..=high {
                let mut g = T::zero();
                for i in m..=high {
                    g += ort[i] * v[(i, j)];
                }
                // Double division avoids possible underflow.
                g = (g / ort[m]) / h[(m, m - 1)];
                for i in m..=high {
                    let t = v[(i, j)] + g * ort[i];
                    v[(i, j)] = t;
                }
            }
        }
    }
}

/// Hessenberg to real Schur form with eigenvector accumulation (Algol hqr2,
/// EISPACK lineage), plus an explicit iteration cap.
#[allow(clippy::too_many_lines)]
fn hqr2<T: Scalar>(h: &mut Mat<T>, v: &mut Mat<T>, d: &mut [T], e: &mut [T]) -> Result<()> {
    let nn = h.rows();
    if nn == 0 {
        return Ok(());
    }
    let low: isize = 0;
    let high: isize = nn as isize - 1;
    let eps = T::epsilon();
    let mut exshift = T::zero();
    let mut p = T::zero();
    let mut q = T::zero();
    let mut r = T::zero();
    let mut s = T::zero();
    let mut z = T::zero();
    let mut t;
    let mut w;
    let mut x;
    let mut y;

    let mut norm = T::zero();
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[(i, j)].abs();
        }
    }

    let mut n: isize = nn as isize - 1;
    let mut iter = 0usize;
    let mut total_iter = 0usize;
    let total_cap = 200 * nn;
    while n >= low {
        let nu = n as usize;

        let mut l = n;
        while l > low {
            let lu = l as usize;
            s = h[(lu - 1, lu - 1)].abs() + h[(lu, lu)].abs();
            if s == T::zero() {
                s = norm;
            }
            if h[(lu, lu - 1)].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            // One root found.
            h[(nu, nu)] = h[(nu, nu)] + exshift;
            d[nu] = h[(nu, nu)];
            e[nu] = T::zero();
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            // Two roots found.
            w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            p = (h[(nu - 1, nu - 1)] - h[(nu, nu)]) / T::c(2.0);
            q = p * p + w;
            z = q.abs().sqrt();
            h[(nu, nu)] = h[(nu, nu)] + exshift;
            h[(nu - 1, nu - 1)] = h[(nu - 1, nu - 1)] + exshift;
            x = h[(nu, nu)];
            if q >= T::zero() {
                // Real pair.
                z = if p >= T::zero() { p + z } else { p - z };
                d[nu - 1] = x + z;
                d[nu] = d[nu - 1];
                if z != T::zero() {
                    d[nu] = x - w / z;
                }
                e[nu - 1] = T::zero();
                e[nu] = T::zero();
                x = h[(nu, nu - 1)];
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p = p / r;
                q = q / r;
                for j in (nu - 1)..nn {
                    z = h[(nu - 1, j)];
                    h[(nu - 1, j)] = q * z + p * h[(nu, j)];
                    h[(nu, j)] = q * h[(nu, j)] - p * z;
                }
                for i in 0..=nu {
                    z = h[(i, nu - 1)];
                    h[(i, nu - 1)] = q * z + p * h[(i, nu)];
                    h[(i, nu)] = q * h[(i, nu)] - p * z;
                }
                for i in low as usize..=high as usize {
                    z = v[(i, nu - 1)];
                    v[(i, nu - 1)] = q * z + p * v[(i, nu)];
                    v[(i, nu)] = q * v[(i, nu)] - p * z;
                }
            } else {
                // Complex pair.
                d[nu - 1] = x + p;
                d[nu] = x + p;
                e[nu - 1] = z;
                e[nu] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            // Shift and run one double QR step.
            x = h[(nu, nu)];
            y = T::zero();
            w = T::zero();
            if l < n {
                y = h[(nu - 1, nu - 1)];
                w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            }

            if iter == 10 {
                exshift += x;
                for i in low as usize..=nu {
                    let t = h[(i, i)] - x;
                    h[(i, i)] = t;
                }
                s = h[(nu, nu - 1)].abs() + h[(nu - 1, nu - 2)].abs();
                x = T::c(0.75) * s;
                y = x;
                w = T::c(-0.4375) * s * s;
            }
            if iter == 30 {
                s = (y - x) / T::c(2.0);
                s = s * s + w;
                if s > T::zero() {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / T::c(2.0) + s);
                    for i in low as usize..=nu {
                        let t = h[(i, i)] - s;
                        h[(i, i)] = t;
                    }
                    exshift += s;
                    x = T::c(0.964);
                    y = x;
                    w = x;
                }
            }

            iter += 1;
            total_iter += 1;
            if iter > 100 || total_iter > total_cap {
                return Err(LinalgError::EigNoConvergence {
                    iterations: total_iter,
                    index: nu,
                });
            }

            let mut m = n - 2;
            while m >= l {
                let mu = m as usize;
                z = h[(mu, mu)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[(mu + 1, mu)] + h[(mu, mu + 1)];
                q = h[(mu + 1, mu + 1)] - z - r - s;
                r = h[(mu + 2, mu + 1)];
                s = p.abs() + q.abs() + r.abs();
                p = p / s;
                q = q / s;
                r = r / s;
                if m == l {
                    break;
                }
                if h[(mu, mu - 1)].abs() * (q.abs() + r.abs())
                    < eps
                        * (p.abs()
                            * (h[(mu - 1, mu - 1)].abs() + z.abs() + h[(mu + 1, mu + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }
            let mu = m as usize;

            for i in (mu + 2)..=nu {
                h[(i, i - 2)] = T::zero();
                if i > mu + 2 {
                    h[(i, i - 3)] = T::zero();
                }
            }

            for k in mu..nu {
                let notlast = k != nu - 1;
                if k != mu {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if notlast { h[(k + 2, k - 1)] } else { T::zero() };
                    x = p.abs() + q.abs() + r.abs();
                    if x == T::zero() {
                        continue;
                    }
                    p = p / x;
                    q = q / x;
                    r = r / x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < T::zero() {
                    s = -s;
                }
                if s != T::zero() {
                    if k != mu {
                        h[(k, k - 1)] = -s * x;
                    } else if l != m {
                        h[(k, k - 1)] = -h[(k, k - 1)];
                    }
                    p = p + s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q = q / p;
                    r = r / p;

                    for j in k..nn {
                        p = h[(k, j)] + q * h[(k + 1, j)];
                        if notlast {
                            p = p + r * h[(k + 2, j)];
                            let t = h[(k + 2, j)] - p * z;
                            h[(k + 2, j)] = t;
                        }
                        let t0 = h[(k, j)] - p * x;
                        h[(k, j)] = t0;
                        let t1 = h[(k + 1, j)] - p * y;
                        h[(k + 1, j)] = t1;
                    }
                    for i in 0..=nu.min(k + 3) {
                        p = x * h[(i, k)] + y * h[(i, k + 1)];
                        if notlast {
                            p = p + z * h[(i, k + 2)];
                            let t = h[(i, k + 2)] - p * r;
                            h[(i, k + 2)] = t;
                        }
                        let t0 = h[(i, k)] - p;
                        h[(i, k)] = t0;
                        let t1 = h[(i, k + 1)] - p * q;
                        h[(i, k + 1)] = t1;
                    }
                    for i in low as usize..=high as usize {
                        p = x * v[(i, k)] + y * v[(i, k + 1)];
                        if notlast {
                            p = p + z * v[(i, k + 2)];
                            let t = v[(i, k + 2)] - p * r;
                            v[(i, k + 2)] = t;
                        }
                        let t0 = v[(i, k)] - p;
                        v[(i, k)] = t0;
                        let t1 = v[(i, k + 1)] - p * q;
                        v[(i, k + 1)] = t1;
                    }
                }
            }
        }
    }

    if norm == T::zero() {
        return Ok(());
    }

    // Back-substitution from the Schur form to triangular eigenvectors.
    for n in (0..nn).rev() {
        p = d[n];
        q = e[n];

        if q == T::zero() {
            // Real vector.
            let mut l = n;
            h[(n, n)] = T::one();
            for i in (0..n).rev() {
                w = h[(i, i)] - p;
                r = T::zero();
                for j in l..=n {
                    r += h[(i, j)] * h[(j, n)];
                }
                if e[i] < T::zero() {
                    z = w;
                    s = r;
                } else {
                    l = i;
                    if e[i] == T::zero() {
                        if w != T::zero() {
                            h[(i, n)] = -r / w;
                        } else {
                            h[(i, n)] = -r / (eps * norm);
                        }
                    } else {
                        x = h[(i, i + 1)];
                        y = h[(i + 1, i)];
                        q = (d[i] - p) * (d[i] - p) + e[i] * e[i];
                        t = (x * s - z * r) / q;
                        h[(i, n)] = t;
                        if x.abs() > z.abs() {
                            h[(i + 1, n)] = (-r - w * t) / x;
                        } else {
                            h[(i + 1, n)] = (-s - y * t) / z;
                        }
                    }
                    t = h[(i, n)].abs();
                    if (eps * t) * t > T::one() {
                        for j in i..=n {
                            let u = h[(j, n)] / t;
                            h[(j, n)] = u;
                        }
                    }
                }
            }
        } else if q < T::zero() && n > 0 {
            // Complex vector; stored in columns n-1 (real) and n (imag).
            let mut l = n - 1;
            if h[(n, n - 1)].abs() > h[(n - 1, n)].abs() {
                h[(n - 1, n - 1)] = q / h[(n, n - 1)];
                h[(n - 1, n)] = -(h[(n, n)] - p) / h[(n, n - 1)];
            } else {
                let (re, im) = cdiv(T::zero(), -h[(n - 1, n)], h[(n - 1, n - 1)] - p, q);
                h[(n - 1, n - 1)] = re;
                h[(n - 1, n)] = im;
            }
            h[(n, n - 1)] = T::zero();
            h[(n, n)] = T::one();
            if n >= 2 {
                for i in (0..=n - 2).rev() {
                    let mut ra = T::zero();
                    let mut sa = T::zero();
                    for j in l..=n {
                        ra += h[(i, j)] * h[(j, n - 1)];
                        sa += h[(i, j)] * h[(j, n)];
                    }
                    w = h[(i, i)] - p;

                    if e[i] < T::zero() {
                        z = w;
                        r = ra;
                        s = sa;
                    } else {
                        l = i;
                        if e[i] == T::zero() {
                            let (re, im) = cdiv(-ra, -sa, w, q);
                            h[(i, n - 1)] = re;
                            h[(i, n)] = im;
                        } else {
                            x = h[(i, i + 1)];
                            y = h[(i + 1, i)];
                            let mut vr = (d[i] - p) * (d[i] - p) + e[i] * e[i] - q * q;
                            let vi = (d[i] - p) * T::c(2.0) * q;
                            if vr == T::zero() && vi == T::zero() {
                                vr = eps
                                    * norm
                                    * (w.abs() + q.abs() + x.abs() + y.abs() + z.abs());
                            }
                            let (re, im) =
                                cdiv(x * r - z * ra + q * sa, x * s - z * sa - q * ra, vr, vi);
                            h[(i, n - 1)] = re;
                            h[(i, n)] = im;
                            if x.abs() > z.abs() + q.abs() {
                                h[(i + 1, n - 1)] =
                                    (-ra - w * h[(i, n - 1)] + q * h[(i, n)]) / x;
                                h[(i + 1, n)] = (-sa - w * h[(i, n)] - q * h[(i, n - 1)]) / x;
                            } else {
                                let (re, im) =
                                    cdiv(-r - y * h[(i, n - 1)], -s - y * h[(i, n)], z, q);
                                h[(i + 1, n - 1)] = re;
                                h[(i + 1, n)] = im;
                            }
                        }

                        t = h[(i, n - 1)].abs().max(h[(i, n)].abs());
                        if (eps * t) * t > T::one() {
                            for j in i..=n {
                                let u0 = h[(j, n - 1)] / t;
                                h[(j, n - 1)] = u0;
                                let u1 = h[(j, n)] / t;
                                h[(j, n)] = u1;
                            }
                        }
                    }
                }
            }
        }
    }

    // Back-transform to eigenvectors of the original matrix.
    for j in (0..nn).rev() {
        for i in 0..nn {
            z = T::zero();
            for k in 0..=j {
                z += v[(i, k)] * h[(k, j)];
            }
            v[(i, j)] = z;
        }
    }

    Ok(())
}

/// Complex scalar division `(xr + i xi) / (yr + i yi)` (Smith's algorithm).
fn cdiv<T: Scalar>(xr: T, xi: T, yr: T, yi: T) -> (T, T) {
    if yr.abs() > yi.abs() {
        let r = yi / yr;
        let d = yr + r * yi;
        ((xr + r * xi) / d, (xi - r * xr) / d)
    } else {
        let r = yr / yi;
        let d = yi + r * yr;
        ((r * xr + xi) / d, (r * xi - xr) / d)
    }
}
