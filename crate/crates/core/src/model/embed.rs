use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ModelError, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;
use crate::series::TimeSeries;

/// Linear delay embedder `x~_t = W_phi [y_t; y_{t-1}; ...; y_{t-k+1}]`.
/// No bias, no activation; `W_phi` is p x (k r).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedder<T> {
    w_phi: Mat<T>,
    k: usize,
    r: usize,
}

impl<T: Scalar> Embedder<T> {
    pub fn new(w_phi: Mat<T>, k: usize, r: usize) -> Result<Self> {
        if w_phi.cols() != k * r {
            return Err(ModelError::ShapeMismatch {
                op: "embedder",
                expected: format!("{} columns (k r)", k * r),
                found: format!("{}", w_phi.cols()),
            });
        }
        Ok(Self { w_phi, k, r })
    }

    /// Seeded dense initialization scaled by the stacked input size.
    pub fn seeded(k: usize, r: usize, p: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let std = (T::one() / T::from_usize(k * r).unwrap()).sqrt();
        Self {
            w_phi: Mat::from_fn(p, k * r, |_, _| T::standard_normal(&mut rng) * std),
            k,
            r,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn p(&self) -> usize {
        self.w_phi.rows()
    }

    pub fn weight(&self) -> &Mat<T> {
        &self.w_phi
    }

    pub fn weight_mut(&mut self) -> &mut Mat<T> {
        &mut self.w_phi
    }

    /// Embed one window of k consecutive measurements, newest first.
    pub fn embed(&self, window: &[&[T]]) -> Result<Vec<T>> {
        if window.len() != self.k {
            return Err(ModelError::WindowLength {
                expected: self.k,
                found: window.len(),
            });
        }
        let mut stacked = Vec::with_capacity(self.k * self.r);
        for lag in window {
            if lag.len() != self.r {
                return Err(ModelError::ShapeMismatch {
                    op: "embed",
                    expected: format!("{} components", self.r),
                    found: format!("{}", lag.len()),
                });
            }
            stacked.extend_from_slice(lag);
        }
        Ok(self.w_phi.matvec(&stacked))
    }
}

/// One delay pair: episode index plus the time of the earlier member, i.e.
/// the pair is (x~_t, x~_{t+1}) with t >= k-1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairIndex {
    pub episode: usize,
    pub t: usize,
}

/// Enumerate every delay pair, never straddling episode boundaries. Each
/// episode of length m+1 contributes m-k+1 pairs.
pub fn build_pairs<T: Scalar>(episodes: &[TimeSeries<T>], k: usize) -> Result<Vec<PairIndex>> {
    if k == 0 {
        return Err(ModelError::BadHyper {
            name: "k",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let mut pairs = Vec::new();
    for (e, ep) in episodes.iter().enumerate() {
        if ep.len() < k + 1 {
            return Err(ModelError::SeriesTooShort {
                episode: e,
                len: ep.len(),
                k,
                min: k + 1,
            });
        }
        for t in (k - 1)..(ep.len() - 1) {
            pairs.push(PairIndex { episode: e, t });
        }
    }
    Ok(pairs)
}

/// Stacked window [y_t; y_{t-1}; ...; y_{t-k+1}] as one flat row.
pub(crate) fn window_vector<T: Scalar>(episode: &TimeSeries<T>, t: usize, k: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(k * episode.dim());
    for lag in 0..k {
        out.extend_from_slice(episode.sample(t - lag));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: &[f64]) -> TimeSeries<f64> {
        TimeSeries::new(values.iter().map(|&v| vec![v]).collect(), 1.0).unwrap()
    }

    #[test]
    fn identity_embedder_k1() {
        let e = Embedder::new(Mat::<f64>::identity(2), 1, 2).unwrap();
        let y = [3.0, -1.0];
        assert_eq!(e.embed(&[&y]).unwrap(), vec![3.0, -1.0]);
    }

    #[test]
    fn selector_matrix_is_classic_delay_coordinates() {
        let e = Embedder::new(Mat::<f64>::identity(2), 2, 1).unwrap();
        let now = [5.0];
        let before = [7.0];
        assert_eq!(e.embed(&[&now, &before]).unwrap(), vec![5.0, 7.0]);
    }

    #[test]
    fn seeded_embed_matches_dense_multiply() {
        let e = Embedder::<f64>::seeded(3, 2, 4, 99);
        let w0 = [0.3, -0.4];
        let w1 = [1.5, 0.2];
        let w2 = [-0.7, 0.9];
        let got = e.embed(&[&w0, &w1, &w2]).unwrap();
        let stacked = [0.3, -0.4, 1.5, 0.2, -0.7, 0.9];
        for (i, g) in got.iter().enumerate() {
            let mut acc = 0.0;
            for (j, &s) in stacked.iter().enumerate() {
                acc += e.weight()[(i, j)] * s;
            }
            assert!((g - acc).abs() < 1e-15);
        }
    }

    #[test]
    fn wrong_window_length_errors() {
        let e = Embedder::new(Mat::<f64>::identity(2), 2, 1).unwrap();
        let y = [1.0];
        assert!(matches!(
            e.embed(&[&y]),
            Err(ModelError::WindowLength {
                expected: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn pair_counting() {
        let ep = series(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let pairs = build_pairs(std::slice::from_ref(&ep), 2).unwrap();
        assert_eq!(
            pairs.iter().map(|p| p.t).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
    }

    #[test]
    fn boundary_single_pair() {
        let ep = series(&[0.0, 1.0, 2.0]);
        let pairs = build_pairs(std::slice::from_ref(&ep), 2).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].t, 1);
    }

    #[test]
    fn too_short_reports_minimum() {
        let ep = series(&[0.0, 1.0]);
        match build_pairs(std::slice::from_ref(&ep), 2) {
            Err(ModelError::SeriesTooShort { min, .. }) => assert_eq!(min, 3),
            other => panic!("expected SeriesTooShort, got {other:?}"),
        }
    }

    #[test]
    fn episodes_never_straddle() {
        let eps = vec![
            series(&[0.0, 1.0, 2.0, 3.0]),         // 4 samples, k=2 -> 2 pairs
            series(&[0.0, 1.0, 2.0, 3.0, 4.0]),    // 5 samples -> 3 pairs
            series(&[0.0, 1.0, 2.0]),              // 3 samples -> 1 pair
        ];
        let pairs = build_pairs(&eps, 2).unwrap();
        assert_eq!(pairs.len(), 2 + 3 + 1);
        for p in &pairs {
            let len = eps[p.episode].len();
            assert!(p.t + 1 < len, "pair crosses the episode end");
            assert!(p.t >= 1);
        }
    }
}
