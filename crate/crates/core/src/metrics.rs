//! Experiment metrics: multi-step prediction RMSE, rank-statistic ROC AUC
//! with an event tolerance window, and unstable-phenomena detection scores
//! from the smallest-magnitude eigenfunction.

use thiserror::Error;

use crate::dmd::{eigenfunction_values, DmdError, DmdResult, Forecaster};
use crate::model::{LkisModel, ModelError};
use crate::scalar::Scalar;
use crate::series::TimeSeries;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("series of {len} samples is too short: need at least {needed}")]
    TooShort { needed: usize, len: usize },
    #[error("labels are degenerate after window alignment: {positives} positive, {negatives} negative")]
    DegenerateLabels { positives: usize, negatives: usize },
    #[error("score {index} is non-finite")]
    NonFiniteScore { index: usize },
    #[error("scores and labels differ in length: {scores} vs {labels}")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("detection needs at least 2 observable dimensions, found {found}")]
    TooFewModes { found: usize },
    #[error(transparent)]
    Dmd(#[from] DmdError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<V> = std::result::Result<V, MetricError>;

/// Per-horizon root-mean-square forecast error: for every valid start, run
/// a 1..=max_horizon forecast and accumulate squared errors against the
/// series, averaged over starts and components.
pub fn rmse_by_horizon<T: Scalar>(
    forecaster: &dyn Forecaster<T>,
    series: &TimeSeries<T>,
    max_horizon: usize,
) -> Result<Vec<T>> {
    let w = forecaster.window();
    let len = series.len();
    if len < w + max_horizon {
        return Err(MetricError::TooShort {
            needed: w + max_horizon,
            len,
        });
    }
    let r = series.dim();
    let mut sums = vec![T::zero(); max_horizon];
    let mut count = 0usize;
    for t in (w - 1)..(len - max_horizon) {
        let pred = forecaster.forecast(&series.values()[..=t], max_horizon)?;
        for (h, yhat) in pred.iter().enumerate() {
            let truth = series.sample(t + 1 + h);
            for c in 0..r {
                let d = yhat[c] - truth[c];
                sums[h] += d * d;
            }
        }
        count += 1;
    }
    let denom = T::from_usize(count * r).unwrap();
    Ok(sums.into_iter().map(|s| (s / denom).sqrt()).collect())
}

/// Detection scores from the eigenfunction of the smallest-magnitude
/// discrete eigenvalue. Scores exist for t >= offset = k-1; earlier steps
/// are undefined.
#[derive(Debug, Clone)]
pub struct DetectionScores<T> {
    /// First time index with a defined score (k - 1).
    pub offset: usize,
    /// |phi(x~_t)| per step from `offset`.
    pub magnitude: Vec<T>,
    /// Re(phi(x~_t)) per step from `offset`.
    pub real: Vec<T>,
}

/// Score a series for unstable phenomena: evaluate the eigenfunction paired
/// with the smallest-magnitude eigenvalue (a rapidly decaying mode) along
/// the trajectory.
pub fn detect_unstable<T: Scalar>(
    model: &LkisModel<T>,
    res: &DmdResult<T>,
    series: &TimeSeries<T>,
) -> Result<DetectionScores<T>> {
    if res.n() < 2 {
        return Err(MetricError::TooFewModes { found: res.n() });
    }
    let g = model.observable_matrix(series)?;
    let phi = eigenfunction_values(res, &g)?;
    // Eigenvalues are sorted by descending magnitude.
    let mode = res.eigen.values.len() - 1;
    let magnitude: Vec<T> = (0..phi.cols()).map(|t| phi[(mode, t)].norm()).collect();
    let real: Vec<T> = (0..phi.cols()).map(|t| phi[(mode, t)].re).collect();
    Ok(DetectionScores {
        offset: model.k() - 1,
        magnitude,
        real,
    })
}

/// ROC area by rank statistic (ties get average ranks). A step counts as
/// positive when a labeled event lies within `tolerance_window` steps.
pub fn auc<T: Scalar>(scores: &[T], labels: &[bool], tolerance_window: usize) -> Result<T> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricError::NonFiniteScore { index });
    }
    let expanded = expand_labels(labels, tolerance_window);
    let positives = expanded.iter().filter(|&&l| l).count();
    let negatives = expanded.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricError::DegenerateLabels {
            positives,
            negatives,
        });
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    // Average ranks over tie groups, 1-based.
    let mut ranks = vec![T::zero(); scores.len()];
    let mut i = 0usize;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = T::from_usize(i + j + 2).unwrap() / T::c(2.0);
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    let rank_sum = expanded
        .iter()
        .zip(&ranks)
        .filter(|(&l, _)| l)
        .fold(T::zero(), |acc, (_, &r)| acc + r);
    let p = T::from_usize(positives).unwrap();
    let n = T::from_usize(negatives).unwrap();
    Ok((rank_sum - p * (p + T::one()) / T::c(2.0)) / (p * n))
}

/// A step is positive when an event lies within `window` steps of it.
fn expand_labels(labels: &[bool], window: usize) -> Vec<bool> {
    if window == 0 {
        return labels.to_vec();
    }
    let mut out = vec![false; labels.len()];
    for (i, &l) in labels.iter().enumerate() {
        if l {
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(labels.len() - 1);
            for o in out.iter_mut().take(hi + 1).skip(lo) {
                *o = true;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn auc_perfect_separation() {
        let scores = [0.1, 0.2, 0.3, 0.8, 0.9];
        let labels = [false, false, false, true, true];
        assert_eq!(auc(&scores, &labels, 0).unwrap(), 1.0);
    }

    #[test]
    fn auc_reversed_scores() {
        let scores = [0.9, 0.8, 0.3, 0.2, 0.1];
        let labels = [false, false, false, true, true];
        assert_eq!(auc(&scores, &labels, 0).unwrap(), 0.0);
    }

    #[test]
    fn auc_independent_scores_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let scores: Vec<f64> = (0..10_000).map(|_| rng.random_range(0.0..1.0)).collect();
        let labels: Vec<bool> = (0..10_000).map(|_| rng.random_bool(0.2)).collect();
        let a = auc(&scores, &labels, 0).unwrap();
        assert!((a - 0.5).abs() < 0.02, "auc {a}");
    }

    #[test]
    fn auc_invariant_under_monotone_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let scores: Vec<f64> = (0..500).map(|_| rng.random_range(0.0..4.0)).collect();
        let labels: Vec<bool> = scores
            .iter()
            .map(|&s| s > 2.0 && rng.random_bool(0.8))
            .collect();
        let base = auc(&scores, &labels, 0).unwrap();
        let squashed: Vec<f64> = scores.iter().map(|&s| (3.0 * s + 1.0).tanh()).collect();
        let transformed = auc(&squashed, &labels, 0).unwrap();
        assert!((base - transformed).abs() < 1e-12);
    }

    #[test]
    fn auc_window_counts_neighbours_as_positive() {
        let scores = [0.0, 0.9, 1.0, 0.9, 0.0, 0.1, 0.05, 0.0];
        let mut labels = [false; 8];
        labels[2] = true;
        let tight = auc(&scores, &labels, 0).unwrap();
        let loose = auc(&scores, &labels, 1).unwrap();
        assert_eq!(tight, 1.0);
        assert_eq!(loose, 1.0);
        // Window 1 turns steps 1..=3 positive; degenerate check unaffected.
        let expanded = expand_labels(&labels, 1);
        assert_eq!(expanded.iter().filter(|&&l| l).count(), 3);
    }

    #[test]
    fn auc_degenerate_labels_error() {
        let scores = [0.1, 0.2];
        assert!(matches!(
            auc(&scores, &[false, false], 0),
            Err(MetricError::DegenerateLabels { .. })
        ));
        assert!(matches!(
            auc(&scores, &[true, true], 0),
            Err(MetricError::DegenerateLabels { .. })
        ));
    }

    /// Repeats the last observed value.
    struct Persistence {
        r: usize,
    }

    impl Forecaster<f64> for Persistence {
        fn window(&self) -> usize {
            1
        }
        fn dim(&self) -> usize {
            self.r
        }
        fn forecast(
            &self,
            history: &[Vec<f64>],
            horizon: usize,
        ) -> crate::dmd::Result<Vec<Vec<f64>>> {
            Ok(vec![history.last().unwrap().clone(); horizon])
        }
    }

    #[test]
    fn persistence_rmse_grows_on_lorenz_x() {
        use crate::dynamics::{simulate, System, SystemSpec};
        let spec = SystemSpec::new(System::<f64>::lorenz()).observe(vec![0]);
        let traj = simulate(&spec, &[1.0, 1.0, 1.0], 2_000, 0, 0.0, 500).unwrap();
        let series = traj.observation_series();
        let rmse = rmse_by_horizon(&Persistence { r: 1 }, &series, 30).unwrap();
        assert!(rmse[29] > rmse[9]);
        assert!(rmse[9] > rmse[0]);
        assert!(rmse[0] > 0.0);
    }

    #[test]
    fn horizon_one_matches_direct_one_step_error() {
        use crate::dynamics::{simulate, System, SystemSpec};
        let spec = SystemSpec::new(System::<f64>::rossler()).observe(vec![0]);
        let traj = simulate(&spec, &[1.0, 1.0, 1.0], 300, 0, 0.0, 100).unwrap();
        let series = traj.observation_series();
        let fc = Persistence { r: 1 };
        let rmse = rmse_by_horizon(&fc, &series, 1).unwrap();
        let mut acc = 0.0;
        let mut count = 0;
        for t in 0..series.len() - 1 {
            let d = series.sample(t)[0] - series.sample(t + 1)[0];
            acc += d * d;
            count += 1;
        }
        let direct = (acc / count as f64).sqrt();
        assert!((rmse[0] - direct).abs() < 1e-12);
    }

    #[test]
    fn too_short_series_rejected() {
        let series = TimeSeries::new(vec![vec![0.0]; 10], 1.0).unwrap();
        assert!(matches!(
            rmse_by_horizon(&Persistence { r: 1 }, &series, 30),
            Err(MetricError::TooShort { .. })
        ));
    }
}
