use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;
use crate::series::TimeSeries;

/// Synthetic stable oscillation with injected amplitude collapses: the
/// amplitude relaxes toward 1, collapses abruptly at seeded event steps,
/// then recovers. Returns the series and the per-step event labels.
pub fn synthetic_collapse<T: Scalar>(len: usize, seed: u64) -> (TimeSeries<T>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = std::f64::consts::TAU / 20.0;
    let noise = 0.01;
    let recovery = 0.04;
    let min_gap = 180usize;
    let collapse_to = 0.12;

    let mut labels = vec![false; len];
    let mut next_event = 150 + rng.random_range(0..min_gap);
    let mut amplitude = 1.0f64;
    let mut values = Vec::with_capacity(len);
    for t in 0..len {
        if t == next_event && t + min_gap < len {
            amplitude = collapse_to;
            labels[t] = true;
            next_event = t + min_gap + rng.random_range(0..min_gap);
        }
        amplitude += recovery * (1.0 - amplitude);
        let y = amplitude * (omega * t as f64).sin() + noise * rng.random_range(-1.0..1.0);
        values.push(vec![T::c(y)]);
    }
    (
        TimeSeries::new(values, T::one()).expect("synthetic series is well-formed"),
        labels,
    )
}

/// Label sudden amplitude decays: an event fires where the rolling
/// peak-to-peak amplitude over the next `window` steps drops by more than
/// `drop_ratio` relative to the previous `window` steps. Events within
/// `window` of a previous event are suppressed.
pub fn label_amplitude_collapses<T: Scalar>(
    component: &[T],
    window: usize,
    drop_ratio: f64,
) -> Vec<bool> {
    let len = component.len();
    let mut labels = vec![false; len];
    if len < 2 * window + 1 || window == 0 {
        return labels;
    }
    let ptp = |range: std::ops::Range<usize>| -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in range {
            let v = component[i].f64();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        hi - lo
    };
    let mut last_event: Option<usize> = None;
    for t in window..(len - window) {
        let prev = ptp(t - window..t);
        let cur = ptp(t..t + window);
        if prev > 0.0 && cur < (1.0 - drop_ratio) * prev {
            let suppressed = last_event.is_some_and(|e| t - e <= window);
            if !suppressed {
                labels[t] = true;
                last_event = Some(t);
            }
        }
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_has_events_and_oscillation() {
        let (series, labels) = synthetic_collapse::<f64>(4000, 0);
        let events = labels.iter().filter(|&&l| l).count();
        assert!(events >= 5, "only {events} events");
        let max = series
            .values()
            .iter()
            .map(|v| v[0].abs())
            .fold(0.0, f64::max);
        assert!(max > 0.8 && max < 1.3, "amplitude {max}");
        // Deterministic per seed.
        let (s2, l2) = synthetic_collapse::<f64>(4000, 0);
        assert_eq!(series, s2);
        assert_eq!(labels, l2);
    }

    #[test]
    fn labeler_finds_injected_collapses() {
        let (series, truth) = synthetic_collapse::<f64>(3000, 1);
        let component: Vec<f64> = series.values().iter().map(|v| v[0]).collect();
        let labels = label_amplitude_collapses(&component, 50, 0.5);
        let found = labels.iter().filter(|&&l| l).count();
        let injected = truth.iter().filter(|&&l| l).count();
        assert!(found >= injected / 2, "found {found} of {injected}");
        // Every detection sits near an injected event.
        let event_steps: Vec<usize> = truth
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| l.then_some(i))
            .collect();
        for (i, &l) in labels.iter().enumerate() {
            if l {
                let near = event_steps
                    .iter()
                    .any(|&e| (i as isize - e as isize).unsigned_abs() <= 60);
                assert!(near, "spurious detection at {i}");
            }
        }
    }

    #[test]
    fn labeler_quiet_on_constant_amplitude() {
        let values: Vec<f64> = (0..2000).map(|t| (t as f64 * 0.3).sin()).collect();
        let labels = label_amplitude_collapses(&values, 50, 0.5);
        assert!(labels.iter().all(|&l| !l));
    }
}
