use num_complex::Complex;

use super::{DmdError, DmdResult, Result};
use crate::linalg::ComplexEigenSystem;
use crate::model::LkisModel;
use crate::scalar::Scalar;

/// One application of the modal propagator:
/// `g' = sum_i lambda_i (z_i^H g) w_i` (equals `A g` for a biorthonormal
/// eigensystem).
fn mode_step<T: Scalar>(eigen: &ComplexEigenSystem<T>, g: &[Complex<T>]) -> Vec<Complex<T>> {
    let n = eigen.values.len();
    let mut phi = vec![Complex::new(T::zero(), T::zero()); n];
    for (i, p) in phi.iter_mut().enumerate() {
        for (row, gv) in g.iter().enumerate() {
            *p += eigen.left[(row, i)].conj() * gv;
        }
        *p = *p * eigen.values[i];
    }
    let mut out = vec![Complex::new(T::zero(), T::zero()); g.len()];
    for (row, o) in out.iter_mut().enumerate() {
        for (i, p) in phi.iter().enumerate() {
            *o += eigen.right[(row, i)] * p;
        }
    }
    out
}

/// Multi-step forecaster over raw measurement histories.
pub trait Forecaster<T: Scalar> {
    /// Number of trailing samples needed to start a forecast.
    fn window(&self) -> usize;
    /// Measurement dimension of inputs and outputs.
    fn dim(&self) -> usize;
    /// Predict the next `horizon` measurements after `history` (chronological
    /// order; at least [`Self::window`] samples).
    fn forecast(&self, history: &[Vec<T>], horizon: usize) -> Result<Vec<Vec<T>>>;
}

/// Iterate the decomposition of learned observables and map each step back
/// to measurement space through the reconstructor. The spectrum of a real
/// run is conjugate-symmetric, so the imaginary residual is discarded.
pub fn predict<T: Scalar>(
    model: &LkisModel<T>,
    res: &DmdResult<T>,
    history: &[Vec<T>],
    horizon: usize,
) -> Result<Vec<Vec<T>>> {
    if horizon == 0 {
        return Err(DmdError::ZeroHorizon);
    }
    if res.n() != model.n() {
        return Err(DmdError::DimensionMismatch {
            expected: model.n(),
            found: res.n(),
        });
    }
    let k = model.k();
    if history.len() < k {
        return Err(DmdError::ShortHistory {
            expected: k,
            found: history.len(),
        });
    }
    let window: Vec<&[T]> = (0..k)
        .map(|lag| history[history.len() - 1 - lag].as_slice())
        .collect();
    let g0 = model
        .observe_window(&window)
        .map_err(|e| DmdError::BadDocument {
            reason: e.to_string(),
        })?;
    let mut g: Vec<Complex<T>> = g0
        .into_iter()
        .map(|v| Complex::new(v, T::zero()))
        .collect();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        g = mode_step(&res.eigen, &g);
        let g_real: Vec<T> = g.iter().map(|c| c.re).collect();
        let y = model
            .reconstruct(&g_real)
            .map_err(|e| DmdError::BadDocument {
                reason: e.to_string(),
            })?;
        out.push(y);
    }
    Ok(out)
}

/// Forecaster backed by a trained model plus its decomposition.
pub struct LkisForecaster<'a, T> {
    pub model: &'a LkisModel<T>,
    pub dmd: &'a DmdResult<T>,
}

impl<T: Scalar> Forecaster<T> for LkisForecaster<'_, T> {
    fn window(&self) -> usize {
        self.model.k()
    }

    fn dim(&self) -> usize {
        self.model.r()
    }

    fn forecast(&self, history: &[Vec<T>], horizon: usize) -> Result<Vec<Vec<T>>> {
        predict(self.model, self.dmd, history, horizon)
    }
}

/// Forecaster for the linear Hankel baseline: the observable vector is the
/// measurement window stacked newest first, so the forecast reads off the
/// leading block after each modal step.
pub struct HankelForecaster<'a, T> {
    dmd: &'a DmdResult<T>,
    delay: usize,
    r: usize,
}

impl<'a, T: Scalar> HankelForecaster<'a, T> {
    pub fn new(dmd: &'a DmdResult<T>, delay: usize, r: usize) -> Result<Self> {
        if delay * r != dmd.n() {
            return Err(DmdError::DimensionMismatch {
                expected: dmd.n(),
                found: delay * r,
            });
        }
        Ok(Self { dmd, delay, r })
    }
}

impl<T: Scalar> Forecaster<T> for HankelForecaster<'_, T> {
    fn window(&self) -> usize {
        self.delay
    }

    fn dim(&self) -> usize {
        self.r
    }

    fn forecast(&self, history: &[Vec<T>], horizon: usize) -> Result<Vec<Vec<T>>> {
        if horizon == 0 {
            return Err(DmdError::ZeroHorizon);
        }
        if history.len() < self.delay {
            return Err(DmdError::ShortHistory {
                expected: self.delay,
                found: history.len(),
            });
        }
        let mut g = Vec::with_capacity(self.delay * self.r);
        for lag in 0..self.delay {
            for &v in &history[history.len() - 1 - lag] {
                g.push(Complex::new(v, T::zero()));
            }
        }
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            g = mode_step(&self.dmd.eigen, &g);
            out.push(g[..self.r].iter().map(|c| c.re).collect());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmd::{build_data_matrices, dmd_fit, hankel_dmd};
    use crate::linalg::Mat;
    use crate::model::{Embedder, Hyper};
    use crate::nn::Mlp;
    use crate::series::TimeSeries;

    /// k = 1, p = n = r = 1, identity embedder and networks: the learned
    /// stack reduces to the raw scalar measurement.
    fn identity_model() -> LkisModel<f64> {
        let mut g = Mlp::new(&[1, 1], 0).unwrap();
        g.set_params(&[1.0, 0.0]);
        let mut h = Mlp::new(&[1, 1], 0).unwrap();
        h.set_params(&[1.0, 0.0]);
        LkisModel::from_parts(
            Embedder::new(Mat::identity(1), 1, 1).unwrap(),
            g,
            h,
            Hyper::new(1, 1, 1),
            1.0,
        )
        .unwrap()
    }

    fn scalar_halving_series(steps: usize) -> TimeSeries<f64> {
        let mut v = 1.0;
        let mut values = Vec::new();
        for _ in 0..steps {
            values.push(vec![v]);
            v *= 0.5;
        }
        TimeSeries::new(values, 1.0).unwrap()
    }

    #[test]
    fn scalar_linear_prediction() {
        let model = identity_model();
        let series = scalar_halving_series(12);
        let obs = model.observable_matrix(&series).unwrap();
        let dm = build_data_matrices(std::slice::from_ref(&obs), "id").unwrap();
        let res = dmd_fit(&dm, 1.0).unwrap();
        let history = vec![vec![0.25]];
        let pred = predict(&model, &res, &history, 4).unwrap();
        for (h, y) in pred.iter().enumerate() {
            let expected = 0.25 * 0.5_f64.powi(h as i32 + 1);
            assert!(
                (y[0] - expected).abs() < 1e-10,
                "step {h}: {} vs {expected}",
                y[0]
            );
        }
    }

    #[test]
    fn one_step_equals_matrix_action() {
        // The modal form with a biorthonormal pair collapses to A itself.
        let model = identity_model();
        let series = scalar_halving_series(10);
        let obs = model.observable_matrix(&series).unwrap();
        let dm = build_data_matrices(std::slice::from_ref(&obs), "id").unwrap();
        let res = dmd_fit(&dm, 1.0).unwrap();
        let y = 0.7;
        let pred = predict(&model, &res, &[vec![y]], 1).unwrap();
        let direct = res.a[(0, 0)] * y;
        assert!((pred[0][0] - direct).abs() < 1e-8);
    }

    #[test]
    fn hankel_forecast_matches_linear_power() {
        // Damped rotation: complex pair; forecasts must stay real and track
        // the true linear evolution.
        let th = 0.5_f64;
        let rho = 0.93;
        let a = [
            [rho * th.cos(), -rho * th.sin()],
            [rho * th.sin(), rho * th.cos()],
        ];
        let mut x = [1.0, -0.4];
        let mut values = Vec::new();
        for _ in 0..40 {
            values.push(vec![x[0], x[1]]);
            x = [
                a[0][0] * x[0] + a[0][1] * x[1],
                a[1][0] * x[0] + a[1][1] * x[1],
            ];
        }
        let truth: Vec<Vec<f64>> = values[30..].to_vec();
        let series = TimeSeries::new(values[..30].to_vec(), 1.0).unwrap();
        let res = hankel_dmd(std::slice::from_ref(&series), 1).unwrap();
        let fc = HankelForecaster::new(&res, 1, 2).unwrap();
        let pred = fc.forecast(series.values(), 10).unwrap();
        for (p, t) in pred.iter().zip(&truth) {
            assert!((p[0] - t[0]).abs() < 1e-8);
            assert!((p[1] - t[1]).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_horizon_rejected() {
        let model = identity_model();
        let series = scalar_halving_series(8);
        let obs = model.observable_matrix(&series).unwrap();
        let dm = build_data_matrices(std::slice::from_ref(&obs), "id").unwrap();
        let res = dmd_fit(&dm, 1.0).unwrap();
        assert!(matches!(
            predict(&model, &res, &[vec![1.0]], 0),
            Err(DmdError::ZeroHorizon)
        ));
    }

    #[test]
    fn model_result_mismatch_rejected() {
        let model = identity_model();
        // Hankel result with n = 2 does not match the n = 1 model.
        let series = TimeSeries::new(
            (0..10).map(|t| vec![(t as f64 * 0.3).sin()]).collect(),
            1.0,
        )
        .unwrap();
        let res = hankel_dmd(std::slice::from_ref(&series), 2).unwrap();
        assert!(matches!(
            predict(&model, &res, &[vec![1.0]], 1),
            Err(DmdError::DimensionMismatch { .. })
        ));
    }
}
