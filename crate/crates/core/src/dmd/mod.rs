//! DMD over any observable source: snapshot-pair assembly, decomposition
//! into eigenvalues, modes, and eigenfunctions, the linear Hankel and
//! extended (dictionary) baselines, modal prediction, and the
//! discrete-to-continuous eigenvalue map.

mod dictionary;
mod forecast;

pub use dictionary::Dictionary;
pub use forecast::{predict, Forecaster, HankelForecaster, LkisForecaster};

use std::path::Path;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    biorthonormalize, eig_general, pinv, CMat, ComplexEigenSystem, LinalgError, Mat,
};
use crate::scalar::Scalar;
use crate::series::TimeSeries;

#[derive(Debug, Error)]
pub enum DmdError {
    #[error("need at least {min} snapshots, found {found}")]
    NotEnoughSnapshots { min: usize, found: usize },
    #[error("snapshot matrices disagree in {what}")]
    InconsistentShapes { what: String },
    #[error("Y0 is identically zero")]
    ZeroData,
    #[error("dictionary function '{name}' produced a non-finite value on state {index}")]
    NonFiniteDictionary { name: String, index: usize },
    #[error("dictionary is empty")]
    EmptyDictionary,
    #[error("cannot parse dictionary term '{term}': {reason}")]
    BadDictionaryTerm { term: String, reason: String },
    #[error("prediction horizon must be at least 1")]
    ZeroHorizon,
    #[error("history of {found} samples is shorter than the window of {expected}")]
    ShortHistory { expected: usize, found: usize },
    #[error("observable dimension {found} does not match the decomposition ({expected})")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("discrete eigenvalue {index} is zero; no finite continuous-time rate")]
    ZeroEigenvalue { index: usize },
    #[error("sample interval must be positive, got {dt}")]
    BadDt { dt: f64 },
    #[error("result document is invalid: {reason}")]
    BadDocument { reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<V> = std::result::Result<V, DmdError>;

/// Snapshot pair (Y0, Y1): column t of Y1 is the observable vector one step
/// after column t of Y0. Pairs never straddle episode boundaries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataMatrices<T> {
    pub y0: Mat<T>,
    pub y1: Mat<T>,
    pub source: String,
}

/// Shift-and-concatenate per-episode observable matrices (n x m_e+1 each).
pub fn build_data_matrices<T: Scalar>(
    observables: &[Mat<T>],
    source: impl Into<String>,
) -> Result<DataMatrices<T>> {
    if observables.is_empty() {
        return Err(DmdError::NotEnoughSnapshots { min: 2, found: 0 });
    }
    let n = observables[0].rows();
    for m in observables {
        if m.rows() != n {
            return Err(DmdError::InconsistentShapes {
                what: format!("observable dimension ({} vs {n})", m.rows()),
            });
        }
        if m.cols() < 2 {
            return Err(DmdError::NotEnoughSnapshots {
                min: 2,
                found: m.cols(),
            });
        }
    }
    let mut y0 = Vec::new();
    let mut y1 = Vec::new();
    for m in observables {
        y0.push(m.col_block(0, m.cols() - 1));
        y1.push(m.col_block(1, m.cols()));
    }
    let mut y0_all = y0[0].clone();
    let mut y1_all = y1[0].clone();
    for (a, b) in y0.iter().skip(1).zip(y1.iter().skip(1)) {
        y0_all = y0_all.hstack(a);
        y1_all = y1_all.hstack(b);
    }
    Ok(DataMatrices {
        y0: y0_all,
        y1: y1_all,
        source: source.into(),
    })
}

/// DMD of the snapshot pair: the regression matrix `A = Y1 Y0^+`, its
/// biorthonormalized eigensystem, and mode amplitudes from the first
/// snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DmdResult<T> {
    pub a: Mat<T>,
    pub eigen: ComplexEigenSystem<T>,
    pub delta_t: T,
    pub amplitudes: Vec<Complex<T>>,
    pub source: String,
}

/// Fit the decomposition. Eigenvalues follow the crate's deterministic
/// ordering; `z_j^H w_i = delta_ij` holds within 1e-8 after the fit.
pub fn dmd_fit<T: Scalar>(dm: &DataMatrices<T>, delta_t: T) -> Result<DmdResult<T>> {
    if delta_t <= T::zero() || !delta_t.is_finite() {
        return Err(DmdError::BadDt { dt: delta_t.f64() });
    }
    if dm.y0.shape() != dm.y1.shape() {
        return Err(DmdError::InconsistentShapes {
            what: format!("Y0 {:?} vs Y1 {:?}", dm.y0.shape(), dm.y1.shape()),
        });
    }
    if dm.y0.frobenius_norm() == T::zero() {
        return Err(DmdError::ZeroData);
    }
    let a = dm.y1.matmul(&pinv(&dm.y0, None)?);
    let eigen = biorthonormalize(&eig_general(&a)?)?;
    // Amplitudes solve W c = Y0[:, 0] in least squares; with the
    // biorthonormal pair this is c = Z^H y0.
    let y0_first: Vec<Complex<T>> = dm
        .y0
        .col(0)
        .into_iter()
        .map(|v| Complex::new(v, T::zero()))
        .collect();
    let amplitudes = eigen.left.hermitian().matvec(&y0_first);
    Ok(DmdResult {
        a,
        eigen,
        delta_t,
        amplitudes,
        source: dm.source.clone(),
    })
}

/// Stack raw measurements over `delay` lags (newest first) and fit. The lag
/// step is one sample; `delay = 1` degenerates to DMD on the measurements.
pub fn hankel_dmd<T: Scalar>(episodes: &[TimeSeries<T>], delay: usize) -> Result<DmdResult<T>> {
    if delay == 0 {
        return Err(DmdError::NotEnoughSnapshots { min: 1, found: 0 });
    }
    if episodes.is_empty() {
        return Err(DmdError::NotEnoughSnapshots { min: 2, found: 0 });
    }
    let r = episodes[0].dim();
    let mut blocks = Vec::with_capacity(episodes.len());
    for ep in episodes {
        if ep.len() < delay + 1 {
            return Err(DmdError::NotEnoughSnapshots {
                min: delay + 1,
                found: ep.len(),
            });
        }
        if ep.dim() != r {
            return Err(DmdError::InconsistentShapes {
                what: format!("measurement dimension ({} vs {r})", ep.dim()),
            });
        }
        let cols = ep.len() - delay + 1;
        blocks.push(Mat::from_fn(delay * r, cols, |i, j| {
            let lag = i / r;
            let comp = i % r;
            ep.sample(delay - 1 + j - lag)[comp]
        }));
    }
    let dm = build_data_matrices(&blocks, format!("hankel(delay={delay})"))?;
    dmd_fit(&dm, episodes[0].dt())
}

/// Evaluate a dictionary of observables on state-space series and fit.
pub fn extended_dmd<T: Scalar>(
    states: &[TimeSeries<T>],
    dict: &Dictionary<T>,
) -> Result<DmdResult<T>> {
    if dict.len() == 0 {
        return Err(DmdError::EmptyDictionary);
    }
    if states.is_empty() {
        return Err(DmdError::NotEnoughSnapshots { min: 2, found: 0 });
    }
    let mut blocks = Vec::with_capacity(states.len());
    let mut offset = 0usize;
    for ep in states {
        let mut block = Mat::<T>::zeros(dict.len(), ep.len());
        for (t, state) in ep.values().iter().enumerate() {
            let values = dict.evaluate_indexed(state, offset + t)?;
            for (i, v) in values.into_iter().enumerate() {
                block[(i, t)] = v;
            }
        }
        offset += ep.len();
        blocks.push(block);
    }
    let dm = build_data_matrices(&blocks, format!("dictionary({})", dict.names().join(",")))?;
    dmd_fit(&dm, states[0].dt())
}

/// Eigenfunction values along a run: row i is
/// `phi_i(x_t) = z_i^H g(x_t)` over the observable columns.
pub fn eigenfunction_values<T: Scalar>(
    res: &DmdResult<T>,
    observables: &Mat<T>,
) -> Result<CMat<T>> {
    if observables.rows() != res.a.rows() {
        return Err(DmdError::DimensionMismatch {
            expected: res.a.rows(),
            found: observables.rows(),
        });
    }
    Ok(res.eigen.left.hermitian().matmul_real(observables))
}

/// Principal-branch continuous-time eigenvalues `ln(lambda) / dt`.
pub fn to_continuous<T: Scalar>(res: &DmdResult<T>) -> Result<Vec<Complex<T>>> {
    res.eigen
        .values
        .iter()
        .enumerate()
        .map(|(index, lam)| {
            let mag = lam.norm();
            if mag == T::zero() {
                return Err(DmdError::ZeroEigenvalue { index });
            }
            Ok(Complex::new(mag.ln(), lam.arg()) / Complex::new(res.delta_t, T::zero()))
        })
        .collect()
}

impl<T: Scalar> DmdResult<T> {
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&VersionedDmd {
            version: 1,
            result: self.clone(),
        })
        .expect("dmd result serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: VersionedDmd<T> =
            serde_json::from_str(text).map_err(|e| DmdError::BadDocument {
                reason: e.to_string(),
            })?;
        if doc.version != 1 {
            return Err(DmdError::BadDocument {
                reason: format!("unsupported version {}", doc.version),
            });
        }
        let r = doc.result;
        if r.a.rows() != r.a.cols()
            || r.eigen.values.len() != r.a.rows()
            || r.amplitudes.len() != r.a.rows()
        {
            return Err(DmdError::BadDocument {
                reason: "inconsistent result dimensions".into(),
            });
        }
        Ok(r)
    }

    /// Eigenvalue scatter as CSV columns (re, im, abs, angle).
    pub fn write_eigenvalue_csv(&self, path: &Path) -> Result<()> {
        write_eigenvalue_csv(&self.eigen.values, path)
    }
}

/// CSV export shared by discrete and continuous spectra.
pub fn write_eigenvalue_csv<T: Scalar>(values: &[Complex<T>], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(["re", "im", "abs", "angle"])
        .map_err(|e| io_err(path, e))?;
    for v in values {
        w.write_record([
            format!("{}", v.re),
            format!("{}", v.im),
            format!("{}", v.norm()),
            format!("{}", v.arg()),
        ])
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|source| DmdError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn io_err(path: &Path, e: csv::Error) -> DmdError {
    DmdError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn snapshots_to_mat(snaps: &[Vec<f64>]) -> Mat<f64> {
        Mat::from_fn(snaps[0].len(), snaps.len(), |i, j| snaps[j][i])
    }

    #[test]
    fn three_snapshots_shift() {
        let m = snapshots_to_mat(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 2.0]]);
        let dm = build_data_matrices(std::slice::from_ref(&m), "raw").unwrap();
        assert_eq!(dm.y0.shape(), (2, 2));
        assert_eq!(dm.y1.shape(), (2, 2));
        assert_eq!(dm.y0.col(0), vec![1.0, 0.0]);
        assert_eq!(dm.y0.col(1), vec![0.0, 1.0]);
        assert_eq!(dm.y1.col(0), vec![0.0, 1.0]);
        assert_eq!(dm.y1.col(1), vec![2.0, 2.0]);
    }

    #[test]
    fn single_snapshot_is_an_error() {
        let m = Mat::<f64>::zeros(2, 1);
        assert!(matches!(
            build_data_matrices(std::slice::from_ref(&m), "raw"),
            Err(DmdError::NotEnoughSnapshots { .. })
        ));
    }

    #[test]
    fn episode_list_concatenates_per_episode_shifts() {
        let a = Mat::<f64>::from_fn(2, 4, |i, j| (i + 10 * j) as f64);
        let b = Mat::<f64>::from_fn(2, 3, |i, j| (i + 10 * j) as f64 + 100.0);
        let joint = build_data_matrices(&[a.clone(), b.clone()], "eps").unwrap();
        let da = build_data_matrices(std::slice::from_ref(&a), "a").unwrap();
        let db = build_data_matrices(std::slice::from_ref(&b), "b").unwrap();
        assert_eq!(joint.y0, da.y0.hstack(&db.y0));
        assert_eq!(joint.y1, da.y1.hstack(&db.y1));
        assert_eq!(joint.y0.cols(), 3 + 2);
    }

    fn linear_run(a: &Mat<f64>, x0: Vec<f64>, steps: usize) -> Mat<f64> {
        let mut cols = vec![x0];
        for _ in 0..steps {
            let last = cols.last().unwrap();
            cols.push(a.matvec(last));
        }
        snapshots_to_mat(&cols)
    }

    #[test]
    fn exact_linear_dynamics_recovered() {
        let d = Mat::<f64>::diag(&[0.9, 0.5]);
        let obs = linear_run(&d, vec![1.0, 1.0], 20);
        let dm = build_data_matrices(std::slice::from_ref(&obs), "raw").unwrap();
        let res = dmd_fit(&dm, 1.0).unwrap();
        assert!((res.eigen.values[0].re - 0.9).abs() < 1e-10);
        assert!((res.eigen.values[1].re - 0.5).abs() < 1e-10);
    }

    #[test]
    fn modal_reconstruction_of_linear_case() {
        let th = 0.7_f64;
        let a = Mat::from_rows(&[
            vec![0.95 * th.cos(), -0.95 * th.sin()],
            vec![0.95 * th.sin(), 0.95 * th.cos()],
        ]);
        let obs = linear_run(&a, vec![1.0, 0.25], 30);
        let dm = build_data_matrices(std::slice::from_ref(&obs), "raw").unwrap();
        let res = dmd_fit(&dm, 1.0).unwrap();
        // Sum_i lambda_i^t c_i w_i should reproduce the snapshots.
        for t in 0..obs.cols() {
            for row in 0..2 {
                let mut acc = Complex::new(0.0, 0.0);
                for i in 0..2 {
                    let lam_t = res.eigen.values[i].powf(t as f64);
                    acc += lam_t * res.amplitudes[i] * res.eigen.right[(row, i)];
                }
                assert!(
                    (acc.re - obs[(row, t)]).abs() < 1e-6,
                    "entry ({row},{t}): {} vs {}",
                    acc.re,
                    obs[(row, t)]
                );
                assert!(acc.im.abs() < 1e-8);
            }
        }
    }

    #[test]
    fn mode_left_right_resolution_of_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Mat::<f64>::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let obs = linear_run(&a, vec![1.0, -0.5, 0.25, 0.8], 40);
        let dm = build_data_matrices(std::slice::from_ref(&obs), "raw").unwrap();
        let res = dmd_fit(&dm, 1.0);
        // Random 4x4 maps can diverge; scale so the run stays finite.
        let res = match res {
            Ok(r) => r,
            Err(_) => return,
        };
        let mut sum = CMat::<f64>::zeros(4, 4);
        for i in 0..4 {
            for r0 in 0..4 {
                for c0 in 0..4 {
                    let t = sum[(r0, c0)]
                        + res.eigen.right[(r0, i)] * res.eigen.left[(c0, i)].conj();
                    sum[(r0, c0)] = t;
                }
            }
        }
        let err = sum.sub(&CMat::identity(4)).max_abs();
        assert!(err < 1e-8, "resolution of identity off by {err}");
    }

    #[test]
    fn zero_y0_rejected() {
        let dm = DataMatrices {
            y0: Mat::<f64>::zeros(2, 3),
            y1: Mat::<f64>::zeros(2, 3),
            source: "zero".into(),
        };
        assert!(matches!(dmd_fit(&dm, 1.0), Err(DmdError::ZeroData)));
    }

    #[test]
    fn to_continuous_known_values() {
        let d = Mat::<f64>::diag(&[1.0, (-0.5_f64 * 0.1).exp()]);
        let obs = linear_run(&d, vec![1.0, 1.0], 10);
        let dm = build_data_matrices(std::slice::from_ref(&obs), "raw").unwrap();
        let res = dmd_fit(&dm, 0.1).unwrap();
        let cont = to_continuous(&res).unwrap();
        assert!(cont[0].re.abs() < 1e-9, "lambda = 1 maps to 0");
        assert!((cont[1].re + 0.5).abs() < 1e-9, "exp(-0.5 dt) maps to -0.5");
        assert!(cont.iter().all(|c| c.im.abs() < 1e-12));
    }

    #[test]
    fn json_roundtrip() {
        let d = Mat::<f64>::diag(&[0.9, 0.5]);
        let obs = linear_run(&d, vec![1.0, 1.0], 10);
        let dm = build_data_matrices(std::slice::from_ref(&obs), "raw").unwrap();
        let res = dmd_fit(&dm, 0.5).unwrap();
        let back = DmdResult::<f64>::from_json(&res.to_json()).unwrap();
        assert_eq!(back.a, res.a);
        assert_eq!(back.eigen.values, res.eigen.values);
        assert_eq!(back.amplitudes, res.amplitudes);
        assert_eq!(back.delta_t, res.delta_t);
    }
}

#[derive(Serialize, Deserialize)]
struct VersionedDmd<T> {
    version: u32,
    result: DmdResult<T>,
}
