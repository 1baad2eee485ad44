//! Deterministic generators for the benchmark systems: a polynomial
//! fixed-point map, FitzHugh–Nagumo, unforced Duffing, Lorenz, Rossler, and
//! arbitrary linear maps, with RK4 integration, seeded initial conditions,
//! and Gaussian observation noise on the observed components.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

use crate::linalg::Mat;
use crate::scalar::Scalar;
use crate::series::{SeriesError, TimeSeries};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("initial state has {found} components, system needs {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("state became non-finite at step {step}")]
    Diverged { step: usize },
    #[error("derivative is non-finite")]
    NonFiniteDerivative,
    #[error("steps must be at least 1")]
    NoSteps,
    #[error("bad system parameter: {reason}")]
    BadSpec { reason: String },
    #[error("observed component {index} outside dimension {dim}")]
    BadObserved { index: usize, dim: usize },
    #[error("trajectory neither settled near (1, 0) nor (-1, 0) within {steps} samples")]
    BasinUndecided { steps: usize },
    #[error("manifest is invalid: {reason}")]
    BadManifest { reason: String },
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<V> = std::result::Result<V, SimError>;

/// The dynamical law. Continuous systems carry their sampling interval and
/// the inner RK4 substep; discrete maps advance one sample per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum System<T> {
    /// x1' = lambda x1, x2' = mu x2 + (lambda^2 - mu) x1^2.
    FixedPointMap { lambda: T, mu: T },
    /// x_{t+1} = M x_t.
    LinearMap { matrix: Mat<T> },
    FitzHughNagumo {
        a: T,
        b: T,
        c: T,
        i_ext: T,
        sample_dt: T,
        substep: T,
    },
    Duffing {
        alpha: T,
        beta: T,
        delta: T,
        sample_dt: T,
        substep: T,
    },
    Lorenz {
        sigma: T,
        rho: T,
        beta: T,
        sample_dt: T,
        substep: T,
    },
    Rossler {
        a: T,
        b: T,
        c: T,
        sample_dt: T,
        substep: T,
    },
}

impl<T: Scalar> System<T> {
    pub fn fixed_point(lambda: T, mu: T) -> Self {
        System::FixedPointMap { lambda, mu }
    }

    /// Limit-cycle FitzHugh–Nagumo with the benchmark parameters.
    pub fn fhn() -> Self {
        System::FitzHughNagumo {
            a: T::c(0.7),
            b: T::c(0.8),
            c: T::c(0.08),
            i_ext: T::c(0.8),
            sample_dt: T::c(0.5),
            substep: T::c(0.01),
        }
    }

    /// Unforced Duffing with two stable equilibria at (+-1, 0).
    pub fn duffing() -> Self {
        System::Duffing {
            alpha: T::one(),
            beta: T::c(-1.0),
            delta: T::c(0.5),
            sample_dt: T::c(0.25),
            substep: T::c(0.01),
        }
    }

    /// Lorenz attractor at the canonical chaotic parameters.
    pub fn lorenz() -> Self {
        System::Lorenz {
            sigma: T::c(10.0),
            rho: T::c(28.0),
            beta: T::c(8.0 / 3.0),
            sample_dt: T::c(0.01),
            substep: T::c(0.01),
        }
    }

    /// Rossler attractor at the canonical chaotic parameters.
    pub fn rossler() -> Self {
        System::Rossler {
            a: T::c(0.2),
            b: T::c(0.2),
            c: T::c(5.7),
            sample_dt: T::c(0.05),
            substep: T::c(0.05),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            System::FixedPointMap { .. } | System::FitzHughNagumo { .. } | System::Duffing { .. } => 2,
            System::LinearMap { matrix } => matrix.rows(),
            System::Lorenz { .. } | System::Rossler { .. } => 3,
        }
    }

    /// Time between recorded samples.
    pub fn sample_dt(&self) -> T {
        match self {
            System::FixedPointMap { .. } | System::LinearMap { .. } => T::one(),
            System::FitzHughNagumo { sample_dt, .. }
            | System::Duffing { sample_dt, .. }
            | System::Lorenz { sample_dt, .. }
            | System::Rossler { sample_dt, .. } => *sample_dt,
        }
    }

    fn rhs(&self, x: &[T]) -> Vec<T> {
        match self {
            System::FitzHughNagumo { a, b, c, i_ext, .. } => {
                // Limit-cycle form: the cubic damps large |x1|.
                let v = x[0];
                let w = x[1];
                vec![
                    v - v * v * v / T::c(3.0) - w + *i_ext,
                    *c * (v - *b * w + *a),
                ]
            }
            System::Duffing { alpha, beta, delta, .. } => {
                let pos = x[0];
                let vel = x[1];
                vec![vel, -*delta * vel - pos * (*beta + *alpha * pos * pos)]
            }
            System::Lorenz { sigma, rho, beta, .. } => {
                let (x0, y, z) = (x[0], x[1], x[2]);
                vec![*sigma * (y - x0), x0 * (*rho - z) - y, x0 * y - *beta * z]
            }
            System::Rossler { a, b, c, .. } => {
                let (x0, y, z) = (x[0], x[1], x[2]);
                vec![-y - z, x0 + *a * y, *b + z * (x0 - *c)]
            }
            System::FixedPointMap { .. } | System::LinearMap { .. } => {
                unreachable!("discrete maps have no vector field")
            }
        }
    }

    /// Advance one sample interval.
    fn step(&self, x: &[T]) -> Result<Vec<T>> {
        match self {
            System::FixedPointMap { lambda, mu } => Ok(step_fixed_point(x, *lambda, *mu)),
            System::LinearMap { matrix } => Ok(matrix.matvec(x)),
            System::FitzHughNagumo { sample_dt, substep, .. }
            | System::Duffing { sample_dt, substep, .. }
            | System::Lorenz { sample_dt, substep, .. }
            | System::Rossler { sample_dt, substep, .. } => {
                let ratio = (*sample_dt / *substep).round();
                let count = ratio.to_usize().filter(|&c| c >= 1).ok_or_else(|| {
                    SimError::BadSpec {
                        reason: format!(
                            "sample_dt {sample_dt} not a positive multiple of substep {substep}"
                        ),
                    }
                })?;
                let h = *sample_dt / ratio;
                let mut cur = x.to_vec();
                for _ in 0..count {
                    cur = rk4_step(|s| self.rhs(s), &cur, h)?;
                }
                Ok(cur)
            }
        }
    }
}

/// The polynomial fixed-point map: (lambda x1, mu x2 + (lambda^2 - mu) x1^2).
pub fn step_fixed_point<T: Scalar>(x: &[T], lambda: T, mu: T) -> Vec<T> {
    vec![
        lambda * x[0],
        mu * x[1] + (lambda * lambda - mu) * x[0] * x[0],
    ]
}

/// One classical 4th-order Runge–Kutta update for an autonomous field.
pub fn rk4_step<T: Scalar>(rhs: impl Fn(&[T]) -> Vec<T>, x: &[T], dt: T) -> Result<Vec<T>> {
    let half = dt / T::c(2.0);
    let k1 = rhs(x);
    let x2: Vec<T> = x.iter().zip(&k1).map(|(&a, &k)| a + half * k).collect();
    let k2 = rhs(&x2);
    let x3: Vec<T> = x.iter().zip(&k2).map(|(&a, &k)| a + half * k).collect();
    let k3 = rhs(&x3);
    let x4: Vec<T> = x.iter().zip(&k3).map(|(&a, &k)| a + dt * k).collect();
    let k4 = rhs(&x4);
    let sixth = dt / T::c(6.0);
    let out: Vec<T> = (0..x.len())
        .map(|i| x[i] + sixth * (k1[i] + T::c(2.0) * (k2[i] + k3[i]) + k4[i]))
        .collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(SimError::NonFiniteDerivative);
    }
    Ok(out)
}

/// System plus the observation protocol: which components are measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec<T> {
    pub system: System<T>,
    /// Indices of measured components; empty means "all".
    #[serde(default)]
    pub observed: Vec<usize>,
}

impl<T: Scalar> SystemSpec<T> {
    pub fn new(system: System<T>) -> Self {
        Self {
            system,
            observed: Vec::new(),
        }
    }

    pub fn observe(mut self, components: Vec<usize>) -> Self {
        self.observed = components;
        self
    }

    pub fn observed_indices(&self) -> Vec<usize> {
        if self.observed.is_empty() {
            (0..self.system.dim()).collect()
        } else {
            self.observed.clone()
        }
    }
}

/// Simulated sequence: clean full states plus (possibly noisy, possibly
/// partial) observations, with everything needed to regenerate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub spec: SystemSpec<T>,
    pub x0: Vec<T>,
    pub seed: u64,
    pub noise_sigma: T,
    pub discard: usize,
    pub dt: T,
    pub states: Vec<Vec<T>>,
    pub observations: Vec<Vec<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Observations as a time series (what a measurement device sees).
    pub fn observation_series(&self) -> TimeSeries<T> {
        TimeSeries::new(self.observations.clone(), self.dt).expect("trajectory is well-formed")
    }

    /// Clean full states as a time series.
    pub fn state_series(&self) -> TimeSeries<T> {
        TimeSeries::new(self.states.clone(), self.dt).expect("trajectory is well-formed")
    }

    /// CSV of the observed components (with noise, when configured).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::series::save_series_csv(path, &[self.observation_series()])?;
        Ok(())
    }

    /// JSON manifest sufficient to regenerate this trajectory bit-exactly.
    pub fn manifest(&self) -> SimManifest<T> {
        SimManifest {
            spec: self.spec.clone(),
            x0: self.x0.clone(),
            steps: self.states.len(),
            seed: self.seed,
            noise_sigma: self.noise_sigma,
            discard: self.discard,
        }
    }

    pub fn write_manifest(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.manifest()).expect("manifest serializes");
        std::fs::write(path, text).map_err(|source| SimError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Everything `simulate` needs, as stored next to exported trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimManifest<T> {
    pub spec: SystemSpec<T>,
    pub x0: Vec<T>,
    pub steps: usize,
    pub seed: u64,
    pub noise_sigma: T,
    pub discard: usize,
}

impl<T: Scalar> SimManifest<T> {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| SimError::BadManifest {
            reason: e.to_string(),
        })
    }

    pub fn regenerate(&self) -> Result<Trajectory<T>> {
        simulate(
            &self.spec,
            &self.x0,
            self.steps,
            self.seed,
            self.noise_sigma,
            self.discard,
        )
    }
}

/// Deterministic simulation: `discard` burn-in samples, then `steps`
/// recorded samples. Observation noise is i.i.d. Gaussian per observed
/// component, drawn from the seed, added to the observations only.
pub fn simulate<T: Scalar>(
    spec: &SystemSpec<T>,
    x0: &[T],
    steps: usize,
    seed: u64,
    noise_sigma: T,
    discard: usize,
) -> Result<Trajectory<T>> {
    if steps == 0 {
        return Err(SimError::NoSteps);
    }
    let dim = spec.system.dim();
    if x0.len() != dim {
        return Err(SimError::DimMismatch {
            expected: dim,
            found: x0.len(),
        });
    }
    let observed = spec.observed_indices();
    for &i in &observed {
        if i >= dim {
            return Err(SimError::BadObserved { index: i, dim });
        }
    }

    let mut x = x0.to_vec();
    for step in 0..discard {
        x = spec
            .system
            .step(&x)
            .map_err(|_| SimError::Diverged { step })?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SimError::Diverged { step });
        }
    }
    let mut states = Vec::with_capacity(steps);
    states.push(x.clone());
    for step in 1..steps {
        x = spec
            .system
            .step(&x)
            .map_err(|_| SimError::Diverged { step: discard + step })?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SimError::Diverged {
                step: discard + step,
            });
        }
        states.push(x.clone());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let observations: Vec<Vec<T>> = states
        .iter()
        .map(|s| {
            observed
                .iter()
                .map(|&i| {
                    if noise_sigma > T::zero() {
                        s[i] + noise_sigma * T::standard_normal(&mut rng)
                    } else {
                        s[i]
                    }
                })
                .collect()
        })
        .collect();

    Ok(Trajectory {
        spec: spec.clone(),
        x0: x0.to_vec(),
        seed,
        noise_sigma,
        discard,
        dt: spec.system.sample_dt(),
        states,
        observations,
    })
}

/// Which attractor of the unforced Duffing system a state belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasinLabel {
    PlusOne,
    MinusOne,
}

/// Ground-truth basin label by long integration until the state settles
/// within 1e-3 of one attractor. Points that never settle (the saddle's
/// stable manifold, numerically) produce an error.
pub fn duffing_basin_label<T: Scalar>(system: &System<T>, x0: &[T]) -> Result<BasinLabel> {
    let tol = T::c(1e-3);
    let budget = 4000usize;
    let mut x = x0.to_vec();
    for _ in 0..budget {
        let d_plus = ((x[0] - T::one()) * (x[0] - T::one()) + x[1] * x[1]).sqrt();
        if d_plus < tol {
            return Ok(BasinLabel::PlusOne);
        }
        let d_minus = ((x[0] + T::one()) * (x[0] + T::one()) + x[1] * x[1]).sqrt();
        if d_minus < tol {
            return Ok(BasinLabel::MinusOne);
        }
        x = system.step(&x)?;
    }
    Err(SimError::BasinUndecided { steps: budget })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_point_origin_is_fixed() {
        assert_eq!(step_fixed_point(&[0.0, 0.0], 0.9, 0.5), vec![0.0, 0.0]);
    }

    #[test]
    fn fixed_point_hand_value() {
        // (lambda^2 - mu) * 1 = 0.81 - 0.5 = 0.31.
        let next = step_fixed_point(&[1.0_f64, 0.0], 0.9, 0.5);
        assert!((next[0] - 0.9).abs() < 1e-15);
        assert!((next[1] - 0.31).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_eigenfunction_identity() {
        // phi(x) = x2 - x1^2 satisfies phi(f(x)) = mu phi(x).
        let (lambda, mu) = (0.9_f64, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            use rand::Rng;
            let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let fx = step_fixed_point(&x, lambda, mu);
            let phi = x[1] - x[0] * x[0];
            let phi_next = fx[1] - fx[0] * fx[0];
            assert!(
                (phi_next - mu * phi).abs() < 1e-12 * (1.0 + phi.abs()),
                "{phi_next} vs {}",
                mu * phi
            );
        }
    }

    #[test]
    fn rk4_zero_field_is_identity() {
        let x = rk4_step(|_| vec![0.0_f64, 0.0], &[1.5, -2.0], 0.3).unwrap();
        assert_eq!(x, vec![1.5, -2.0]);
    }

    #[test]
    fn rk4_exponential_decay_polynomial() {
        // For xdot = -x the RK4 step is the degree-4 Taylor polynomial of
        // exp(-dt): 1 - 0.1 + 0.005 - 1/6000 + 1/240000 = 0.9048375.
        let x = rk4_step(|s: &[f64]| vec![-s[0]], &[1.0], 0.1).unwrap();
        assert!((x[0] - 0.9048375).abs() < 1e-12, "{}", x[0]);
    }

    #[test]
    fn rk4_harmonic_oscillator_period() {
        let dt = 2.0 * std::f64::consts::PI / 10_000.0;
        let mut x = vec![1.0, 0.0];
        for _ in 0..10_000 {
            x = rk4_step(|s| vec![s[1], -s[0]], &x, dt).unwrap();
        }
        assert!((x[0] - 1.0).abs() < 1e-6, "x after one period: {}", x[0]);
        assert!(x[1].abs() < 1e-6);
    }

    #[test]
    fn rk4_order_check_on_fhn() {
        // One-step error against a fine reference shrinks ~2^4 when halving.
        let sys = System::<f64>::fhn();
        let x0 = vec![0.5, 0.2];
        let step_with = |h: f64, n: usize| -> Vec<f64> {
            let mut x = x0.clone();
            for _ in 0..n {
                x = rk4_step(|s| sys.rhs(s), &x, h).unwrap();
            }
            x
        };
        let reference = step_with(0.4 / 40.0, 40);
        let coarse = step_with(0.4, 1);
        let fine = step_with(0.2, 2);
        let err = |a: &[f64]| -> f64 {
            a.iter()
                .zip(&reference)
                .map(|(x, r)| (x - r).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let ratio = err(&coarse) / err(&fine);
        assert!(
            (12.0..=20.0).contains(&ratio),
            "error ratio {ratio} outside [12, 20]"
        );
    }

    #[test]
    fn fixed_point_map_decays_to_origin() {
        let spec = SystemSpec::new(System::fixed_point(0.9_f64, 0.5));
        let traj = simulate(&spec, &[1.0, 1.0], 200, 0, 0.0, 0).unwrap();
        let norms: Vec<f64> = traj
            .states
            .iter()
            .map(|s| (s[0] * s[0] + s[1] * s[1]).sqrt())
            .collect();
        // Monotone after a short transient, ending near zero.
        for w in norms[5..].windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(norms.last().unwrap() < &1e-8);
    }

    #[test]
    fn fhn_limit_cycle_is_periodic() {
        let spec = SystemSpec::new(System::<f64>::fhn());
        let traj = simulate(&spec, &[0.0, 0.0], 400, 0, 0.0, 1000).unwrap();
        // Some later state must revisit the initial recorded state closely.
        let first = &traj.states[0];
        let mut best = f64::INFINITY;
        let mut best_t = 0;
        for (t, s) in traj.states.iter().enumerate().skip(20) {
            let d = ((s[0] - first[0]).powi(2) + (s[1] - first[1]).powi(2)).sqrt();
            if d < best {
                best = d;
                best_t = t;
            }
        }
        assert!(
            best < 1e-2,
            "no revisit: nearest return {best} at step {best_t}"
        );
        // And the trajectory is not a fixed point.
        let spread: f64 = traj
            .states
            .iter()
            .map(|s| (s[0] - first[0]).abs())
            .fold(0.0, f64::max);
        assert!(spread > 0.5, "trajectory collapsed, spread {spread}");
    }

    #[test]
    fn duffing_settles_into_either_well() {
        let spec = SystemSpec::new(System::<f64>::duffing());
        for (x0, expect) in [
            (vec![1.4, 0.0], 1.0),
            (vec![-1.4, 0.0], -1.0),
        ] {
            let traj = simulate(&spec, &x0, 400, 0, 0.0, 0).unwrap();
            let last = traj.states.last().unwrap();
            assert!(
                (last[0] - expect).abs() < 1e-3 && last[1].abs() < 1e-3,
                "from {x0:?}: ended at {last:?}"
            );
        }
    }

    #[test]
    fn basin_labels_at_attractors() {
        let sys = System::<f64>::duffing();
        assert_eq!(
            duffing_basin_label(&sys, &[1.0, 0.0]).unwrap(),
            BasinLabel::PlusOne
        );
        assert_eq!(
            duffing_basin_label(&sys, &[-1.0, 0.0]).unwrap(),
            BasinLabel::MinusOne
        );
    }

    #[test]
    fn basin_grid_has_two_connected_regions() {
        // Brute-force labels over a coarse grid: both basins appear, and
        // each label set is 8-connected (the spiral interleaving pattern).
        let sys = System::<f64>::duffing();
        let n = 15;
        let mut labels = vec![vec![None; n]; n];
        for (i, row) in labels.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let x = -2.0 + 4.0 * (i as f64) / (n - 1) as f64;
                let y = -2.0 + 4.0 * (j as f64) / (n - 1) as f64;
                *cell = duffing_basin_label(&sys, &[x, y]).ok();
            }
        }
        for target in [BasinLabel::PlusOne, BasinLabel::MinusOne] {
            let cells: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .filter(|&(i, j)| labels[i][j] == Some(target))
                .collect();
            assert!(!cells.is_empty(), "{target:?} basin missing from grid");
            // Flood fill from the first cell.
            let mut seen = vec![vec![false; n]; n];
            let mut stack = vec![cells[0]];
            seen[cells[0].0][cells[0].1] = true;
            let mut count = 1;
            while let Some((i, j)) = stack.pop() {
                for di in -1i32..=1 {
                    for dj in -1i32..=1 {
                        let (ni, nj) = (i as i32 + di, j as i32 + dj);
                        if ni < 0 || nj < 0 || ni >= n as i32 || nj >= n as i32 {
                            continue;
                        }
                        let (ni, nj) = (ni as usize, nj as usize);
                        if !seen[ni][nj] && labels[ni][nj] == Some(target) {
                            seen[ni][nj] = true;
                            count += 1;
                            stack.push((ni, nj));
                        }
                    }
                }
            }
            assert_eq!(
                count,
                cells.len(),
                "{target:?} basin split into several components"
            );
        }
    }

    #[test]
    fn simulation_is_bitwise_deterministic() {
        let spec = SystemSpec::new(System::<f64>::lorenz()).observe(vec![0]);
        let a = simulate(&spec, &[1.0, 1.0, 1.0], 500, 7, 0.1, 100).unwrap();
        let b = simulate(&spec, &[1.0, 1.0, 1.0], 500, 7, 0.1, 100).unwrap();
        assert_eq!(a, b);
        let c = simulate(&spec, &[1.0, 1.0, 1.0], 500, 8, 0.1, 100).unwrap();
        assert_eq!(a.states, c.states, "noise seed must not affect states");
        assert_ne!(a.observations, c.observations);
    }

    #[test]
    fn noise_statistics_match_sigma() {
        let spec = SystemSpec::new(System::fixed_point(0.0, 0.0));
        let traj = simulate(&spec, &[0.0, 0.0], 50_000, 3, 0.1, 0).unwrap();
        let samples: Vec<f64> = traj.observations.iter().flatten().copied().collect();
        assert_eq!(samples.len(), 100_000);
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>()
            / (samples.len() - 1) as f64;
        let sigma = var.sqrt();
        assert!((sigma - 0.1).abs() / 0.1 < 0.02, "sigma {sigma}");
    }

    #[test]
    fn chaotic_attractors_stay_bounded() {
        for (spec, x0) in [
            (SystemSpec::new(System::<f64>::lorenz()), vec![1.0, 1.0, 1.0]),
            (SystemSpec::new(System::<f64>::rossler()), vec![1.0, 1.0, 1.0]),
        ] {
            let traj = simulate(&spec, &x0, 25_000, 0, 0.0, 100).unwrap();
            let max_norm = traj
                .states
                .iter()
                .map(|s| s.iter().map(|v| v * v).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            assert!(max_norm < 1e3, "{spec:?} escaped to {max_norm}");
        }
    }

    #[test]
    fn manifest_roundtrip_regenerates_bit_exactly() {
        let spec = SystemSpec::new(System::<f64>::rossler()).observe(vec![0]);
        let traj = simulate(&spec, &[0.5, -0.5, 0.1], 200, 11, 0.05, 50).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mpath = dir.path().join("manifest.json");
        traj.write_manifest(&mpath).unwrap();
        let again = SimManifest::<f64>::load(&mpath).unwrap().regenerate().unwrap();
        assert_eq!(traj, again);
    }

    #[test]
    fn csv_export_has_observed_subset() {
        let spec = SystemSpec::new(System::<f64>::lorenz()).observe(vec![0]);
        let traj = simulate(&spec, &[1.0, 1.0, 1.0], 50, 0, 0.0, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cpath = dir.path().join("series.csv");
        traj.write_csv(&cpath).unwrap();
        let eps = crate::series::load_series_csv::<f64>(&cpath, None).unwrap();
        assert_eq!(eps.len(), 1);
        assert_eq!(eps[0].dim(), 1);
        assert_eq!(eps[0].len(), 50);
        assert_eq!(eps[0].values()[7][0], traj.states[7][0]);
    }
}
