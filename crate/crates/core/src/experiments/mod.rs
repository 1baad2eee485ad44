//! Experiment orchestration: each benchmark from the evaluation suite runs
//! as a recipe (simulate/load, train, decompose, measure) that emits
//! plot-ready CSV artifacts plus a metric report, reproducible from its
//! manifest.

mod basins;
mod detect;
mod runners;

pub use basins::{basin_map, BasinMapOutcome, BasinPoint};
pub use detect::{label_amplitude_collapses, synthetic_collapse};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{Hyper, TrainConfig};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {reason}")]
    Config { reason: String },
    #[error("stage '{stage}' failed: {message}")]
    Stage { stage: String, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<V> = std::result::Result<V, HarnessError>;

/// Attach a stage name to any failing step.
pub(crate) fn stage<V, E: std::fmt::Display>(
    name: &str,
    result: std::result::Result<V, E>,
) -> Result<V> {
    result.map_err(|e| HarnessError::Stage {
        stage: name.to_string(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    EigRecovery,
    LimitCycleSpectrum,
    Basins,
    Prediction,
    Detection,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::EigRecovery => "eig-recovery",
            ExperimentKind::LimitCycleSpectrum => "limit-cycle-spectrum",
            ExperimentKind::Basins => "basins",
            ExperimentKind::Prediction => "prediction",
            ExperimentKind::Detection => "detection",
        }
    }
}

/// Data source: a named benchmark system or a CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    /// One of fixed-point | fhn | duffing | lorenz | rossler.
    pub system: Option<String>,
    /// CSV path (excludes `system`).
    pub csv: Option<String>,
    /// Sample interval for CSV files without a `t` column.
    pub dt: Option<f64>,
    /// Samples per trajectory (after burn-in).
    pub steps: usize,
    /// Burn-in samples to discard.
    pub discard: usize,
    /// Observation noise level.
    pub noise_sigma: f64,
    /// Episode count (> 1 samples seeded initial conditions).
    pub episodes: usize,
    /// Samples per episode when episodes > 1.
    pub episode_len: usize,
    /// Observed component indices (empty = all).
    pub observed: Vec<usize>,
    /// Initial condition (defaults per system).
    pub x0: Option<Vec<f64>>,
    /// Fixed-point map parameters.
    pub lambda: f64,
    pub mu: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            system: None,
            csv: None,
            dt: None,
            steps: 1000,
            discard: 0,
            noise_sigma: 0.0,
            episodes: 1,
            episode_len: 0,
            observed: Vec::new(),
            x0: None,
            lambda: 0.9,
            mu: 0.5,
        }
    }
}

/// Train/validation/test split fractions over the sample axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train: 0.4,
            validation: 0.2,
            test: 0.4,
        }
    }
}

/// Full experiment description; serializes to the declarative config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default = "default_hyper")]
    pub model: Hyper<f64>,
    #[serde(default)]
    pub train: TrainConfig<f64>,
    #[serde(default)]
    pub split: SplitConfig,
    /// Prediction horizon.
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Delay of the linear Hankel baseline.
    #[serde(default = "default_hankel_delay")]
    pub hankel_delay: usize,
    /// Monomial dictionary for the extended baseline, e.g. "x1,x2,x1^2".
    #[serde(default)]
    pub dictionary: Option<String>,
    /// Basin grid resolution per axis.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Steps of slack when matching detections to events.
    #[serde(default = "default_tolerance_window")]
    pub tolerance_window: usize,
}

fn default_hyper() -> Hyper<f64> {
    Hyper::new(3, 4, 4)
}

fn default_horizon() -> usize {
    30
}

fn default_hankel_delay() -> usize {
    2
}

fn default_grid() -> usize {
    25
}

fn default_tolerance_window() -> usize {
    5
}

impl ExperimentConfig {
    /// Baseline config for a kind, with the benchmark defaults filled in.
    pub fn default_for(kind: ExperimentKind, output_dir: impl Into<PathBuf>) -> Self {
        let mut cfg = Self {
            kind,
            output_dir: output_dir.into(),
            seed: 0,
            data: DataConfig::default(),
            model: default_hyper(),
            train: TrainConfig::default(),
            split: SplitConfig::default(),
            horizon: default_horizon(),
            hankel_delay: default_hankel_delay(),
            dictionary: None,
            grid: default_grid(),
            tolerance_window: default_tolerance_window(),
        };
        match kind {
            ExperimentKind::EigRecovery => {
                cfg.data.system = Some("fixed-point".into());
                cfg.data.steps = 1000;
                cfg.data.episodes = 40;
                cfg.data.episode_len = 25;
                cfg.dictionary = Some("x1,x2,x1^2".into());
                cfg.model = Hyper::new(3, 4, 4).with_alpha(1.0);
                cfg.train = TrainConfig {
                    batch_size: 200,
                    max_epochs: 400,
                    learning_rate: 2e-3,
                    validation_fraction: 0.1,
                    patience: 0,
                    monitor_full_batch: true,
                    ..TrainConfig::default()
                };
                cfg.hankel_delay = 2;
            }
            ExperimentKind::LimitCycleSpectrum => {
                cfg.data.system = Some("fhn".into());
                cfg.data.steps = 2000;
                cfg.data.discard = 1000;
                cfg.model = Hyper::new(8, 4, 16).with_alpha(1.0);
                cfg.train = TrainConfig {
                    batch_size: 200,
                    max_epochs: 300,
                    learning_rate: 2e-3,
                    validation_fraction: 0.1,
                    monitor_full_batch: true,
                    ..TrainConfig::default()
                };
                cfg.hankel_delay = 8;
            }
            ExperimentKind::Basins => {
                cfg.data.system = Some("duffing".into());
                cfg.data.episodes = 200;
                cfg.data.episode_len = 60;
                cfg.model = Hyper::new(4, 4, 20).with_alpha(1.0);
                cfg.train = TrainConfig {
                    batch_size: 400,
                    max_epochs: 60,
                    learning_rate: 2e-3,
                    validation_fraction: 0.1,
                    monitor_full_batch: false,
                    ..TrainConfig::default()
                };
            }
            ExperimentKind::Prediction => {
                cfg.data.system = Some("lorenz".into());
                cfg.data.steps = 5000;
                cfg.data.discard = 1000;
                cfg.data.observed = vec![0];
                cfg.model = Hyper::new(10, 6, 12).with_alpha(1.0);
                cfg.train = TrainConfig {
                    batch_size: 256,
                    max_epochs: 120,
                    learning_rate: 2e-3,
                    validation_fraction: 0.1,
                    monitor_full_batch: false,
                    ..TrainConfig::default()
                };
                cfg.hankel_delay = 10;
            }
            ExperimentKind::Detection => {
                cfg.data.steps = 4000;
                cfg.model = Hyper::new(8, 6, 10).with_alpha(1.0);
                cfg.train = TrainConfig {
                    batch_size: 256,
                    max_epochs: 120,
                    learning_rate: 2e-3,
                    validation_fraction: 0.1,
                    monitor_full_batch: false,
                    ..TrainConfig::default()
                };
            }
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let err = |reason: String| Err(HarnessError::Config { reason });
        if self.data.system.is_some() && self.data.csv.is_some() {
            return err("data.system and data.csv are mutually exclusive".into());
        }
        if let Some(csv) = &self.data.csv {
            if !Path::new(csv).exists() {
                return err(format!("csv path '{csv}' does not exist"));
            }
        }
        let s = self.split;
        if s.train + s.validation + s.test > 1.0 + 1e-9 {
            return err(format!(
                "split fractions sum to {} > 1",
                s.train + s.validation + s.test
            ));
        }
        if s.train <= 0.0 {
            return err("split.train must be positive".into());
        }
        if self.kind == ExperimentKind::Basins && self.grid < 20 {
            return err(format!("basin grid {} below the minimum of 20", self.grid));
        }
        if matches!(self.kind, ExperimentKind::Prediction) && self.horizon == 0 {
            return err("horizon must be at least 1".into());
        }
        if let Some(sys) = &self.data.system {
            if runners::parse_system(sys, &self.data).is_none() {
                return err(format!("unknown system '{sys}'"));
            }
        }
        Ok(())
    }

    /// Stable hash of the full configuration.
    pub fn config_hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().fold(String::new(), |mut acc, b| {
            use std::fmt::Write;
            let _ = write!(acc, "{b:02x}");
            acc
        })
    }
}

/// Named scalar metrics plus reproducibility metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub experiment: String,
    pub metrics: BTreeMap<String, f64>,
    pub metadata: ReportMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub seed: u64,
    pub config_hash: String,
    pub library_version: String,
    pub created_unix_ms: u128,
}

impl MetricReport {
    pub(crate) fn new(config: &ExperimentConfig) -> Self {
        Self {
            experiment: config.kind.name().to_string(),
            metrics: BTreeMap::new(),
            metadata: ReportMeta {
                seed: config.seed,
                config_hash: config.config_hash(),
                library_version: env!("CARGO_PKG_VERSION").to_string(),
                created_unix_ms: std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_millis())
                    .unwrap_or(0),
            },
        }
    }

    pub(crate) fn set(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }
}

/// Execute an experiment end-to-end and write artifacts under
/// `config.output_dir`: a manifest, the metric report, and per-kind CSVs.
pub fn run(config: &ExperimentConfig) -> Result<MetricReport> {
    config.validate()?;
    std::fs::create_dir_all(&config.output_dir).map_err(|source| HarnessError::Io {
        path: config.output_dir.display().to_string(),
        source,
    })?;
    write_json(
        &config.output_dir.join("manifest.json"),
        &Manifest {
            config: config.clone(),
            config_hash: config.config_hash(),
            library_version: env!("CARGO_PKG_VERSION").to_string(),
        },
    )?;

    let mut report = MetricReport::new(config);
    match config.kind {
        ExperimentKind::EigRecovery => runners::eig_recovery(config, &mut report)?,
        ExperimentKind::LimitCycleSpectrum => runners::limit_cycle_spectrum(config, &mut report)?,
        ExperimentKind::Basins => runners::basins(config, &mut report)?,
        ExperimentKind::Prediction => runners::prediction(config, &mut report)?,
        ExperimentKind::Detection => runners::detection(config, &mut report)?,
    }
    write_json(&config.output_dir.join("report.json"), &report)?;
    Ok(report)
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    config: ExperimentConfig,
    config_hash: String,
    library_version: String,
}

pub(crate) fn write_json<V: Serialize>(path: &Path, value: &V) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("artifact serializes");
    std::fs::write(path, text).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}
