//! Uniformly sampled multivariate time series, episode handling, and the
//! CSV interchange format. Files carry a `t` column (or the sample interval
//! comes from a flag), optional `episode` column, and one column per
//! measured component; blank lines also separate episodes.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: cannot parse '{text}' as a number")]
    BadNumber { line: u64, text: String },
    #[error("no sample interval: pass one explicitly or include a 't' column")]
    MissingDt,
    #[error("non-constant sampling interval near line {line}: {got} vs {expected}")]
    NonUniformT { line: u64, got: f64, expected: f64 },
    #[error("file has no data rows")]
    EmptyFile,
    #[error("file has no measurement columns")]
    NoComponents,
    #[error("series must have dt > 0, got {dt}")]
    BadDt { dt: f64 },
    #[error("episode {episode} is empty")]
    EmptyEpisode { episode: usize },
    #[error("ragged sample width in episode {episode}: {found} vs {expected}")]
    RaggedSamples {
        episode: usize,
        expected: usize,
        found: usize,
    },
}

pub type Result<V> = std::result::Result<V, SeriesError>;

/// A uniformly sampled measurement sequence `y_t` with sample interval dt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries<T> {
    values: Vec<Vec<T>>,
    dt: T,
}

impl<T: Scalar> TimeSeries<T> {
    pub fn new(values: Vec<Vec<T>>, dt: T) -> Result<Self> {
        if dt <= T::zero() || !dt.is_finite() {
            return Err(SeriesError::BadDt { dt: dt.f64() });
        }
        if values.is_empty() {
            return Err(SeriesError::EmptyEpisode { episode: 0 });
        }
        let dim = values[0].len();
        if dim == 0 {
            return Err(SeriesError::NoComponents);
        }
        if let Some(bad) = values.iter().position(|v| v.len() != dim) {
            return Err(SeriesError::RaggedSamples {
                episode: 0,
                expected: dim,
                found: values[bad].len(),
            });
        }
        Ok(Self { values, dt })
    }

    /// Number of samples (the spec's m + 1).
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Measurement dimension r.
    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn values(&self) -> &[Vec<T>] {
        &self.values
    }

    pub fn sample(&self, t: usize) -> &[T] {
        &self.values[t]
    }

    /// Single component as a new univariate series.
    pub fn component(&self, index: usize) -> Self {
        Self {
            values: self.values.iter().map(|v| vec![v[index]]).collect(),
            dt: self.dt,
        }
    }

    /// Consecutive sample range `[start, end)` as a new series.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            values: self.values[start..end].to_vec(),
            dt: self.dt,
        }
    }
}

/// Load a CSV file into episodes. Column `t` (if present) determines the
/// sample interval unless `dt` is given; column `episode` (or blank lines)
/// splits episodes; all remaining columns are measurement components.
pub fn load_series_csv<T: Scalar>(path: &Path, dt: Option<T>) -> Result<Vec<TimeSeries<T>>> {
    let file = std::fs::File::open(path).map_err(|source| SeriesError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);

    let headers = reader.headers()?.clone();
    let mut t_col = None;
    let mut ep_col = None;
    let mut comp_cols = Vec::new();
    for (i, name) in headers.iter().enumerate() {
        match name.trim() {
            "t" => t_col = Some(i),
            "episode" => ep_col = Some(i),
            _ => comp_cols.push(i),
        }
    }
    if comp_cols.is_empty() {
        return Err(SeriesError::NoComponents);
    }

    let mut episodes: Vec<Vec<Vec<T>>> = Vec::new();
    let mut current: Vec<Vec<T>> = Vec::new();
    let mut current_ep_id: Option<String> = None;
    let mut inferred_dt: Option<f64> = None;
    let mut last_t: Option<f64> = None;

    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|f| f.trim().is_empty()) {
            // Blank line: episode separator.
            if !current.is_empty() {
                episodes.push(std::mem::take(&mut current));
                last_t = None;
            }
            continue;
        }
        if record.len() != headers.len() {
            return Err(SeriesError::RaggedRow {
                line,
                expected: headers.len(),
                found: record.len(),
            });
        }
        let parse = |idx: usize| -> Result<f64> {
            let text = record.get(idx).unwrap_or("").trim();
            text.parse::<f64>().map_err(|_| SeriesError::BadNumber {
                line,
                text: text.to_string(),
            })
        };

        if let Some(ep) = ep_col {
            let id = record.get(ep).unwrap_or("").trim().to_string();
            if current_ep_id.as_deref() != Some(id.as_str()) {
                if !current.is_empty() {
                    episodes.push(std::mem::take(&mut current));
                    last_t = None;
                }
                current_ep_id = Some(id);
            }
        }

        if let Some(tc) = t_col {
            let t_val = parse(tc)?;
            if let Some(prev) = last_t {
                let step = t_val - prev;
                match inferred_dt {
                    None => inferred_dt = Some(step),
                    Some(d) => {
                        if (step - d).abs() > 1e-9 * d.abs().max(1.0) {
                            return Err(SeriesError::NonUniformT {
                                line,
                                got: step,
                                expected: d,
                            });
                        }
                    }
                }
            }
            last_t = Some(t_val);
        }

        let mut row = Vec::with_capacity(comp_cols.len());
        for &c in &comp_cols {
            row.push(T::c(parse(c)?));
        }
        current.push(row);
    }
    if !current.is_empty() {
        episodes.push(current);
    }
    if episodes.is_empty() {
        return Err(SeriesError::EmptyFile);
    }

    let dt = match (dt, inferred_dt) {
        (Some(d), _) => d,
        (None, Some(d)) if d > 0.0 => T::c(d),
        _ => return Err(SeriesError::MissingDt),
    };

    episodes
        .into_iter()
        .map(|values| TimeSeries::new(values, dt))
        .collect()
}

/// Write episodes to CSV with `t`, optional `episode`, and `x1..xr` columns.
pub fn save_series_csv<T: Scalar>(path: &Path, episodes: &[TimeSeries<T>]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| SeriesError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut writer = csv::Writer::from_writer(file);
    let dim = episodes.first().map_or(0, |e| e.dim());
    let multi = episodes.len() > 1;
    let mut header = vec!["t".to_string()];
    if multi {
        header.push("episode".to_string());
    }
    for i in 1..=dim {
        header.push(format!("x{i}"));
    }
    writer.write_record(&header)?;
    for (e, episode) in episodes.iter().enumerate() {
        for (t, row) in episode.values().iter().enumerate() {
            let mut record = vec![format!("{}", T::from_usize(t).unwrap() * episode.dt())];
            if multi {
                record.push(e.to_string());
            }
            for v in row {
                record.push(format!("{v}"));
            }
            writer.write_record(&record)?;
        }
    }
    writer.flush().map_err(|source| SeriesError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}
