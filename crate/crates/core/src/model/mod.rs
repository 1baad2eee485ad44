//! The learning objective and training loop: linear delay embedder, RSS loss
//! with the exact analytic gradient through the least-squares projector,
//! reconstruction loss, combined objective, and mini-batch training with
//! full-batch monitoring.

mod embed;
mod loss;
mod train;

pub use embed::{build_pairs, Embedder, PairIndex};
pub use loss::{rec_loss, rss_loss, rss_loss_grad, total_loss, LossComponents, RssGrad};
pub use train::{train, LossReport, TrainConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, Mat};
use crate::nn::{hidden_sizes, Mlp, NetError};
use crate::scalar::Scalar;
use crate::series::TimeSeries;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch in {op}: expected {expected}, found {found}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },
    #[error("window has {found} samples, embedder expects k = {expected}")]
    WindowLength { expected: usize, found: usize },
    #[error(
        "episode {episode} has {len} samples; delay pairs with k = {k} need at least {min}"
    )]
    SeriesTooShort {
        episode: usize,
        len: usize,
        k: usize,
        min: usize,
    },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("hyperparameter {name} = {value} is invalid: {reason}")]
    BadHyper {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("not enough data: {pairs} pairs available, batch size {batch_size}")]
    NotEnoughData { pairs: usize, batch_size: usize },
    #[error("training diverged at epoch {epoch}, step {step}: non-finite loss")]
    Diverged {
        epoch: usize,
        step: usize,
        report: Box<LossReport>,
    },
    #[error("model document is invalid: {reason}")]
    BadDocument { reason: String },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Net(#[from] NetError),
}

pub type Result<V> = std::result::Result<V, ModelError>;

const MODEL_DOC_VERSION: u32 = 1;

/// Hyperparameters of the learned observable stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper<T> {
    /// Maximum delay of the linear embedder.
    pub k: usize,
    /// Dimension of the reconstructed state.
    pub p: usize,
    /// Dimension of the learned observable vector.
    pub n: usize,
    /// Balance between the regression residual and the reconstruction term.
    pub alpha: T,
    /// Optional L1 penalty on the embedder weight.
    pub l1_phi: T,
    /// Hidden-layer count per MLP.
    pub depth: usize,
}

impl<T: Scalar> Hyper<T> {
    pub fn new(k: usize, p: usize, n: usize) -> Self {
        Self {
            k,
            p,
            n,
            alpha: T::one(),
            l1_phi: T::zero(),
            depth: 1,
        }
    }

    pub fn with_alpha(mut self, alpha: T) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_l1(mut self, l1: T) -> Self {
        self.l1_phi = l1;
        self
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    fn validate(&self) -> Result<()> {
        let check = |name: &'static str, v: usize| -> Result<()> {
            if v == 0 {
                return Err(ModelError::BadHyper {
                    name,
                    value: 0.0,
                    reason: "must be at least 1",
                });
            }
            Ok(())
        };
        check("k", self.k)?;
        check("p", self.p)?;
        check("n", self.n)?;
        if self.alpha < T::zero() || !self.alpha.is_finite() {
            return Err(ModelError::BadHyper {
                name: "alpha",
                value: self.alpha.f64(),
                reason: "must be finite and non-negative",
            });
        }
        if self.l1_phi < T::zero() || !self.l1_phi.is_finite() {
            return Err(ModelError::BadHyper {
                name: "l1_phi",
                value: self.l1_phi.f64(),
                reason: "must be finite and non-negative",
            });
        }
        Ok(())
    }
}

/// Trained triple: linear delay embedder, observable network g, and
/// reconstructor network h, plus the hyperparameters they were built with.
#[derive(Debug, Clone, PartialEq)]
pub struct LkisModel<T> {
    pub embedder: Embedder<T>,
    pub g: Mlp<T>,
    pub h: Mlp<T>,
    pub hyper: Hyper<T>,
    pub delta_t: T,
}

impl<T: Scalar> LkisModel<T> {
    /// Fresh model with seeded initialization. `r` is the measurement
    /// dimension and `delta_t` the sample interval of the training data.
    pub fn new(hyper: Hyper<T>, r: usize, delta_t: T, seed: u64) -> Result<Self> {
        hyper.validate()?;
        if r == 0 {
            return Err(ModelError::BadHyper {
                name: "r",
                value: 0.0,
                reason: "measurement dimension must be at least 1",
            });
        }
        if delta_t <= T::zero() || !delta_t.is_finite() {
            return Err(ModelError::BadHyper {
                name: "delta_t",
                value: delta_t.f64(),
                reason: "must be finite and positive",
            });
        }
        let embedder = Embedder::seeded(hyper.k, r, hyper.p, seed);
        let mut g_sizes = vec![hyper.p];
        g_sizes.extend(hidden_sizes(hyper.p, hyper.n, hyper.depth));
        g_sizes.push(hyper.n);
        let mut h_sizes = vec![hyper.n];
        h_sizes.extend(hidden_sizes(hyper.n, r, hyper.depth));
        h_sizes.push(r);
        Ok(Self {
            embedder,
            g: Mlp::new(&g_sizes, seed.wrapping_add(1))?,
            h: Mlp::new(&h_sizes, seed.wrapping_add(2))?,
            hyper,
            delta_t,
        })
    }

    /// Assemble a model from explicit parts, validating every shape.
    pub fn from_parts(
        embedder: Embedder<T>,
        g: Mlp<T>,
        h: Mlp<T>,
        hyper: Hyper<T>,
        delta_t: T,
    ) -> Result<Self> {
        hyper.validate()?;
        if embedder.k() != hyper.k || embedder.p() != hyper.p {
            return Err(ModelError::ShapeMismatch {
                op: "from_parts",
                expected: format!("embedder with k = {}, p = {}", hyper.k, hyper.p),
                found: format!("k = {}, p = {}", embedder.k(), embedder.p()),
            });
        }
        if g.input_size() != hyper.p || g.output_size() != hyper.n {
            return Err(ModelError::ShapeMismatch {
                op: "from_parts",
                expected: format!("g: {} -> {}", hyper.p, hyper.n),
                found: format!("g: {} -> {}", g.input_size(), g.output_size()),
            });
        }
        if h.input_size() != hyper.n || h.output_size() != embedder.r() {
            return Err(ModelError::ShapeMismatch {
                op: "from_parts",
                expected: format!("h: {} -> {}", hyper.n, embedder.r()),
                found: format!("h: {} -> {}", h.input_size(), h.output_size()),
            });
        }
        Ok(Self {
            embedder,
            g,
            h,
            hyper,
            delta_t,
        })
    }

    pub fn k(&self) -> usize {
        self.embedder.k()
    }

    pub fn r(&self) -> usize {
        self.embedder.r()
    }

    pub fn p(&self) -> usize {
        self.embedder.p()
    }

    pub fn n(&self) -> usize {
        self.hyper.n
    }

    /// Observable values for one embedded point, eval mode.
    pub fn observe_window(&self, window: &[&[T]]) -> Result<Vec<T>> {
        let x = self.embedder.embed(window)?;
        let xm = Mat::from_rows(&[x]);
        let g = self.g.forward_eval(&xm)?;
        Ok(g.row(0).to_vec())
    }

    /// Reconstruct a measurement from observable values, eval mode.
    pub fn reconstruct(&self, observable: &[T]) -> Result<Vec<T>> {
        let gm = Mat::from_rows(&[observable.to_vec()]);
        let y = self.h.forward_eval(&gm)?;
        Ok(y.row(0).to_vec())
    }

    /// Observable matrix (n x embedded points) for one episode, eval mode.
    /// Column j holds g(x~_t) for t = k-1+j.
    pub fn observable_matrix(&self, episode: &TimeSeries<T>) -> Result<Mat<T>> {
        let k = self.k();
        if episode.len() < k {
            return Err(ModelError::SeriesTooShort {
                episode: 0,
                len: episode.len(),
                k,
                min: k,
            });
        }
        let columns: Vec<Vec<T>> = ((k - 1)..episode.len())
            .map(|t| embed::window_vector(episode, t, k))
            .collect();
        let u = Mat::from_rows(&columns);
        let x = u.matmul(&self.embedder.weight().transpose());
        let g = self.g.forward_eval(&x)?;
        Ok(g.transpose())
    }

    /// Per-episode observable matrices.
    pub fn observable_matrices(&self, episodes: &[TimeSeries<T>]) -> Result<Vec<Mat<T>>> {
        episodes
            .iter()
            .map(|ep| self.observable_matrix(ep))
            .collect()
    }

    /// Serialize the whole model (embedder, both networks, hyperparameters)
    /// into one versioned JSON document.
    pub fn to_json(&self) -> String {
        let doc = ModelDoc {
            version: MODEL_DOC_VERSION,
            r: self.r(),
            hyper: self.hyper,
            delta_t: self.delta_t,
            w_phi: self.embedder.weight().clone(),
            g: serde_json::from_str(&self.g.to_json()).expect("g document"),
            h: serde_json::from_str(&self.h.to_json()).expect("h document"),
        };
        serde_json::to_string_pretty(&doc).expect("model document serializes")
    }

    /// Load and re-validate every shape invariant.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc<T> = serde_json::from_str(text).map_err(|e| ModelError::BadDocument {
            reason: e.to_string(),
        })?;
        if doc.version != MODEL_DOC_VERSION {
            return Err(ModelError::BadDocument {
                reason: format!("unsupported version {}", doc.version),
            });
        }
        doc.hyper.validate()?;
        let g = Mlp::from_json(&serde_json::to_string(&doc.g).unwrap())?;
        let h = Mlp::from_json(&serde_json::to_string(&doc.h).unwrap())?;
        let embedder = Embedder::new(doc.w_phi, doc.hyper.k, doc.r)?;
        if embedder.p() != doc.hyper.p {
            return Err(ModelError::BadDocument {
                reason: format!(
                    "embedder rows {} disagree with p = {}",
                    embedder.p(),
                    doc.hyper.p
                ),
            });
        }
        if g.input_size() != doc.hyper.p || g.output_size() != doc.hyper.n {
            return Err(ModelError::BadDocument {
                reason: format!(
                    "g maps {} -> {}, expected {} -> {}",
                    g.input_size(),
                    g.output_size(),
                    doc.hyper.p,
                    doc.hyper.n
                ),
            });
        }
        if h.input_size() != doc.hyper.n || h.output_size() != doc.r {
            return Err(ModelError::BadDocument {
                reason: format!(
                    "h maps {} -> {}, expected {} -> {}",
                    h.input_size(),
                    h.output_size(),
                    doc.hyper.n,
                    doc.r
                ),
            });
        }
        if doc.delta_t <= T::zero() {
            return Err(ModelError::BadDocument {
                reason: "delta_t must be positive".into(),
            });
        }
        Ok(Self {
            embedder,
            g,
            h,
            hyper: doc.hyper,
            delta_t: doc.delta_t,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDoc<T> {
    version: u32,
    r: usize,
    hyper: Hyper<T>,
    delta_t: T,
    w_phi: Mat<T>,
    g: serde_json::Value,
    h: serde_json::Value,
}
