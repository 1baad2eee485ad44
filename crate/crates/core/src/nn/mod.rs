//! Minimal feed-forward machinery: MLPs with parametric ReLU and batch
//! normalization, explicit forward/backward passes, and first-order
//! optimizers. The computation graph is fixed by the training objective, so
//! there is no general autodiff here.

mod mlp;
mod optim;

pub use mlp::{hidden_sizes, Mlp, MlpCache, MlpGrads, NetMode};
pub use optim::{OptKind, OptimizerState};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("layer size list needs at least two entries")]
    TooFewLayers,
    #[error("layer sizes must be >= 1, found 0 at position {position}")]
    ZeroLayerSize { position: usize },
    #[error("train-mode forward needs batch >= 2, got {batch}")]
    BatchTooSmall { batch: usize },
    #[error("input has {found} columns, network expects {expected}")]
    InputSizeMismatch { expected: usize, found: usize },
    #[error("cache does not match this network ({reason})")]
    CacheMismatch { reason: String },
    #[error("gradient and parameter lengths differ: {params} vs {grads}")]
    GradLengthMismatch { params: usize, grads: usize },
    #[error("non-finite gradient in parameter block {block} (flat index {index})")]
    NonFiniteGrad { block: String, index: usize },
    #[error("model document is invalid: {reason}")]
    BadDocument { reason: String },
}

pub type Result<V> = std::result::Result<V, NetError>;
