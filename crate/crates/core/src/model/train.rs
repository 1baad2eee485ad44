use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::embed::PairIndex;
use super::loss::{assemble_batch, gather_columns, rss_core};
use super::{build_pairs, Hyper, LkisModel, ModelError, Result};
use crate::linalg::Mat;
use crate::nn::{NetMode, OptKind, OptimizerState};
use crate::scalar::Scalar;
use crate::series::TimeSeries;

/// Mini-batch training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig<T> {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub optimizer: OptKind<T>,
    pub learning_rate: T,
    /// Fraction of pairs held out for model selection (0 disables).
    pub validation_fraction: T,
    /// Epochs without validation improvement before stopping (0 disables).
    pub patience: usize,
    pub seed: u64,
    /// Record the full-batch regression residual once per epoch.
    pub monitor_full_batch: bool,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            batch_size: 200,
            max_epochs: 200,
            optimizer: OptKind::adam_default(),
            learning_rate: T::c(1e-3),
            validation_fraction: T::c(0.1),
            patience: 0,
            seed: 0,
            monitor_full_batch: false,
        }
    }
}

impl<T: Scalar> TrainConfig<T> {
    fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(ModelError::BadHyper {
                name: "batch_size",
                value: self.batch_size as f64,
                reason: "must be at least 2",
            });
        }
        if self.validation_fraction < T::zero() || self.validation_fraction >= T::one() {
            return Err(ModelError::BadHyper {
                name: "validation_fraction",
                value: self.validation_fraction.f64(),
                reason: "must lie in [0, 1)",
            });
        }
        if self.max_epochs == 0 {
            return Err(ModelError::BadHyper {
                name: "max_epochs",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        Ok(())
    }
}

/// One optimizer step's batch losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: usize,
    pub batch_rss: f64,
    pub batch_rec: f64,
    pub batch_total: f64,
}

/// Per-epoch summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Full-batch regression residual, when monitored.
    pub full_rss: Option<f64>,
    /// Validation loss (rss + alpha * rec on held-out pairs), when split.
    pub validation: Option<f64>,
}

/// Training trace: per-step batch losses and per-epoch monitors.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LossReport {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub threads: usize,
}

/// Train a fresh model on the episodes by mini-batch gradient descent over
/// the combined objective, sampling `batch_size` pairs uniformly without
/// replacement per epoch. Returns the best-validation snapshot (or the final
/// model when no validation split is configured) and the loss trace.
pub fn train<T: Scalar>(
    episodes: &[TimeSeries<T>],
    hyper: Hyper<T>,
    cfg: &TrainConfig<T>,
) -> Result<(LkisModel<T>, LossReport)> {
    cfg.validate()?;
    if episodes.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let r = episodes[0].dim();
    let dt = episodes[0].dt();
    for ep in episodes {
        if ep.dim() != r {
            return Err(ModelError::ShapeMismatch {
                op: "train",
                expected: format!("{r} components per episode"),
                found: format!("{}", ep.dim()),
            });
        }
    }

    let mut model = LkisModel::new(hyper, r, dt, cfg.seed)?;
    let mut pairs = build_pairs(episodes, hyper.k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    pairs.shuffle(&mut rng);

    let val_count = (T::from_usize(pairs.len()).unwrap() * cfg.validation_fraction)
        .floor()
        .to_usize()
        .unwrap_or(0);
    let (val_pairs, train_pairs) = pairs.split_at(val_count);
    let val_pairs = val_pairs.to_vec();
    let mut train_pairs = train_pairs.to_vec();
    if train_pairs.len() < cfg.batch_size {
        return Err(ModelError::NotEnoughData {
            pairs: train_pairs.len(),
            batch_size: cfg.batch_size,
        });
    }

    let wphi_len = model.embedder.weight().rows() * model.embedder.weight().cols();
    let g_len = model.g.param_count();
    let mut params = flatten_params(&model);
    let mut opt = OptimizerState::new(cfg.optimizer, cfg.learning_rate, params.len());

    let mut report = LossReport {
        threads: 1,
        ..LossReport::default()
    };
    let mut best: Option<(f64, usize, LkisModel<T>)> = None;
    let mut since_best = 0usize;
    let mut step = 0usize;

    for epoch in 0..cfg.max_epochs {
        train_pairs.shuffle(&mut rng);
        let batches = train_pairs.len() / cfg.batch_size;
        for b in 0..batches {
            let chunk = &train_pairs[b * cfg.batch_size..(b + 1) * cfg.batch_size];
            let (rss, rec) = train_step(&mut model, episodes, chunk, &mut params, &mut opt,
                wphi_len, g_len)?;
            let total =
                rss + hyper.alpha.f64() * rec + hyper.l1_phi.f64() * wphi_l1(&params, wphi_len);
            report.steps.push(StepRecord {
                epoch,
                step,
                batch_rss: rss,
                batch_rec: rec,
                batch_total: total,
            });
            if !total.is_finite() {
                return Err(ModelError::Diverged {
                    epoch,
                    step,
                    report: Box::new(report),
                });
            }
            step += 1;
        }

        let full_rss = if cfg.monitor_full_batch {
            Some(super::loss::full_batch_rss(&model, episodes, &train_pairs)?.f64())
        } else {
            None
        };
        let validation = if val_pairs.is_empty() {
            None
        } else {
            let parts = super::loss::total_loss(&model, episodes, &val_pairs)?;
            Some((parts.rss + hyper.alpha * parts.rec).f64())
        };
        report.epochs.push(EpochRecord {
            epoch,
            full_rss,
            validation,
        });

        if let Some(v) = validation {
            if !v.is_finite() {
                return Err(ModelError::Diverged {
                    epoch,
                    step,
                    report: Box::new(report),
                });
            }
            let improved = best.as_ref().map_or(true, |(bv, _, _)| v < *bv);
            if improved {
                best = Some((v, epoch, model.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if cfg.patience > 0 && since_best >= cfg.patience {
                    break;
                }
            }
        }
    }

    if let Some((_, epoch, snapshot)) = best {
        report.best_epoch = Some(epoch);
        Ok((snapshot, report))
    } else {
        Ok((model, report))
    }
}

/// One mini-batch update. Returns (batch rss, batch rec).
fn train_step<T: Scalar>(
    model: &mut LkisModel<T>,
    episodes: &[TimeSeries<T>],
    chunk: &[PairIndex],
    params: &mut Vec<T>,
    opt: &mut OptimizerState<T>,
    wphi_len: usize,
    g_len: usize,
) -> Result<(f64, f64)> {
    let alpha = model.hyper.alpha;
    let l1 = model.hyper.l1_phi;
    let batch = assemble_batch(episodes, chunk, model.k())?;

    // Forward: embed, observe, reconstruct (train mode updates running stats).
    let x = batch.windows.matmul(&model.embedder.weight().transpose());
    let (g, g_cache) = model.g.forward(&x, NetMode::Train)?;
    let y0 = gather_columns(&g, &batch.i0);
    let y1 = gather_columns(&g, &batch.i1);
    let (rss, resid, b_mat) = rss_core(&y0, &y1, true)?;
    let (recon, h_cache) = model.h.forward(&g, NetMode::Train)?;

    // Gradient of the regression residual scattered back onto g's rows.
    let d_y1 = resid.scale(T::c(2.0));
    let d_y0 = b_mat
        .expect("regression matrix for training")
        .transpose()
        .matmul(&resid)
        .scale(T::c(-2.0));
    let mut d_g = Mat::<T>::zeros(g.rows(), g.cols());
    for (j, (&r0, &r1)) in batch.i0.iter().zip(&batch.i1).enumerate() {
        for c in 0..g.cols() {
            d_g[(r0, c)] += d_y0[(c, j)];
            d_g[(r1, c)] += d_y1[(c, j)];
        }
    }

    // Reconstruction gradient, scaled by alpha up front.
    let diff = recon.sub(&batch.targets);
    let rec = {
        let fr = diff.frobenius_norm();
        (fr * fr).f64()
    };
    let d_recon = diff.scale(T::c(2.0) * alpha);
    let (h_grads, d_g_rec) = model.h.backward(&h_cache, &d_recon)?;
    let d_g_total = d_g.add(&d_g_rec);

    let (g_grads, d_x) = model.g.backward(&g_cache, &d_g_total)?;

    // d W_phi = dX^T U, plus the L1 subgradient.
    let mut d_wphi = d_x.transpose().matmul(&batch.windows);
    if l1 > T::zero() {
        let w = model.embedder.weight();
        for i in 0..d_wphi.rows() {
            for j in 0..d_wphi.cols() {
                let s = w[(i, j)];
                if s > T::zero() {
                    d_wphi[(i, j)] += l1;
                } else if s < T::zero() {
                    d_wphi[(i, j)] -= l1;
                }
            }
        }
    }

    let mut grads = Vec::with_capacity(params.len());
    grads.extend_from_slice(d_wphi.data());
    grads.extend(g_grads.flatten());
    grads.extend(h_grads.flatten());

    let g_net = &model.g;
    let h_net = &model.h;
    opt.step(params, &grads, |i| {
        if i < wphi_len {
            "w_phi".to_string()
        } else if i < wphi_len + g_len {
            format!("g.{}", g_net.describe_param(i - wphi_len))
        } else {
            format!("h.{}", h_net.describe_param(i - wphi_len - g_len))
        }
    })?;
    apply_params(model, params, wphi_len, g_len);
    Ok((rss.f64(), rec))
}

fn wphi_l1<T: Scalar>(params: &[T], wphi_len: usize) -> f64 {
    params[..wphi_len]
        .iter()
        .fold(T::zero(), |acc, &v| acc + v.abs())
        .f64()
}

pub(crate) fn flatten_params<T: Scalar>(model: &LkisModel<T>) -> Vec<T> {
    let mut out = Vec::new();
    out.extend_from_slice(model.embedder.weight().data());
    out.extend(model.g.flatten_params());
    out.extend(model.h.flatten_params());
    out
}

pub(crate) fn apply_params<T: Scalar>(
    model: &mut LkisModel<T>,
    params: &[T],
    wphi_len: usize,
    g_len: usize,
) {
    model
        .embedder
        .weight_mut()
        .data_mut()
        .copy_from_slice(&params[..wphi_len]);
    model.g.set_params(&params[wphi_len..wphi_len + g_len]);
    model.h.set_params(&params[wphi_len + g_len..]);
}
