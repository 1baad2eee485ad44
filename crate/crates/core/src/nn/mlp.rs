use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NetError, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;

/// Forward-pass mode. Train normalizes with mini-batch statistics and
/// updates the running estimates; Eval freezes the running statistics and is
/// a row-wise independent map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetMode {
    Train,
    Eval,
}

pub(crate) const MODEL_DOC_VERSION: u32 = 1;
const DEFAULT_PRELU_SLOPE: f64 = 0.25;
const DEFAULT_BN_MOMENTUM: f64 = 0.1;
const DEFAULT_BN_EPS: f64 = 1e-8;

/// Default hidden width: rounded arithmetic mean of the input and output
/// sizes, repeated `depth` times.
pub fn hidden_sizes(input: usize, output: usize, depth: usize) -> Vec<usize> {
    vec![(input + output).div_ceil(2); depth]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Affine<T> {
    w: Mat<T>, // out x in
    b: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Hidden<T> {
    affine: Affine<T>,
    gamma: Vec<T>,
    beta: Vec<T>,
    running_mean: Vec<T>,
    running_var: Vec<T>,
    prelu_slope: T,
}

/// Multi-layer perceptron. Every hidden layer is affine -> batchnorm ->
/// parametric ReLU (one learnable slope per layer); the output layer is
/// affine only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp<T> {
    layer_sizes: Vec<usize>,
    hidden: Vec<Hidden<T>>,
    output: Affine<T>,
    bn_momentum: T,
    bn_eps: T,
}

/// Per-layer intermediates kept for the backward pass.
#[derive(Debug, Clone)]
struct HiddenCache<T> {
    input: Mat<T>,
    x_hat: Mat<T>,
    inv_std: Vec<T>,
    bn_out: Mat<T>,
    batch_mean: Vec<T>,
    batch_var_unbiased: Vec<T>,
}

/// Cached intermediates from one forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    layer_sizes: Vec<usize>,
    batch: usize,
    batch_stats: bool,
    layers: Vec<HiddenCache<T>>,
    out_input: Mat<T>,
}

/// Gradients for every learnable parameter, same layout as the network.
#[derive(Debug, Clone)]
pub struct MlpGrads<T> {
    pub(crate) hidden: Vec<HiddenGrads<T>>,
    pub(crate) out_w: Mat<T>,
    pub(crate) out_b: Vec<T>,
}

#[derive(Debug, Clone)]
pub(crate) struct HiddenGrads<T> {
    pub w: Mat<T>,
    pub b: Vec<T>,
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub slope: T,
}

impl<T: Scalar> Mlp<T> {
    /// He-style seeded initialization; deterministic for a given seed.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(NetError::TooFewLayers);
        }
        if let Some(position) = layer_sizes.iter().position(|&s| s == 0) {
            return Err(NetError::ZeroLayerSize { position });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut affine = |fan_in: usize, fan_out: usize| {
            let std = (T::c(2.0) / T::from_usize(fan_in).unwrap()).sqrt();
            Affine {
                w: Mat::from_fn(fan_out, fan_in, |_, _| T::standard_normal(&mut rng) * std),
                b: vec![T::zero(); fan_out],
            }
        };
        let n_hidden = layer_sizes.len() - 2;
        let mut hidden = Vec::with_capacity(n_hidden);
        for l in 0..n_hidden {
            let (fan_in, fan_out) = (layer_sizes[l], layer_sizes[l + 1]);
            hidden.push(Hidden {
                affine: affine(fan_in, fan_out),
                gamma: vec![T::one(); fan_out],
                beta: vec![T::zero(); fan_out],
                running_mean: vec![T::zero(); fan_out],
                running_var: vec![T::one(); fan_out],
                prelu_slope: T::c(DEFAULT_PRELU_SLOPE),
            });
        }
        let output = affine(layer_sizes[layer_sizes.len() - 2], *layer_sizes.last().unwrap());
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            hidden,
            output,
            bn_momentum: T::c(DEFAULT_BN_MOMENTUM),
            bn_eps: T::c(DEFAULT_BN_EPS),
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Set every PReLU slope (used to start from a near-linear network).
    pub fn set_prelu_slopes(&mut self, slope: T) {
        for h in &mut self.hidden {
            h.prelu_slope = slope;
        }
    }

    /// Total learnable parameter count (weights, biases, bn scale/shift,
    /// prelu slopes). Running statistics are state, not parameters.
    pub fn param_count(&self) -> usize {
        let mut n = self.output.w.rows() * self.output.w.cols() + self.output.b.len();
        for h in &self.hidden {
            n += h.affine.w.rows() * h.affine.w.cols() + h.affine.b.len();
            n += h.gamma.len() + h.beta.len() + 1;
        }
        n
    }

    /// Learnable parameters flattened in declared order: per hidden layer
    /// weight (row-major), bias, gamma, beta, slope; then output weight, bias.
    pub fn flatten_params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for h in &self.hidden {
            out.extend_from_slice(h.affine.w.data());
            out.extend_from_slice(&h.affine.b);
            out.extend_from_slice(&h.gamma);
            out.extend_from_slice(&h.beta);
            out.push(h.prelu_slope);
        }
        out.extend_from_slice(self.output.w.data());
        out.extend_from_slice(&self.output.b);
        out
    }

    /// Inverse of [`flatten_params`]; panics if the length differs.
    pub fn set_params(&mut self, flat: &[T]) {
        assert_eq!(flat.len(), self.param_count(), "flat parameter length");
        let mut pos = 0usize;
        let mut take = |n: usize, pos: &mut usize| {
            let s = &flat[*pos..*pos + n];
            *pos += n;
            s
        };
        for h in &mut self.hidden {
            let wlen = h.affine.w.rows() * h.affine.w.cols();
            h.affine.w.data_mut().copy_from_slice(take(wlen, &mut pos));
            let blen = h.affine.b.len();
            h.affine.b.copy_from_slice(take(blen, &mut pos));
            let glen = h.gamma.len();
            h.gamma.copy_from_slice(take(glen, &mut pos));
            let blen = h.beta.len();
            h.beta.copy_from_slice(take(blen, &mut pos));
            h.prelu_slope = take(1, &mut pos)[0];
        }
        let wlen = self.output.w.rows() * self.output.w.cols();
        self.output.w.data_mut().copy_from_slice(take(wlen, &mut pos));
        let blen = self.output.b.len();
        self.output.b.copy_from_slice(take(blen, &mut pos));
    }

    /// Human-readable name of the parameter block holding flat index `i`.
    pub fn describe_param(&self, mut i: usize) -> String {
        for (l, h) in self.hidden.iter().enumerate() {
            for (name, len) in [
                ("weight", h.affine.w.rows() * h.affine.w.cols()),
                ("bias", h.affine.b.len()),
                ("bn_scale", h.gamma.len()),
                ("bn_shift", h.beta.len()),
                ("prelu_slope", 1),
            ] {
                if i < len {
                    return format!("hidden{l}.{name}");
                }
                i -= len;
            }
        }
        for (name, len) in [
            ("weight", self.output.w.rows() * self.output.w.cols()),
            ("bias", self.output.b.len()),
        ] {
            if i < len {
                return format!("output.{name}");
            }
            i -= len;
        }
        "out-of-range".to_string()
    }

    /// Forward pass; Train mode updates running statistics.
    pub fn forward(&mut self, x: &Mat<T>, mode: NetMode) -> Result<(Mat<T>, MlpCache<T>)> {
        match mode {
            NetMode::Train => {
                let (out, cache) = self.forward_core(x, true)?;
                self.update_running(&cache);
                Ok((out, cache))
            }
            NetMode::Eval => self.forward_core(x, false),
        }
    }

    /// Eval-mode forward without touching any state.
    pub fn forward_eval(&self, x: &Mat<T>) -> Result<Mat<T>> {
        Ok(self.forward_core(x, false)?.0)
    }

    /// Batch-statistics forward that leaves the running statistics frozen.
    /// Used for full-batch loss monitoring and finite-difference checks.
    pub fn forward_frozen(&self, x: &Mat<T>) -> Result<(Mat<T>, MlpCache<T>)> {
        self.forward_core(x, true)
    }

    fn forward_core(&self, x: &Mat<T>, batch_stats: bool) -> Result<(Mat<T>, MlpCache<T>)> {
        if x.cols() != self.input_size() {
            return Err(NetError::InputSizeMismatch {
                expected: self.input_size(),
                found: x.cols(),
            });
        }
        let batch = x.rows();
        if batch_stats && batch < 2 {
            return Err(NetError::BatchTooSmall { batch });
        }
        let mut cur = x.clone();
        let mut layers = Vec::with_capacity(self.hidden.len());
        for h in &self.hidden {
            let pre = affine_forward(&h.affine, &cur);
            let channels = pre.cols();
            let (mean, var_biased, var_unbiased) = if batch_stats {
                let mut mean = vec![T::zero(); channels];
                let mut var = vec![T::zero(); channels];
                let bn = T::from_usize(batch).unwrap();
                for c in 0..channels {
                    let mut acc = T::zero();
                    for i in 0..batch {
                        acc += pre[(i, c)];
                    }
                    mean[c] = acc / bn;
                    let mut vv = T::zero();
                    for i in 0..batch {
                        let d = pre[(i, c)] - mean[c];
                        vv += d * d;
                    }
                    var[c] = vv / bn;
                }
                let unb = T::from_usize(batch - 1).unwrap();
                let var_unbiased = var.iter().map(|&v| v * bn / unb).collect();
                (mean, var, var_unbiased)
            } else {
                (
                    h.running_mean.clone(),
                    h.running_var.clone(),
                    h.running_var.clone(),
                )
            };
            let inv_std: Vec<T> = var_biased
                .iter()
                .map(|&v| T::one() / (v + self.bn_eps).sqrt())
                .collect();
            let x_hat = Mat::from_fn(batch, channels, |i, c| (pre[(i, c)] - mean[c]) * inv_std[c]);
            let bn_out = Mat::from_fn(batch, channels, |i, c| {
                h.gamma[c] * x_hat[(i, c)] + h.beta[c]
            });
            let activated = Mat::from_fn(batch, channels, |i, c| {
                let y = bn_out[(i, c)];
                if y > T::zero() {
                    y
                } else {
                    h.prelu_slope * y
                }
            });
            layers.push(HiddenCache {
                input: cur,
                x_hat,
                inv_std,
                bn_out,
                batch_mean: mean,
                batch_var_unbiased: var_unbiased,
            });
            cur = activated;
        }
        let out = affine_forward(&self.output, &cur);
        let cache = MlpCache {
            layer_sizes: self.layer_sizes.clone(),
            batch,
            batch_stats,
            layers,
            out_input: cur,
        };
        Ok((out, cache))
    }

    fn update_running(&mut self, cache: &MlpCache<T>) {
        let mom = self.bn_momentum;
        for (h, lc) in self.hidden.iter_mut().zip(&cache.layers) {
            for c in 0..h.running_mean.len() {
                h.running_mean[c] =
                    (T::one() - mom) * h.running_mean[c] + mom * lc.batch_mean[c];
                h.running_var[c] =
                    (T::one() - mom) * h.running_var[c] + mom * lc.batch_var_unbiased[c];
            }
        }
    }

    /// Backward pass through the cached forward. Returns parameter gradients
    /// and the gradient with respect to the input batch.
    pub fn backward(&self, cache: &MlpCache<T>, grad_out: &Mat<T>) -> Result<(MlpGrads<T>, Mat<T>)> {
        if cache.layer_sizes != self.layer_sizes {
            return Err(NetError::CacheMismatch {
                reason: format!(
                    "cache built for layers {:?}, network has {:?}",
                    cache.layer_sizes, self.layer_sizes
                ),
            });
        }
        if !cache.batch_stats {
            return Err(NetError::CacheMismatch {
                reason: "cache comes from an eval-mode forward".into(),
            });
        }
        if grad_out.rows() != cache.batch || grad_out.cols() != self.output_size() {
            return Err(NetError::CacheMismatch {
                reason: format!(
                    "grad_out is {}x{}, expected {}x{}",
                    grad_out.rows(),
                    grad_out.cols(),
                    cache.batch,
                    self.output_size()
                ),
            });
        }

        let (out_w, out_b, mut dcur) = affine_backward(&self.output, &cache.out_input, grad_out);
        let mut hidden_grads: Vec<HiddenGrads<T>> = Vec::with_capacity(self.hidden.len());
        for (h, lc) in self.hidden.iter().zip(&cache.layers).rev() {
            let batch = cache.batch;
            let channels = lc.bn_out.cols();

            // PReLU backward.
            let mut dslope = T::zero();
            let mut d_bn = Mat::<T>::zeros(batch, channels);
            for i in 0..batch {
                for c in 0..channels {
                    let y = lc.bn_out[(i, c)];
                    let g = dcur[(i, c)];
                    if y > T::zero() {
                        d_bn[(i, c)] = g;
                    } else {
                        d_bn[(i, c)] = g * h.prelu_slope;
                        dslope += g * y;
                    }
                }
            }

            // Batchnorm backward (batch statistics).
            let bn = T::from_usize(batch).unwrap();
            let mut dgamma = vec![T::zero(); channels];
            let mut dbeta = vec![T::zero(); channels];
            let mut sum_dxhat = vec![T::zero(); channels];
            let mut sum_dxhat_xhat = vec![T::zero(); channels];
            for i in 0..batch {
                for c in 0..channels {
                    let dy = d_bn[(i, c)];
                    dgamma[c] += dy * lc.x_hat[(i, c)];
                    dbeta[c] += dy;
                    let dxh = dy * h.gamma[c];
                    sum_dxhat[c] += dxh;
                    sum_dxhat_xhat[c] += dxh * lc.x_hat[(i, c)];
                }
            }
            let d_pre = Mat::from_fn(batch, channels, |i, c| {
                let dxh = d_bn[(i, c)] * h.gamma[c];
                lc.inv_std[c] * (dxh - sum_dxhat[c] / bn - lc.x_hat[(i, c)] * sum_dxhat_xhat[c] / bn)
            });

            let (dw, db, dinput) = affine_backward(&h.affine, &lc.input, &d_pre);
            hidden_grads.push(HiddenGrads {
                w: dw,
                b: db,
                gamma: dgamma,
                beta: dbeta,
                slope: dslope,
            });
            dcur = dinput;
        }
        hidden_grads.reverse();
        Ok((
            MlpGrads {
                hidden: hidden_grads,
                out_w,
                out_b,
            },
            dcur,
        ))
    }

    /// Serialize to the versioned JSON document.
    pub fn to_json(&self) -> String {
        let doc = MlpDoc {
            version: MODEL_DOC_VERSION,
            layer_sizes: self.layer_sizes.clone(),
            params: self.flatten_params(),
            running_mean: self.hidden.iter().map(|h| h.running_mean.clone()).collect(),
            running_var: self.hidden.iter().map(|h| h.running_var.clone()).collect(),
            bn_momentum: self.bn_momentum,
            bn_eps: self.bn_eps,
        };
        serde_json::to_string(&doc).expect("mlp document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MlpDoc<T> = serde_json::from_str(text).map_err(|e| NetError::BadDocument {
            reason: e.to_string(),
        })?;
        if doc.version != MODEL_DOC_VERSION {
            return Err(NetError::BadDocument {
                reason: format!("unsupported version {}", doc.version),
            });
        }
        let mut net = Self::new(&doc.layer_sizes, 0)?;
        if doc.params.len() != net.param_count() {
            return Err(NetError::BadDocument {
                reason: format!(
                    "expected {} parameters, found {}",
                    net.param_count(),
                    doc.params.len()
                ),
            });
        }
        if doc.running_mean.len() != net.hidden.len() || doc.running_var.len() != net.hidden.len() {
            return Err(NetError::BadDocument {
                reason: "running statistic count does not match hidden layers".into(),
            });
        }
        net.set_params(&doc.params);
        net.bn_momentum = doc.bn_momentum;
        net.bn_eps = doc.bn_eps;
        for (h, (mean, var)) in net
            .hidden
            .iter_mut()
            .zip(doc.running_mean.into_iter().zip(doc.running_var))
        {
            if mean.len() != h.running_mean.len() || var.len() != h.running_var.len() {
                return Err(NetError::BadDocument {
                    reason: "running statistic width does not match layer".into(),
                });
            }
            if var.iter().any(|v| *v < T::zero()) {
                return Err(NetError::BadDocument {
                    reason: "negative running variance".into(),
                });
            }
            h.running_mean = mean;
            h.running_var = var;
        }
        Ok(net)
    }
}

#[derive(Serialize, Deserialize)]
struct MlpDoc<T> {
    version: u32,
    layer_sizes: Vec<usize>,
    params: Vec<T>,
    running_mean: Vec<Vec<T>>,
    running_var: Vec<Vec<T>>,
    bn_momentum: T,
    bn_eps: T,
}

fn affine_forward<T: Scalar>(layer: &Affine<T>, x: &Mat<T>) -> Mat<T> {
    let mut out = x.matmul(&layer.w.transpose());
    for i in 0..out.rows() {
        for (j, &b) in layer.b.iter().enumerate() {
            out[(i, j)] += b;
        }
    }
    out
}

/// Returns (dW, db, dX) for `out = X W^T + b`.
fn affine_backward<T: Scalar>(
    layer: &Affine<T>,
    input: &Mat<T>,
    dout: &Mat<T>,
) -> (Mat<T>, Vec<T>, Mat<T>) {
    let dw = dout.transpose().matmul(input);
    let mut db = vec![T::zero(); layer.b.len()];
    for i in 0..dout.rows() {
        for (j, d) in db.iter_mut().enumerate() {
            *d += dout[(i, j)];
        }
    }
    let dx = dout.matmul(&layer.w);
    (dw, db, dx)
}

impl<T: Scalar> MlpGrads<T> {
    /// Flatten in the same declared order as [`Mlp::flatten_params`].
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::new();
        for h in &self.hidden {
            out.extend_from_slice(h.w.data());
            out.extend_from_slice(&h.b);
            out.extend_from_slice(&h.gamma);
            out.extend_from_slice(&h.beta);
            out.push(h.slope);
        }
        out.extend_from_slice(self.out_w.data());
        out.extend_from_slice(&self.out_b);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn seeded_batch(rows: usize, cols: usize, seed: u64) -> Mat<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn parameter_count_2_3_4() {
        // (2*3+3) affine + (3*4+4) affine + 1 prelu + 2*3 bn scale/shift = 32.
        let net = Mlp::<f64>::new(&[2, 3, 4], 0).unwrap();
        assert_eq!(net.param_count(), 32);
        assert_eq!(net.flatten_params().len(), 32);
    }

    #[test]
    fn degenerate_depth_is_single_affine() {
        let net = Mlp::<f64>::new(&[1, 1], 0).unwrap();
        assert_eq!(net.param_count(), 2);
        assert!(net.hidden.is_empty());
    }

    #[test]
    fn seeded_init_is_bitwise_deterministic() {
        let a = Mlp::<f64>::new(&[3, 5, 2], 123).unwrap();
        let b = Mlp::<f64>::new(&[3, 5, 2], 123).unwrap();
        assert_eq!(a.flatten_params(), b.flatten_params());
        let c = Mlp::<f64>::new(&[3, 5, 2], 124).unwrap();
        assert_ne!(a.flatten_params(), c.flatten_params());
    }

    #[test]
    fn empty_layer_list_rejected() {
        assert!(matches!(Mlp::<f64>::new(&[], 0), Err(NetError::TooFewLayers)));
        assert!(matches!(Mlp::<f64>::new(&[4], 0), Err(NetError::TooFewLayers)));
        assert!(matches!(
            Mlp::<f64>::new(&[4, 0, 2], 0),
            Err(NetError::ZeroLayerSize { position: 1 })
        ));
    }

    #[test]
    fn zero_net_maps_to_zero() {
        let mut net = Mlp::<f64>::new(&[2, 3, 2], 7).unwrap();
        let zeros = vec![0.0; net.param_count()];
        net.set_params(&zeros);
        let x = seeded_batch(4, 2, 1);
        let (out, _) = net.forward(&x, NetMode::Train).unwrap();
        assert_eq!(out.max_abs(), 0.0);
    }

    #[test]
    fn single_affine_layer_is_exact() {
        let mut net = Mlp::<f64>::new(&[3, 2], 5).unwrap();
        let x = seeded_batch(6, 3, 2);
        let (out, _) = net.forward(&x, NetMode::Train).unwrap();
        let expected = {
            let mut e = x.matmul(&net.output.w.transpose());
            for i in 0..e.rows() {
                for j in 0..e.cols() {
                    e[(i, j)] += net.output.b[j];
                }
            }
            e
        };
        assert!(out.sub(&expected).max_abs() == 0.0);
    }

    /// Independent reference forward pass written directly from the layer
    /// equations, scalar loops only.
    fn reference_forward(net: &Mlp<f64>, x: &Mat<f64>) -> Mat<f64> {
        let b = x.rows();
        let mut cur: Vec<Vec<f64>> = (0..b).map(|i| x.row(i).to_vec()).collect();
        for h in &net.hidden {
            let cout = h.affine.w.rows();
            // affine
            let mut pre = vec![vec![0.0; cout]; b];
            for (i, row) in cur.iter().enumerate() {
                for o in 0..cout {
                    let mut acc = h.affine.b[o];
                    for (k, &xv) in row.iter().enumerate() {
                        acc += h.affine.w[(o, k)] * xv;
                    }
                    pre[i][o] = acc;
                }
            }
            // batchnorm with batch statistics
            for c in 0..cout {
                let mean: f64 = (0..b).map(|i| pre[i][c]).sum::<f64>() / b as f64;
                let var: f64 =
                    (0..b).map(|i| (pre[i][c] - mean).powi(2)).sum::<f64>() / b as f64;
                let inv = 1.0 / (var + net.bn_eps).sqrt();
                for row in pre.iter_mut() {
                    let xh = (row[c] - mean) * inv;
                    row[c] = h.gamma[c] * xh + h.beta[c];
                }
            }
            // prelu
            for row in pre.iter_mut() {
                for v in row.iter_mut() {
                    if *v <= 0.0 {
                        *v *= h.prelu_slope;
                    }
                }
            }
            cur = pre;
        }
        let cout = net.output.w.rows();
        let mut out = Mat::zeros(b, cout);
        for (i, row) in cur.iter().enumerate() {
            for o in 0..cout {
                let mut acc = net.output.b[o];
                for (k, &xv) in row.iter().enumerate() {
                    acc += net.output.w[(o, k)] * xv;
                }
                out[(i, o)] = acc;
            }
        }
        out
    }

    #[test]
    fn forward_matches_reference() {
        let mut net = Mlp::<f64>::new(&[2, 3, 2], 11).unwrap();
        let x = seeded_batch(5, 2, 3);
        let (out, _) = net.forward(&x, NetMode::Train).unwrap();
        let reference = reference_forward(&net, &x);
        assert!(
            out.sub(&reference).max_abs() < 1e-12,
            "deviation {}",
            out.sub(&reference).max_abs()
        );
    }

    #[test]
    fn train_mode_needs_batch_of_two() {
        let mut net = Mlp::<f64>::new(&[2, 3, 2], 0).unwrap();
        let x = seeded_batch(1, 2, 0);
        assert!(matches!(
            net.forward(&x, NetMode::Train),
            Err(NetError::BatchTooSmall { batch: 1 })
        ));
        assert!(net.forward(&x, NetMode::Eval).is_ok());
    }

    #[test]
    fn batchnorm_normalizes_pre_activations() {
        let mut net = Mlp::<f64>::new(&[3, 4, 2], 21).unwrap();
        let x = seeded_batch(64, 3, 9);
        let (_, cache) = net.forward(&x, NetMode::Train).unwrap();
        let lc = &cache.layers[0];
        let b = cache.batch as f64;
        for c in 0..lc.x_hat.cols() {
            let mean: f64 = (0..cache.batch).map(|i| lc.x_hat[(i, c)]).sum::<f64>() / b;
            let var: f64 = (0..cache.batch)
                .map(|i| (lc.x_hat[(i, c)] - mean).powi(2))
                .sum::<f64>()
                / b;
            assert!(mean.abs() < 1e-8, "channel {c} mean {mean}");
            assert!((var - 1.0).abs() < 1e-6, "channel {c} variance {var}");
        }
    }

    #[test]
    fn eval_mode_is_rowwise_independent() {
        let mut net = Mlp::<f64>::new(&[2, 4, 3], 2).unwrap();
        // Push some batch statistics into the running estimates first.
        let warm = seeded_batch(32, 2, 4);
        net.forward(&warm, NetMode::Train).unwrap();
        let x = seeded_batch(6, 2, 5);
        let out = net.forward_eval(&x).unwrap();
        let perm = [3usize, 1, 5, 0, 4, 2];
        let xp = Mat::from_fn(6, 2, |i, j| x[(perm[i], j)]);
        let outp = net.forward_eval(&xp).unwrap();
        for (i, &src) in perm.iter().enumerate() {
            for j in 0..out.cols() {
                assert_eq!(outp[(i, j)], out[(src, j)]);
            }
        }
    }

    #[test]
    fn zero_grad_out_gives_zero_grads() {
        let mut net = Mlp::<f64>::new(&[2, 3, 2], 13).unwrap();
        let x = seeded_batch(4, 2, 6);
        let (out, cache) = net.forward(&x, NetMode::Train).unwrap();
        let (grads, dx) = net
            .backward(&cache, &Mat::zeros(out.rows(), out.cols()))
            .unwrap();
        assert!(grads.flatten().iter().all(|&g| g == 0.0));
        assert_eq!(dx.max_abs(), 0.0);
    }

    #[test]
    fn linear_layer_closed_form_gradient() {
        // loss = ||X W^T - T||_F^2 has gradient 2 (X W^T - T)^T X.
        let net = Mlp::<f64>::new(&[3, 2], 17).unwrap();
        let x = seeded_batch(5, 3, 7);
        let target = seeded_batch(5, 2, 8);
        let (out, cache) = net.forward_frozen(&x).unwrap();
        let resid = out.sub(&target);
        let (grads, _) = net.backward(&cache, &resid.scale(2.0)).unwrap();
        let expected = resid.scale(2.0).transpose().matmul(&x);
        assert!(grads.out_w.sub(&expected).max_abs() < 1e-10);
    }

    #[test]
    fn cache_mismatch_detected() {
        let mut a = Mlp::<f64>::new(&[2, 3, 2], 0).unwrap();
        let b = Mlp::<f64>::new(&[2, 4, 2], 0).unwrap();
        let x = seeded_batch(4, 2, 0);
        let (out, cache) = a.forward(&x, NetMode::Train).unwrap();
        assert!(matches!(
            b.backward(&cache, &out),
            Err(NetError::CacheMismatch { .. })
        ));
    }

    /// Central finite differences over every learnable parameter.
    fn finite_diff_check(layer_sizes: &[usize], seed: u64, tol: f64) {
        let net = Mlp::<f64>::new(layer_sizes, seed).unwrap();
        let x = seeded_batch(6, layer_sizes[0], seed + 100);
        let target = seeded_batch(6, *layer_sizes.last().unwrap(), seed + 200);

        let loss_of = |net: &Mlp<f64>| -> f64 {
            let (out, _) = net.forward_frozen(&x).unwrap();
            let r = out.sub(&target);
            r.frobenius_norm().powi(2)
        };

        let (out, cache) = net.forward_frozen(&x).unwrap();
        let dloss = out.sub(&target).scale(2.0);
        let (grads, _) = net.backward(&cache, &dloss).unwrap();
        let analytic = grads.flatten();

        let params = net.flatten_params();
        let h = 1e-5;
        for i in 0..params.len() {
            let mut plus = net.clone();
            let mut minus = net.clone();
            let mut pp = params.clone();
            pp[i] += h;
            plus.set_params(&pp);
            pp[i] -= 2.0 * h;
            minus.set_params(&pp);
            let numeric = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
            let denom = analytic[i].abs().max(numeric.abs()).max(1.0);
            let rel = (analytic[i] - numeric).abs() / denom;
            assert!(
                rel < tol,
                "param {i} ({}): analytic {} vs numeric {numeric}, rel {rel}",
                net.describe_param(i),
                analytic[i]
            );
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        finite_diff_check(&[2, 3, 2], 31, 1e-4);
    }

    #[test]
    fn gradients_match_finite_differences_deeper() {
        finite_diff_check(&[3, 4, 4, 2], 37, 1e-4);
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let net = Mlp::<f64>::new(&[2, 3, 2], 41).unwrap();
        let x = seeded_batch(5, 2, 51);
        let target = seeded_batch(5, 2, 52);
        let loss_of = |x: &Mat<f64>| -> f64 {
            let (out, _) = net.forward_frozen(x).unwrap();
            out.sub(&target).frobenius_norm().powi(2)
        };
        let (out, cache) = net.forward_frozen(&x).unwrap();
        let (_, dx) = net.backward(&cache, &out.sub(&target).scale(2.0)).unwrap();
        let h = 1e-5;
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                let mut xp = x.clone();
                xp[(i, j)] += h;
                let mut xm = x.clone();
                xm[(i, j)] -= h;
                let numeric = (loss_of(&xp) - loss_of(&xm)) / (2.0 * h);
                let rel = (dx[(i, j)] - numeric).abs() / numeric.abs().max(1.0);
                assert!(rel < 1e-4, "input ({i},{j}) rel {rel}");
            }
        }
    }

    #[test]
    fn json_roundtrip_is_bit_exact() {
        let mut net = Mlp::<f64>::new(&[3, 5, 2], 77).unwrap();
        let warm = seeded_batch(16, 3, 5);
        net.forward(&warm, NetMode::Train).unwrap();
        let text = net.to_json();
        let back = Mlp::<f64>::from_json(&text).unwrap();
        assert_eq!(net, back);
        assert_eq!(text, back.to_json());
    }

    #[test]
    fn hidden_sizes_are_rounded_means() {
        assert_eq!(hidden_sizes(2, 4, 1), vec![3]);
        assert_eq!(hidden_sizes(2, 5, 2), vec![4, 4]);
        assert_eq!(hidden_sizes(1, 1, 1), vec![1]);
    }
}
