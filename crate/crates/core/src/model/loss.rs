use super::embed::{window_vector, PairIndex};
use super::{LkisModel, ModelError, Result};
use crate::linalg::{svd, Mat};
use crate::scalar::Scalar;
use crate::series::TimeSeries;

/// Gradients of [`rss_loss`] with respect to both snapshot matrices.
#[derive(Debug, Clone)]
pub struct RssGrad<T> {
    pub d_y0: Mat<T>,
    pub d_y1: Mat<T>,
}

/// Components of the combined objective.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossComponents<T> {
    pub total: T,
    pub rss: T,
    pub rec: T,
    pub l1: T,
}

/// Residual sum of squares of the least-squares regression from the columns
/// of `Y0` to those of `Y1`: `||Y1 (I - Y0^+ Y0)||_F^2`, computed with the
/// orthogonal projector onto the complement of the row space of `Y0`. Zero
/// exactly when the observables span an invariant subspace.
pub fn rss_loss<T: Scalar>(y0: &Mat<T>, y1: &Mat<T>) -> Result<T> {
    let (loss, _, _) = rss_core(y0, y1, false)?;
    Ok(loss)
}

/// Exact analytic gradient of [`rss_loss`]: with `P = Y0^+ Y0` and
/// `R = Y1 (I - P)`, returns `dL/dY1 = 2R` and `dL/dY0 = -2 (Y1 Y0^+)^T R`.
pub fn rss_loss_grad<T: Scalar>(y0: &Mat<T>, y1: &Mat<T>) -> Result<RssGrad<T>> {
    let (_, r, b) = rss_core(y0, y1, true)?;
    let d_y1 = r.scale(T::c(2.0));
    let d_y0 = b
        .expect("regression matrix computed for gradients")
        .transpose()
        .matmul(&r)
        .scale(T::c(-2.0));
    Ok(RssGrad { d_y0, d_y1 })
}

/// Shared path: returns (loss, residual R, optionally B = Y1 Y0^+).
pub(crate) fn rss_core<T: Scalar>(
    y0: &Mat<T>,
    y1: &Mat<T>,
    want_b: bool,
) -> Result<(T, Mat<T>, Option<Mat<T>>)> {
    if y0.shape() != y1.shape() {
        return Err(ModelError::ShapeMismatch {
            op: "rss_loss",
            expected: format!("{:?}", y0.shape()),
            found: format!("{:?}", y1.shape()),
        });
    }
    if y0.cols() == 0 {
        return Err(ModelError::EmptyBatch);
    }
    let f = svd(y0)?;
    let rank = f.rank(crate::linalg::default_rank_tol(y0.rows(), y0.cols()));

    // R = Y1 - (Y1 V_r) V_r^T with V_r the retained right singular vectors.
    let v_r = f.v.col_block(0, rank);
    let y1v = y1.matmul(&v_r);
    let r = y1.sub(&y1v.matmul(&v_r.transpose()));
    let loss = {
        let fr = r.frobenius_norm();
        fr * fr
    };
    let b = if want_b {
        // B = (Y1 V_r) S_r^{-1} U_r^T
        let mut scaled = y1v;
        for t in 0..rank {
            let inv = T::one() / f.s[t];
            for i in 0..scaled.rows() {
                scaled[(i, t)] = scaled[(i, t)] * inv;
            }
        }
        let u_r = f.u.col_block(0, rank);
        Some(scaled.matmul(&u_r.transpose()))
    } else {
        None
    };
    Ok((loss, r, b))
}

/// Reconstruction penalty `sum_j ||y_j - h(g(x~_j))||^2` on a batch of
/// embedded points with their measurement targets (eval-mode networks).
pub fn rec_loss<T: Scalar>(
    model: &LkisModel<T>,
    x_tilde: &Mat<T>,
    targets: &Mat<T>,
) -> Result<T> {
    if x_tilde.rows() == 0 {
        return Err(ModelError::EmptyBatch);
    }
    if x_tilde.rows() != targets.rows() || targets.cols() != model.r() {
        return Err(ModelError::ShapeMismatch {
            op: "rec_loss",
            expected: format!("targets {} x {}", x_tilde.rows(), model.r()),
            found: format!("{} x {}", targets.rows(), targets.cols()),
        });
    }
    let g = model.g.forward_eval(x_tilde)?;
    let y = model.h.forward_eval(&g)?;
    let d = y.sub(targets);
    let fr = d.frobenius_norm();
    Ok(fr * fr)
}

/// Unique embedded points referenced by a pair batch, with the index of each
/// pair's earlier/later member, stacked delay windows, and targets.
pub(crate) struct BatchPoints<T> {
    pub i0: Vec<usize>,
    pub i1: Vec<usize>,
    pub windows: Mat<T>,
    pub targets: Mat<T>,
}

pub(crate) fn assemble_batch<T: Scalar>(
    episodes: &[TimeSeries<T>],
    pairs: &[PairIndex],
    k: usize,
) -> Result<BatchPoints<T>> {
    if pairs.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let mut pts: Vec<(usize, usize)> = Vec::with_capacity(pairs.len() * 2);
    for p in pairs {
        pts.push((p.episode, p.t));
        pts.push((p.episode, p.t + 1));
    }
    pts.sort_unstable();
    pts.dedup();
    let index_of = |episode: usize, t: usize| -> usize {
        pts.binary_search(&(episode, t)).expect("point in batch")
    };
    let i0: Vec<usize> = pairs.iter().map(|p| index_of(p.episode, p.t)).collect();
    let i1: Vec<usize> = pairs.iter().map(|p| index_of(p.episode, p.t + 1)).collect();

    let rows: Vec<Vec<T>> = pts
        .iter()
        .map(|&(e, t)| window_vector(&episodes[e], t, k))
        .collect();
    let targets: Vec<Vec<T>> = pts
        .iter()
        .map(|&(e, t)| episodes[e].sample(t).to_vec())
        .collect();
    Ok(BatchPoints {
        i0,
        i1,
        windows: Mat::from_rows(&rows),
        targets: Mat::from_rows(&targets),
    })
}

/// Select matrix columns: `out[:, j] = g_rows[idx[j], :]^T`.
pub(crate) fn gather_columns<T: Scalar>(g_rows: &Mat<T>, idx: &[usize]) -> Mat<T> {
    Mat::from_fn(g_rows.cols(), idx.len(), |i, j| g_rows[(idx[j], i)])
}

/// Combined objective `L_RSS + alpha L_rec + l1 ||W_phi||_1` over a pair
/// batch, eval-mode networks, with the components reported separately.
pub fn total_loss<T: Scalar>(
    model: &LkisModel<T>,
    episodes: &[TimeSeries<T>],
    pairs: &[PairIndex],
) -> Result<LossComponents<T>> {
    let batch = assemble_batch(episodes, pairs, model.k())?;
    let x = batch.windows.matmul(&model.embedder.weight().transpose());
    let g = model.g.forward_eval(&x)?;
    let y0 = gather_columns(&g, &batch.i0);
    let y1 = gather_columns(&g, &batch.i1);
    let rss = rss_loss(&y0, &y1)?;
    let rec = {
        let recon = model.h.forward_eval(&g)?;
        let d = recon.sub(&batch.targets);
        let fr = d.frobenius_norm();
        fr * fr
    };
    let l1 = model.embedder.weight().l1_norm();
    let total = rss + model.hyper.alpha * rec + model.hyper.l1_phi * l1;
    Ok(LossComponents {
        total,
        rss,
        rec,
        l1,
    })
}

/// Full-batch regression residual over a pair set with frozen batch
/// statistics (the monitored quantity during mini-batch training).
pub fn full_batch_rss<T: Scalar>(
    model: &LkisModel<T>,
    episodes: &[TimeSeries<T>],
    pairs: &[PairIndex],
) -> Result<T> {
    let batch = assemble_batch(episodes, pairs, model.k())?;
    let x = batch.windows.matmul(&model.embedder.weight().transpose());
    let (g, _) = model.g.forward_frozen(&x)?;
    let y0 = gather_columns(&g, &batch.i0);
    let y1 = gather_columns(&g, &batch.i1);
    rss_loss(&y0, &y1)
}
