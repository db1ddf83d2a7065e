//! Cross-entropy losses. All reductions run in f64; the sparse and dense
//! categorical forms execute the identical operation sequence so their
//! results are bit-equal, not merely close.

use crate::tensor::Tensor;

use super::TrainError;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before any
/// logarithm, so a confidently wrong prediction yields a large finite loss
/// instead of infinity.
pub const PROB_CLAMP: f64 = 1e-7;

fn clamp(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Verify every row of `[N,K]` probabilities sums to 1 within `1e-5`.
fn check_stochastic(probs: &Tensor) -> Result<(usize, usize), TrainError> {
    let (rows, cols) = probs.as_rank2().map_err(TrainError::Tensor)?;
    for r in 0..rows {
        let sum: f64 = probs.row(r).iter().map(|&v| f64::from(v)).sum();
        if (sum - 1.0).abs() > 1e-5 {
            return Err(TrainError::NonStochastic { row: r, sum });
        }
    }
    Ok((rows, cols))
}

/// Mean binary cross-entropy `-[y ln p + (1-y) ln(1-p)]` over a batch of
/// scalar probabilities, plus its gradient with respect to each `p`.
///
/// `probs` and `targets` are flat `[N]` tensors; targets must be 0 or 1.
pub fn binary_cross_entropy(
    probs: &Tensor,
    targets: &Tensor,
) -> Result<(f64, Tensor), TrainError> {
    if probs.dims() != targets.dims() || probs.rank() != 1 {
        return Err(TrainError::LossShape {
            probs: probs.dims().to_vec(),
            targets: targets.dims().to_vec(),
        });
    }
    let n = probs.len() as f64;
    let mut acc = 0.0f64;
    let mut grad = vec![0.0f32; probs.len()];
    for (i, (&p, &y)) in probs.data().iter().zip(targets.data()).enumerate() {
        let p = clamp(f64::from(p));
        let y = f64::from(y);
        acc -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        grad[i] = ((-y / p + (1.0 - y) / (1.0 - p)) / n) as f32;
    }
    Ok((acc / n, Tensor::from_vec(probs.dims().to_vec(), grad)?))
}

/// Mean categorical cross-entropy `-sum(y ln p)` over `[N,K]` rows against
/// one-hot targets. Rows of `probs` must be stochastic within `1e-5`.
pub fn categorical_cross_entropy(probs: &Tensor, one_hot: &Tensor) -> Result<f64, TrainError> {
    if probs.dims() != one_hot.dims() {
        return Err(TrainError::LossShape {
            probs: probs.dims().to_vec(),
            targets: one_hot.dims().to_vec(),
        });
    }
    let (rows, _) = check_stochastic(probs)?;
    let mut acc = 0.0f64;
    for (&p, &y) in probs.data().iter().zip(one_hot.data()) {
        if y != 0.0 {
            acc -= f64::from(y) * clamp(f64::from(p)).ln();
        }
    }
    Ok(acc / rows as f64)
}

/// Per-row cross-entropy terms `-ln p[label]` against integer labels.
/// Evaluation code collects these across mini-batches and reduces them in
/// sample order, so a chunked pass reproduces the whole-set loss exactly —
/// f64 summation order never depends on where the batch boundaries fall.
pub(crate) fn per_sample_ce(probs: &Tensor, labels: &[u32]) -> Result<Vec<f64>, TrainError> {
    let (rows, cols) = check_stochastic(probs)?;
    if rows != labels.len() {
        return Err(TrainError::LengthMismatch {
            want: rows,
            got: labels.len(),
        });
    }
    let mut terms = Vec::with_capacity(rows);
    for (r, &label) in labels.iter().enumerate() {
        if label as usize >= cols {
            return Err(TrainError::LabelOutOfRange {
                label,
                classes: cols,
            });
        }
        // One-hot targets contribute exactly one term per row with y = 1;
        // multiplying by 1.0 is exact, so this matches the dense loop bit
        // for bit.
        terms.push(-clamp(f64::from(probs.row(r)[label as usize])).ln());
    }
    Ok(terms)
}

/// Un-normalized cross-entropy sum over a batch against integer labels.
pub(crate) fn cross_entropy_sum(probs: &Tensor, labels: &[u32]) -> Result<f64, TrainError> {
    Ok(per_sample_ce(probs, labels)?.iter().sum())
}

/// Mean cross-entropy against integer class labels. Defined as — and
/// bit-identical to — [`categorical_cross_entropy`] with one-hot targets.
pub fn sparse_categorical_cross_entropy(
    probs: &Tensor,
    labels: &[u32],
) -> Result<f64, TrainError> {
    Ok(cross_entropy_sum(probs, labels)? / labels.len() as f64)
}

/// Gradient of batch-mean cross-entropy with respect to pre-softmax scores:
/// `(p - y) / N`. Feed this to the fused softmax + cross-entropy backward.
pub fn fused_ce_grad(probs: &Tensor, one_hot: &Tensor) -> Result<Tensor, TrainError> {
    if probs.dims() != one_hot.dims() {
        return Err(TrainError::LossShape {
            probs: probs.dims().to_vec(),
            targets: one_hot.dims().to_vec(),
        });
    }
    let n = probs.dims()[0] as f32;
    Ok(probs.zip(one_hot, |p, y| (p - y) / n)?)
}

/// `[N,K]` one-hot matrix from class indices.
pub fn one_hot_rows(labels: &[u32], classes: usize) -> Result<Tensor, TrainError> {
    if labels.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut data = vec![0.0f32; labels.len() * classes];
    for (r, &label) in labels.iter().enumerate() {
        if label as usize >= classes {
            return Err(TrainError::LabelOutOfRange { label, classes });
        }
        data[r * classes + label as usize] = 1.0;
    }
    Ok(Tensor::from_vec([labels.len(), classes], data)?)
}
