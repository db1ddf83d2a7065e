//! ReLU and softmax with their backward passes.

use crate::tensor::Tensor;

use super::NnError;

/// Elementwise `max(0, x)`. The returned mask records which inputs were
/// strictly positive (the subgradient at 0 is taken as 0).
pub fn relu_forward(x: &Tensor) -> (Tensor, Vec<bool>) {
    let mask: Vec<bool> = x.data().iter().map(|&v| v > 0.0).collect();
    let y = x.map(|v| if v > 0.0 { v } else { 0.0 });
    (y, mask)
}

pub fn relu_backward(mask: &[bool], upstream: &Tensor) -> Tensor {
    let mut dx = upstream.clone();
    for (v, &keep) in dx.data_mut().iter_mut().zip(mask) {
        if !keep {
            *v = 0.0;
        }
    }
    dx
}

/// Row-wise softmax of a rank-1 or rank-2 tensor (last axis), with
/// max-subtraction for stability. Rows sum to 1 and all entries are
/// positive for finite input.
pub fn softmax_forward(x: &Tensor) -> Result<Tensor, NnError> {
    let cols = match x.dims() {
        &[c] => c,
        &[_, c] => c,
        other => {
            return Err(NnError::ShapeFlow {
                layer: 0,
                shape: other.to_vec(),
                reason: "softmax expects rank 1 or 2".into(),
            })
        }
    };
    let mut y = x.clone();
    for row in y.data_mut().chunks_exact_mut(cols) {
        let max = row.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        let mut total = 0.0f64;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v as f64;
        }
        for v in row.iter_mut() {
            *v = (*v as f64 / total) as f32;
        }
    }
    Ok(y)
}

/// Standalone softmax Jacobian-vector product:
/// `dx_i = y_i * (g_i - sum_j g_j y_j)` per row. Training uses the fused
/// softmax + cross-entropy path instead; this exists for generic
/// composition.
pub fn softmax_backward(y: &Tensor, upstream: &Tensor) -> Result<Tensor, NnError> {
    let cols = *y.dims().last().expect("rank >= 1");
    let mut dx = upstream.clone();
    for (drow, yrow) in dx
        .data_mut()
        .chunks_exact_mut(cols)
        .zip(y.data().chunks_exact(cols))
    {
        let dot: f64 = drow
            .iter()
            .zip(yrow)
            .map(|(&g, &p)| g as f64 * p as f64)
            .sum();
        for (g, &p) in drow.iter_mut().zip(yrow) {
            *g = ((*g as f64 - dot) * p as f64) as f32;
        }
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_clamps_negatives() {
        let x = Tensor::from_vec([3], vec![-1.0, 0.0, 2.0]).unwrap();
        let (y, mask) = relu_forward(&x);
        assert_eq!(y.data(), [0.0, 0.0, 2.0]);
        assert_eq!(mask, [false, false, true]);
    }

    #[test]
    fn relu_backward_gates_by_mask() {
        let up = Tensor::from_vec([3], vec![5.0, 6.0, 7.0]).unwrap();
        let dx = relu_backward(&[false, true, true], &up);
        assert_eq!(dx.data(), [0.0, 6.0, 7.0]);
    }

    #[test]
    fn softmax_symmetry() {
        let x = Tensor::from_vec([2], vec![0.0, 0.0]).unwrap();
        let y = softmax_forward(&x).unwrap();
        assert_eq!(y.data(), [0.5, 0.5]);
    }

    #[test]
    fn softmax_closed_form_ratios() {
        let x = Tensor::from_vec([3], vec![1f32.ln(), 2f32.ln(), 3f32.ln()]).unwrap();
        let y = softmax_forward(&x).unwrap();
        let want = [1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0];
        for (a, b) in y.data().iter().zip(want) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one_and_shift_invariant() {
        let x = Tensor::from_vec([2, 3], vec![1.0, -2.0, 0.5, 100.0, 101.0, 99.0]).unwrap();
        let y = softmax_forward(&x).unwrap();
        for r in 0..2 {
            let total: f32 = y.row(r).iter().sum();
            assert!((total - 1.0).abs() < 1e-6);
        }
        let shifted = x.map(|v| v + 7.25);
        let y2 = softmax_forward(&shifted).unwrap();
        for (a, b) in y.data().iter().zip(y2.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn softmax_backward_is_orthogonal_to_ones() {
        // The softmax Jacobian maps any upstream to a vector summing to 0
        // (probability mass is conserved).
        let x = Tensor::from_vec([1, 4], vec![0.3, -1.0, 2.0, 0.0]).unwrap();
        let y = softmax_forward(&x).unwrap();
        let up = Tensor::from_vec([1, 4], vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let dx = softmax_backward(&y, &up).unwrap();
        let total: f64 = dx.data().iter().map(|&v| v as f64).sum();
        assert!(total.abs() < 1e-6);
    }
}
