//! Batch normalization over the batch axis (dense inputs) or batch and
//! spatial axes (conv inputs), with the full batch-statistics backward.

use crate::tensor::Tensor;

use super::NnError;

/// Reduction layout: `features` distinct statistics, each over `group`
/// elements, with `inner` contiguous elements per (sample, feature) pair.
/// Dense `[N,F]`: inner = 1; conv `[N,C,H,W]`: inner = H*W.
struct Axes {
    features: usize,
    inner: usize,
    batch: usize,
}

fn axes(x: &Tensor) -> Result<Axes, NnError> {
    match x.dims() {
        &[n, f] => Ok(Axes {
            features: f,
            inner: 1,
            batch: n,
        }),
        &[n, c, h, w] => Ok(Axes {
            features: c,
            inner: h * w,
            batch: n,
        }),
        other => Err(NnError::ShapeFlow {
            layer: 0,
            shape: other.to_vec(),
            reason: "batch norm expects [N,F] or [N,C,H,W]".into(),
        }),
    }
}

/// Per-feature visit of every element: calls `f(feature, flat_index)`.
fn for_each(a: &Axes, mut f: impl FnMut(usize, usize)) {
    for n in 0..a.batch {
        for feat in 0..a.features {
            let base = (n * a.features + feat) * a.inner;
            for i in 0..a.inner {
                f(feat, base + i);
            }
        }
    }
}

/// Train-mode forward output plus everything the backward pass needs.
pub struct BnForward {
    pub output: Tensor,
    /// Normalized input (before scale/shift), cached for backward.
    pub x_hat: Tensor,
    pub inv_std: Vec<f32>,
    pub batch_mean: Vec<f32>,
    /// Population variance (N divisor).
    pub batch_var: Vec<f32>,
}

/// Normalize by batch statistics, then scale-shift by gamma/beta.
pub fn batchnorm_train(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    epsilon: f32,
) -> Result<BnForward, NnError> {
    let a = axes(x)?;
    if a.batch < 2 {
        return Err(NnError::BatchTooSmall(a.batch));
    }
    let m = (a.batch * a.inner) as f64;
    let xd = x.data();

    let mut mean = vec![0.0f64; a.features];
    for_each(&a, |feat, at| mean[feat] += xd[at] as f64);
    mean.iter_mut().for_each(|v| *v /= m);

    let mut var = vec![0.0f64; a.features];
    for_each(&a, |feat, at| {
        let d = xd[at] as f64 - mean[feat];
        var[feat] += d * d;
    });
    var.iter_mut().for_each(|v| *v /= m);

    let inv_std: Vec<f32> = var
        .iter()
        .map(|&v| (1.0 / (v + epsilon as f64).sqrt()) as f32)
        .collect();
    let mean32: Vec<f32> = mean.iter().map(|&v| v as f32).collect();

    let mut x_hat = x.clone();
    let xh = x_hat.data_mut();
    for_each(&a, |feat, at| {
        xh[at] = (xh[at] - mean32[feat]) * inv_std[feat];
    });

    let mut output = x_hat.clone();
    let out = output.data_mut();
    let (g, b) = (gamma.data(), beta.data());
    for_each(&a, |feat, at| out[at] = out[at] * g[feat] + b[feat]);

    Ok(BnForward {
        output,
        x_hat,
        inv_std,
        batch_mean: mean32,
        batch_var: var.iter().map(|&v| v as f32).collect(),
    })
}

/// Blend batch statistics into the running estimates:
/// `running = momentum * running + (1 - momentum) * batch`.
pub fn update_running_stats(
    running_mean: &mut Tensor,
    running_var: &mut Tensor,
    momentum: f32,
    batch_mean: &[f32],
    batch_var: &[f32],
) {
    for (r, &b) in running_mean.data_mut().iter_mut().zip(batch_mean) {
        *r = momentum * *r + (1.0 - momentum) * b;
    }
    for (r, &b) in running_var.data_mut().iter_mut().zip(batch_var) {
        *r = momentum * *r + (1.0 - momentum) * b;
    }
}

/// Inference-mode forward: normalize by the running statistics.
pub fn batchnorm_infer(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    running_mean: &Tensor,
    running_var: &Tensor,
    epsilon: f32,
) -> Result<Tensor, NnError> {
    let a = axes(x)?;
    let (g, b) = (gamma.data(), beta.data());
    let (rm, rv) = (running_mean.data(), running_var.data());
    let inv_std: Vec<f32> = rv.iter().map(|&v| 1.0 / (v + epsilon).sqrt()).collect();
    let mut y = x.clone();
    let yd = y.data_mut();
    for_each(&a, |feat, at| {
        yd[at] = (yd[at] - rm[feat]) * inv_std[feat] * g[feat] + b[feat];
    });
    Ok(y)
}

/// Full batch-statistics backward. With `m` elements per feature and
/// `dxh = upstream * gamma`:
/// `dx = inv_std/m * (m*dxh - sum(dxh) - x_hat * sum(dxh * x_hat))`.
/// Returns `(d_gamma, d_beta, dx)`.
pub fn batchnorm_backward(
    x_hat: &Tensor,
    inv_std: &[f32],
    gamma: &Tensor,
    upstream: &Tensor,
) -> Result<(Tensor, Tensor, Tensor), NnError> {
    let a = axes(x_hat)?;
    let m = (a.batch * a.inner) as f64;
    let up = upstream.data();
    let xh = x_hat.data();
    let g = gamma.data();

    let mut d_gamma = vec![0.0f64; a.features];
    let mut d_beta = vec![0.0f64; a.features];
    let mut sum_dxh = vec![0.0f64; a.features];
    let mut sum_dxh_xh = vec![0.0f64; a.features];
    for_each(&a, |feat, at| {
        let dy = up[at] as f64;
        d_gamma[feat] += dy * xh[at] as f64;
        d_beta[feat] += dy;
        let dxh = dy * g[feat] as f64;
        sum_dxh[feat] += dxh;
        sum_dxh_xh[feat] += dxh * xh[at] as f64;
    });

    let mut dx = upstream.clone();
    let dxd = dx.data_mut();
    for_each(&a, |feat, at| {
        let dxh = dxd[at] as f64 * g[feat] as f64;
        let v = inv_std[feat] as f64 / m
            * (m * dxh - sum_dxh[feat] - xh[at] as f64 * sum_dxh_xh[feat]);
        dxd[at] = v as f32;
    });

    Ok((
        Tensor::from_vec(
            [a.features],
            d_gamma.iter().map(|&v| v as f32).collect(),
        )?,
        Tensor::from_vec([a.features], d_beta.iter().map(|&v| v as f32).collect())?,
        dx,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infer_with_unit_stats_is_near_identity() {
        let x = Tensor::from_vec([2, 2], vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        let gamma = Tensor::filled([2], 1.0).unwrap();
        let beta = Tensor::zeros([2]).unwrap();
        let rm = Tensor::zeros([2]).unwrap();
        let rv = Tensor::filled([2], 1.0).unwrap();
        let eps = 1e-5f32;
        let y = batchnorm_infer(&x, &gamma, &beta, &rm, &rv, eps).unwrap();
        let scale = 1.0 / (1.0 + eps).sqrt();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b * scale).abs() < 1e-6);
        }
    }

    #[test]
    fn train_on_pre_standardized_batch_is_identity() {
        // Batch [-1, 1] on one feature already has mean 0, var 1.
        let x = Tensor::from_vec([2, 1], vec![-1.0, 1.0]).unwrap();
        let gamma = Tensor::filled([1], 1.0).unwrap();
        let beta = Tensor::zeros([1]).unwrap();
        let fwd = batchnorm_train(&x, &gamma, &beta, 1e-5).unwrap();
        assert!((fwd.output.data()[0] + 1.0).abs() < 1e-4);
        assert!((fwd.output.data()[1] - 1.0).abs() < 1e-4);
        assert_eq!(fwd.batch_mean, [0.0]);
        assert_eq!(fwd.batch_var, [1.0]);
    }

    #[test]
    fn singleton_batch_rejected_in_train() {
        let x = Tensor::from_vec([1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        let gamma = Tensor::filled([3], 1.0).unwrap();
        let beta = Tensor::zeros([3]).unwrap();
        assert!(matches!(
            batchnorm_train(&x, &gamma, &beta, 1e-5),
            Err(NnError::BatchTooSmall(1))
        ));
    }

    #[test]
    fn train_output_is_standardized_then_scaled() {
        let x = Tensor::from_vec([4, 1], vec![2.0, 4.0, 6.0, 8.0]).unwrap();
        let gamma = Tensor::filled([1], 3.0).unwrap();
        let beta = Tensor::filled([1], -1.0).unwrap();
        let fwd = batchnorm_train(&x, &gamma, &beta, 1e-5).unwrap();
        // mean 5, population var 5.
        assert!((fwd.batch_mean[0] - 5.0).abs() < 1e-6);
        assert!((fwd.batch_var[0] - 5.0).abs() < 1e-5);
        // Output mean = beta, output std = |gamma| (up to epsilon).
        let mean: f64 = fwd.output.sum() / 4.0;
        assert!((mean + 1.0).abs() < 1e-5);
    }

    #[test]
    fn conv_layout_reduces_over_batch_and_space() {
        let x = Tensor::from_vec(
            [2, 1, 2, 2],
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
        )
        .unwrap();
        let gamma = Tensor::filled([1], 1.0).unwrap();
        let beta = Tensor::zeros([1]).unwrap();
        let fwd = batchnorm_train(&x, &gamma, &beta, 1e-5).unwrap();
        assert!((fwd.batch_mean[0] - 4.5).abs() < 1e-6);
        // Population variance of 1..8.
        assert!((fwd.batch_var[0] - 5.25).abs() < 1e-5);
    }

    #[test]
    fn running_stats_blend_with_momentum() {
        let mut rm = Tensor::filled([1], 10.0).unwrap();
        let mut rv = Tensor::filled([1], 4.0).unwrap();
        update_running_stats(&mut rm, &mut rv, 0.9, &[0.0], &[1.0]);
        assert!((rm.data()[0] - 9.0).abs() < 1e-6);
        assert!((rv.data()[0] - 3.7).abs() < 1e-6);
    }

    #[test]
    fn backward_gradient_sums_match_definitions() {
        let x = Tensor::from_vec([3, 2], vec![0.5, -1.0, 2.0, 0.0, -0.5, 1.0]).unwrap();
        let gamma = Tensor::from_vec([2], vec![1.5, 0.5]).unwrap();
        let beta = Tensor::zeros([2]).unwrap();
        let fwd = batchnorm_train(&x, &gamma, &beta, 1e-5).unwrap();
        let up = Tensor::from_vec([3, 2], vec![1.0, 0.0, -1.0, 2.0, 0.5, -0.5]).unwrap();
        let (dg, db, dx) = batchnorm_backward(&fwd.x_hat, &fwd.inv_std, &gamma, &up).unwrap();
        // d_beta is the per-feature upstream sum.
        assert!((db.data()[0] - 0.5).abs() < 1e-6);
        assert!((db.data()[1] - 1.5).abs() < 1e-6);
        // dx per feature sums to ~0 (normalization removes the mean shift).
        for feat in 0..2 {
            let total: f64 = (0..3).map(|n| dx.data()[n * 2 + feat] as f64).sum();
            assert!(total.abs() < 1e-5, "feature {feat}: {total}");
        }
        assert_eq!(dg.dims(), [2]);
    }
}
