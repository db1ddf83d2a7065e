//! Finite-difference verification of every analytic backward pass.
//!
//! The strategy: run the real f32 forward/backward once, then re-evaluate
//! the loss with a 64-bit [shadow](super::shadow) forward while nudging one
//! coordinate at a time by `±h`. A central difference `(L+ - L-) / 2h`
//! then estimates the same derivative the backward pass computed
//! analytically. Coordinates whose perturbation flips a discrete decision
//! (a ReLU switching on, a pool argmax moving) are detected by comparing
//! decision signatures of the two evaluations and skipped — the difference
//! quotient is meaningless across a kink.

use std::collections::HashSet;

use crate::rng::Prng;
use crate::tensor::Tensor;

use super::shadow::{shadow_forward, F64Tensor, ShadowParams, SigHasher};
use super::{Network, NnError};

/// Central-difference step. Large enough that f64 subtractive cancellation
/// is negligible, small enough that curvature error stays well under the
/// acceptance threshold.
pub const FD_STEP: f64 = 1e-3;

/// Coordinates sampled per parameter tensor (all of them if smaller).
pub const COORDS_PER_TENSOR: usize = 40;

/// Per-tensor relative-error bound the checks are held to.
pub const REL_TOLERANCE: f64 = 1e-4;

/// Outcome of one gradient check over a whole network.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    /// Worst per-tensor relative error: `|a - fd|_2 / max(|a|_2, |fd|_2)`
    /// over the sampled coordinates.
    pub worst_rel: f64,
    /// Coordinates actually compared.
    pub checked: usize,
    /// Coordinates skipped because the perturbation crossed a kink.
    pub skipped: usize,
}

enum LossKind<'a> {
    /// `L = sum(r * output)`: a linear probe whose output gradient is `r`.
    Projection(&'a [f64]),
    /// Batch-mean cross-entropy against one-hot targets; the network must
    /// end in softmax and the analytic side uses the fused backward.
    CrossEntropy(&'a [f64]),
}

fn eval_loss(
    net: &Network,
    params: &[ShadowParams],
    x: &F64Tensor,
    masks: &[Option<Vec<f64>>],
    loss: &LossKind,
) -> Result<(f64, u64), NnError> {
    let mut sig = SigHasher::new();
    let out = shadow_forward(net.specs(), params, x, masks, &mut sig)?;
    let value = match loss {
        LossKind::Projection(r) => out.data.iter().zip(*r).map(|(a, b)| a * b).sum(),
        LossKind::CrossEntropy(targets) => {
            let batch = out.dims()[0] as f64;
            let mut acc = 0.0;
            for (p, y) in out.data.iter().zip(*targets) {
                if *y != 0.0 {
                    acc -= y * p.ln();
                }
            }
            acc / batch
        }
    };
    Ok((value, sig.finish()))
}

fn sample_coords(len: usize, want: usize, prng: &mut Prng) -> Vec<usize> {
    if len <= want {
        return (0..len).collect();
    }
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(want);
    while out.len() < want {
        let i = prng.below(len);
        if seen.insert(i) {
            out.push(i);
        }
    }
    out
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Differences below this are indistinguishable from f32 evaluation noise
/// and finite-difference truncation error; a gradient whose analytic and
/// numeric forms agree this closely in absolute terms is correct even when
/// both are near zero (e.g. a conv bias feeding batch norm, whose true
/// gradient is exactly zero).
const ABS_FLOOR: f64 = 1e-6;

fn rel_error(analytic: &[f64], fd: &[f64]) -> f64 {
    let diff: Vec<f64> = analytic.iter().zip(fd).map(|(a, b)| a - b).collect();
    let diff_norm = l2(&diff);
    if diff_norm < ABS_FLOOR {
        return 0.0;
    }
    diff_norm / l2(analytic).max(l2(fd))
}

/// Check all parameter gradients and the input gradient of `net` under a
/// random linear projection loss. Works for any architecture.
pub fn check_projection_gradients(
    net: &mut Network,
    x: &Tensor,
    prng: &mut Prng,
    coords_per_tensor: usize,
    h: f64,
) -> Result<GradCheckReport, NnError> {
    let (out, cache) = net.forward_train(x, prng)?;
    let r = Tensor::uniform(prng, out.dims().to_vec(), -1.0, 1.0)?;
    let (grads, dx) = net.backward(&cache, &r)?;
    let r64: Vec<f64> = r.data().iter().map(|&v| f64::from(v)).collect();
    run_fd(
        net,
        &cache.dropout_masks(),
        x,
        &grads,
        &dx,
        LossKind::Projection(&r64),
        prng,
        coords_per_tensor,
        h,
    )
}

/// Check all parameter gradients and the input gradient of a
/// softmax-terminated classifier under batch-mean cross-entropy, using the
/// fused softmax + cross-entropy backward on the analytic side.
pub fn check_ce_gradients(
    net: &mut Network,
    x: &Tensor,
    one_hot: &Tensor,
    prng: &mut Prng,
    coords_per_tensor: usize,
    h: f64,
) -> Result<GradCheckReport, NnError> {
    let (out, cache) = net.forward_train(x, prng)?;
    let batch = x.dims()[0] as f32;
    let dlogits = out.zip(one_hot, |p, y| (p - y) / batch)?;
    let (grads, dx) = net.backward_fused_ce(&cache, &dlogits)?;
    let y64: Vec<f64> = one_hot.data().iter().map(|&v| f64::from(v)).collect();
    run_fd(
        net,
        &cache.dropout_masks(),
        x,
        &grads,
        &dx,
        LossKind::CrossEntropy(&y64),
        prng,
        coords_per_tensor,
        h,
    )
}

#[allow(clippy::too_many_arguments)]
fn run_fd(
    net: &Network,
    masks: &[Option<&[f32]>],
    x: &Tensor,
    grads: &[super::LayerGrads],
    dx: &Tensor,
    loss: LossKind<'_>,
    prng: &mut Prng,
    coords_per_tensor: usize,
    h: f64,
) -> Result<GradCheckReport, NnError> {
    let mut shadow_params: Vec<ShadowParams> =
        net.params().iter().map(ShadowParams::from_params).collect();
    let mut x_shadow = F64Tensor::from_tensor(x);
    let masks: Vec<Option<Vec<f64>>> = masks
        .iter()
        .map(|m| m.map(|s| s.iter().map(|&v| f64::from(v)).collect()))
        .collect();

    let mut report = GradCheckReport {
        worst_rel: 0.0,
        checked: 0,
        skipped: 0,
    };

    // (layer index, tensor index within layer, analytic gradient); the
    // input gradient rides along as a pseudo-tensor with layer = len.
    let mut units: Vec<(usize, usize, &Tensor)> = Vec::new();
    for (l, layer_grads) in grads.iter().enumerate() {
        for (t, g) in layer_grads.tensors.iter().enumerate() {
            units.push((l, t, g));
        }
    }
    let input_unit = (net.specs().len(), 0, dx);
    units.push(input_unit);

    let n_layers = net.specs().len();
    for (layer, tensor_idx, analytic) in units {
        let coords = sample_coords(analytic.len(), coords_per_tensor, prng);
        let mut a_sample = Vec::with_capacity(coords.len());
        let mut fd_sample = Vec::with_capacity(coords.len());
        for &coord in &coords {
            // Nudge one coordinate, evaluate both sides, restore.
            let slot = slot_mut(&mut shadow_params, &mut x_shadow, n_layers, layer, tensor_idx, coord);
            let original = *slot;
            *slot = original + h;
            let (loss_plus, sig_plus) = eval_loss(net, &shadow_params, &x_shadow, &masks, &loss)?;
            *slot_mut(&mut shadow_params, &mut x_shadow, n_layers, layer, tensor_idx, coord) =
                original - h;
            let (loss_minus, sig_minus) = eval_loss(net, &shadow_params, &x_shadow, &masks, &loss)?;
            *slot_mut(&mut shadow_params, &mut x_shadow, n_layers, layer, tensor_idx, coord) =
                original;

            if sig_plus != sig_minus {
                report.skipped += 1;
                continue;
            }
            report.checked += 1;
            a_sample.push(f64::from(analytic.data()[coord]));
            fd_sample.push((loss_plus - loss_minus) / (2.0 * h));
        }
        let rel = rel_error(&a_sample, &fd_sample);
        if rel > report.worst_rel {
            report.worst_rel = rel;
        }
    }
    Ok(report)
}

/// One coordinate of the finite-difference state: a parameter tensor's
/// element, or (when `layer == n_layers`) an element of the input.
fn slot_mut<'a>(
    shadow_params: &'a mut [ShadowParams],
    x_shadow: &'a mut F64Tensor,
    n_layers: usize,
    layer: usize,
    tensor_idx: usize,
    coord: usize,
) -> &'a mut f64 {
    if layer == n_layers {
        &mut x_shadow.data[coord]
    } else {
        let tensor = shadow_params[layer]
            .trainable_mut()
            .into_iter()
            .nth(tensor_idx)
            .expect("tensor index within layer");
        &mut tensor.data[coord]
    }
}
