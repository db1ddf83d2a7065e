//! A 64-bit re-implementation of the forward pass, written as independent
//! naive loops rather than shared code.
//!
//! This exists for finite-difference gradient checking: central differences
//! at step `h = 1e-3` need more precision than f32 carries, and an
//! independently-coded forward also cross-checks the optimized f32 path.
//! Every discrete decision (ReLU on/off, pool argmax) is folded into a
//! running hash so callers can detect when a perturbation crossed a kink
//! and the difference quotient stopped being meaningful.

use crate::tensor::Tensor;

use super::conv::conv_output_geometry;
use super::{LayerParams, LayerSpec, NnError, Padding};

/// Dense row-major f64 tensor, just enough for shadow evaluation.
#[derive(Clone)]
pub struct F64Tensor {
    dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl F64Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        F64Tensor { dims, data }
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        F64Tensor {
            dims,
            data: vec![0.0; n],
        }
    }

    pub fn from_tensor(t: &Tensor) -> Self {
        F64Tensor {
            dims: t.dims().to_vec(),
            data: t.data().iter().map(|&v| v as f64).collect(),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }
}

/// FNV-1a accumulator over the discrete decisions of one evaluation.
/// Two evaluations with equal hashes took the same branch everywhere, so a
/// central difference between them differentiates a smooth function.
pub struct SigHasher {
    h: u64,
}

impl SigHasher {
    pub fn new() -> Self {
        SigHasher {
            h: 0xcbf2_9ce4_8422_2325,
        }
    }

    pub fn push(&mut self, v: u64) {
        for byte in v.to_le_bytes() {
            self.h ^= u64::from(byte);
            self.h = self.h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn push_bit(&mut self, bit: bool) {
        self.push(u64::from(bit));
    }

    pub fn finish(&self) -> u64 {
        self.h
    }
}

impl Default for SigHasher {
    fn default() -> Self {
        Self::new()
    }
}

/// f64 copies of one layer's parameters. Batch-norm running statistics are
/// omitted: the shadow always evaluates in training mode (batch statistics).
pub enum ShadowParams {
    None,
    Conv2D {
        kernels: F64Tensor,
        bias: F64Tensor,
    },
    Dense {
        weight: F64Tensor,
        bias: F64Tensor,
    },
    BatchNorm {
        gamma: F64Tensor,
        beta: F64Tensor,
    },
    Lstm {
        w: [F64Tensor; 4],
        u: [F64Tensor; 4],
        b: [F64Tensor; 4],
    },
}

impl ShadowParams {
    pub fn from_params(p: &LayerParams) -> Self {
        let f = F64Tensor::from_tensor;
        match p {
            LayerParams::None => ShadowParams::None,
            LayerParams::Conv2D { kernels, bias } => ShadowParams::Conv2D {
                kernels: f(kernels),
                bias: f(bias),
            },
            LayerParams::Dense { weight, bias } => ShadowParams::Dense {
                weight: f(weight),
                bias: f(bias),
            },
            LayerParams::BatchNorm { gamma, beta, .. } => ShadowParams::BatchNorm {
                gamma: f(gamma),
                beta: f(beta),
            },
            LayerParams::Lstm { w, u, b } => ShadowParams::Lstm {
                w: std::array::from_fn(|k| f(&w[k])),
                u: std::array::from_fn(|k| f(&u[k])),
                b: std::array::from_fn(|k| f(&b[k])),
            },
        }
    }

    /// Mutable tensors in the same order as [`LayerParams::trainable`], for
    /// coordinate-wise perturbation.
    pub fn trainable_mut(&mut self) -> Vec<&mut F64Tensor> {
        match self {
            ShadowParams::None => vec![],
            ShadowParams::Conv2D { kernels, bias } => vec![kernels, bias],
            ShadowParams::Dense { weight, bias } => vec![weight, bias],
            ShadowParams::BatchNorm { gamma, beta } => vec![gamma, beta],
            ShadowParams::Lstm { w, u, b } => w
                .iter_mut()
                .chain(u.iter_mut())
                .chain(b.iter_mut())
                .collect(),
        }
    }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn conv_shadow(
    x: &F64Tensor,
    kernels: &F64Tensor,
    bias: &F64Tensor,
    stride: usize,
    padding: Padding,
) -> Result<F64Tensor, NnError> {
    let &[n, c, h, w] = x.dims() else {
        unreachable!("shapes validated at network build")
    };
    let &[f, _, kh, kw] = kernels.dims() else {
        unreachable!("shapes validated at network build")
    };
    let geo = conv_output_geometry(h, w, kh, kw, stride, padding)?;
    let mut out = F64Tensor::zeros(vec![n, f, geo.out_h, geo.out_w]);
    for img in 0..n {
        for fi in 0..f {
            for oy in 0..geo.out_h {
                for ox in 0..geo.out_w {
                    let mut acc = bias.data[fi];
                    for ci in 0..c {
                        for ky in 0..kh {
                            let iy = (oy * stride + ky) as isize - geo.pad_top as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for kx in 0..kw {
                                let ix = (ox * stride + kx) as isize - geo.pad_left as isize;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                acc += x.data
                                    [((img * c + ci) * h + iy as usize) * w + ix as usize]
                                    * kernels.data[((fi * c + ci) * kh + ky) * kw + kx];
                            }
                        }
                    }
                    out.data[((img * f + fi) * geo.out_h + oy) * geo.out_w + ox] = acc;
                }
            }
        }
    }
    Ok(out)
}

fn pool_shadow(x: &F64Tensor, pool_h: usize, pool_w: usize, sig: &mut SigHasher) -> F64Tensor {
    let &[n, c, h, w] = x.dims() else {
        unreachable!("shapes validated at network build")
    };
    let oh = h / pool_h;
    let ow = w / pool_w;
    let mut out = F64Tensor::zeros(vec![n, c, oh, ow]);
    for plane in 0..n * c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_at = 0usize;
                for py in 0..pool_h {
                    for px in 0..pool_w {
                        let v = x.data[(plane * h + oy * pool_h + py) * w + ox * pool_w + px];
                        // Strict > keeps the first maximum, matching the
                        // f32 pool's tie-break.
                        if v > best {
                            best = v;
                            best_at = py * pool_w + px;
                        }
                    }
                }
                sig.push(best_at as u64);
                out.data[(plane * oh + oy) * ow + ox] = best;
            }
        }
    }
    out
}

fn dense_shadow(x: &F64Tensor, weight: &F64Tensor, bias: &F64Tensor) -> F64Tensor {
    let &[n, width] = x.dims() else {
        unreachable!("shapes validated at network build")
    };
    let units = weight.dims()[1];
    let mut out = F64Tensor::zeros(vec![n, units]);
    for img in 0..n {
        for j in 0..units {
            let mut acc = bias.data[j];
            for k in 0..width {
                acc += x.data[img * width + k] * weight.data[k * units + j];
            }
            out.data[img * units + j] = acc;
        }
    }
    out
}

fn relu_shadow(x: &F64Tensor, sig: &mut SigHasher) -> F64Tensor {
    let mut out = x.clone();
    for v in &mut out.data {
        sig.push_bit(*v > 0.0);
        if *v <= 0.0 {
            *v = 0.0;
        }
    }
    out
}

fn softmax_shadow(x: &F64Tensor) -> F64Tensor {
    let width = *x.dims().last().expect("softmax input is non-scalar");
    let mut out = x.clone();
    for row in out.data.chunks_exact_mut(width) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

fn batchnorm_shadow(x: &F64Tensor, gamma: &F64Tensor, beta: &F64Tensor, epsilon: f32) -> F64Tensor {
    let dims = x.dims();
    let (batch, features, inner) = match *dims {
        [n, f] => (n, f, 1),
        [n, c, h, w] => (n, c, h * w),
        _ => unreachable!("shapes validated at network build"),
    };
    let m = (batch * inner) as f64;
    let mut out = F64Tensor::zeros(dims.to_vec());
    for fi in 0..features {
        let mut sum = 0.0;
        for b in 0..batch {
            for i in 0..inner {
                sum += x.data[(b * features + fi) * inner + i];
            }
        }
        let mean = sum / m;
        let mut sq = 0.0;
        for b in 0..batch {
            for i in 0..inner {
                let v = x.data[(b * features + fi) * inner + i] - mean;
                sq += v * v;
            }
        }
        let inv_std = 1.0 / (sq / m + f64::from(epsilon)).sqrt();
        for b in 0..batch {
            for i in 0..inner {
                let at = (b * features + fi) * inner + i;
                out.data[at] = gamma.data[fi] * (x.data[at] - mean) * inv_std + beta.data[fi];
            }
        }
    }
    out
}

fn lstm_shadow(
    x: &F64Tensor,
    w: &[F64Tensor; 4],
    u: &[F64Tensor; 4],
    b: &[F64Tensor; 4],
    return_sequence: bool,
) -> F64Tensor {
    let &[n, steps, width] = x.dims() else {
        unreachable!("shapes validated at network build")
    };
    let units = w[0].dims()[1];
    let mut h = vec![0.0f64; n * units];
    let mut c = vec![0.0f64; n * units];
    let mut seq = vec![0.0f64; n * steps * units];
    for t in 0..steps {
        let mut h_next = vec![0.0f64; n * units];
        let mut c_next = vec![0.0f64; n * units];
        for img in 0..n {
            for unit in 0..units {
                let mut a = [0.0f64; 4];
                for (k, acc) in a.iter_mut().enumerate() {
                    *acc = b[k].data[unit];
                    for i in 0..width {
                        *acc += x.data[(img * steps + t) * width + i] * w[k].data[i * units + unit];
                    }
                    for j in 0..units {
                        *acc += h[img * units + j] * u[k].data[j * units + unit];
                    }
                }
                let cell = sigmoid(a[1]) * c[img * units + unit] + sigmoid(a[0]) * a[2].tanh();
                let hidden = sigmoid(a[3]) * cell.tanh();
                c_next[img * units + unit] = cell;
                h_next[img * units + unit] = hidden;
                seq[(img * steps + t) * units + unit] = hidden;
            }
        }
        h = h_next;
        c = c_next;
    }
    if return_sequence {
        F64Tensor::new(vec![n, steps, units], seq)
    } else {
        F64Tensor::new(vec![n, units], h)
    }
}

/// Evaluate the whole stack in f64 (training semantics: batch statistics,
/// supplied dropout masks). `masks` has one entry per layer, `Some` only at
/// dropout layers. Discrete decisions are pushed into `sig`.
pub fn shadow_forward(
    specs: &[LayerSpec],
    params: &[ShadowParams],
    x: &F64Tensor,
    masks: &[Option<Vec<f64>>],
    sig: &mut SigHasher,
) -> Result<F64Tensor, NnError> {
    let mut current = x.clone();
    for (idx, (spec, p)) in specs.iter().zip(params).enumerate() {
        current = match (spec, p) {
            (LayerSpec::Conv2D { stride, padding, .. }, ShadowParams::Conv2D { kernels, bias }) => {
                conv_shadow(&current, kernels, bias, *stride, *padding)?
            }
            (LayerSpec::MaxPool2D { pool_h, pool_w }, _) => {
                pool_shadow(&current, *pool_h, *pool_w, sig)
            }
            (LayerSpec::Dense { .. }, ShadowParams::Dense { weight, bias }) => {
                dense_shadow(&current, weight, bias)
            }
            (LayerSpec::ReLU, _) => relu_shadow(&current, sig),
            (LayerSpec::Softmax, _) => softmax_shadow(&current),
            (LayerSpec::Dropout { .. }, _) => {
                let mask = masks[idx].as_ref().expect("dropout mask supplied");
                let mut out = current.clone();
                for (v, m) in out.data.iter_mut().zip(mask) {
                    *v *= m;
                }
                out
            }
            (LayerSpec::BatchNorm { epsilon, .. }, ShadowParams::BatchNorm { gamma, beta }) => {
                batchnorm_shadow(&current, gamma, beta, *epsilon)
            }
            (LayerSpec::Flatten, _) => {
                let n = current.dims()[0];
                let flat = current.len() / n;
                F64Tensor::new(vec![n, flat], current.data)
            }
            (
                LayerSpec::Lstm {
                    return_sequence, ..
                },
                ShadowParams::Lstm { w, u, b },
            ) => lstm_shadow(&current, w, u, b, *return_sequence),
            _ => unreachable!("shadow params built from a checked network"),
        };
    }
    Ok(current)
}
