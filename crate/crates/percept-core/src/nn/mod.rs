//! Neural-network layers with exact analytic backward passes.
//!
//! Every layer kind used by the three model families lives here:
//! convolution, max-pooling, dense, ReLU, softmax, dropout, batch
//! normalization, flatten, and LSTM. [`Network`] composes layers with
//! build-time shape checking; [`gradcheck`] verifies every backward pass
//! against 64-bit central finite differences.

mod activations;
mod batchnorm;
mod conv;
mod dense;
mod dropout;
pub mod gradcheck;
mod lstm;
mod network;
mod pool;
mod shadow;

pub use activations::{relu_backward, relu_forward, softmax_backward, softmax_forward};
pub use batchnorm::{batchnorm_backward, batchnorm_infer, batchnorm_train, BnForward};
pub use conv::{conv2d_backward, conv2d_forward, conv2d_reference, conv_output_geometry};
pub use dense::{dense_backward, dense_forward};
pub use dropout::{dropout_backward, dropout_forward_with_mask, dropout_mask};
pub use lstm::{lstm_backward, lstm_cell_step, lstm_sequence_forward, LstmCache};
pub use network::{ForwardCache, Network};
pub use pool::{maxpool_backward, maxpool_forward};

use crate::tensor::{Tensor, TensorError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("layer {layer}: {reason}")]
    BadSpec { layer: usize, reason: String },
    #[error("layer {layer} cannot consume shape {shape:?}: {reason}")]
    ShapeFlow {
        layer: usize,
        shape: Vec<usize>,
        reason: String,
    },
    #[error("kernel {kh}x{kw} exceeds input {h}x{w} under valid padding")]
    KernelTooLarge {
        kh: usize,
        kw: usize,
        h: usize,
        w: usize,
    },
    #[error("pool {ph}x{pw} does not divide spatial dims {h}x{w}")]
    PoolNotDivisible {
        ph: usize,
        pw: usize,
        h: usize,
        w: usize,
    },
    #[error("batch normalization needs batch >= 2 in train mode, got {0}")]
    BatchTooSmall(usize),
    #[error("dropout rate {0} outside (0, 1)")]
    BadDropoutRate(f32),
    #[error("input shape {got:?} does not match network input {want:?}")]
    InputShape { want: Vec<usize>, got: Vec<usize> },
    #[error("backward called without a training-mode forward cache")]
    MissingCache,
    #[error("fused cross-entropy backward requires a final softmax layer")]
    NoFinalSoftmax,
    #[error("parameter set does not match layer {layer} spec")]
    ParamMismatch { layer: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Forward pass mode: training (dropout active, batch-norm batch statistics)
/// or inference (deterministic).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Zero-padding scheme for convolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// No padding; output shrinks by kernel - 1 per axis (stride 1).
    Valid,
    /// Zero-pad so the output spatial size is ceil(input / stride).
    Same,
}

/// Architecture description of a single layer.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Conv2D {
        out_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        stride: usize,
        padding: Padding,
    },
    MaxPool2D {
        pool_h: usize,
        pool_w: usize,
    },
    Dense {
        units: usize,
    },
    ReLU,
    Softmax,
    Dropout {
        rate: f32,
    },
    BatchNorm {
        momentum: f32,
        epsilon: f32,
    },
    Flatten,
    Lstm {
        units: usize,
        return_sequence: bool,
    },
}

impl LayerSpec {
    /// Validate the spec's own invariants (shape flow is checked at build).
    pub fn validate(&self, layer: usize) -> Result<(), NnError> {
        let fail = |reason: &str| Err(NnError::BadSpec {
            layer,
            reason: reason.to_string(),
        });
        match *self {
            LayerSpec::Conv2D {
                out_channels,
                kernel_h,
                kernel_w,
                stride,
                ..
            } => {
                if out_channels == 0 || kernel_h == 0 || kernel_w == 0 || stride == 0 {
                    return fail("conv extents and stride must be >= 1");
                }
            }
            LayerSpec::MaxPool2D { pool_h, pool_w } => {
                if pool_h == 0 || pool_w == 0 {
                    return fail("pool extents must be >= 1");
                }
            }
            LayerSpec::Dense { units } => {
                if units == 0 {
                    return fail("dense units must be >= 1");
                }
            }
            LayerSpec::Dropout { rate } => {
                if !(rate > 0.0 && rate < 1.0) {
                    return Err(NnError::BadDropoutRate(rate));
                }
            }
            LayerSpec::BatchNorm { momentum, epsilon } => {
                if !(0.0..1.0).contains(&momentum) {
                    return fail("batch-norm momentum must be in [0, 1)");
                }
                if !(epsilon > 0.0) {
                    return fail("batch-norm epsilon must be > 0");
                }
            }
            LayerSpec::Lstm { units, .. } => {
                if units == 0 {
                    return fail("lstm units must be >= 1");
                }
            }
            LayerSpec::ReLU | LayerSpec::Softmax | LayerSpec::Flatten => {}
        }
        Ok(())
    }

    /// Whether this layer owns parameter tensors.
    pub fn has_params(&self) -> bool {
        matches!(
            self,
            LayerSpec::Conv2D { .. }
                | LayerSpec::Dense { .. }
                | LayerSpec::BatchNorm { .. }
                | LayerSpec::Lstm { .. }
        )
    }
}

/// LSTM gate order used everywhere: input, forget, candidate, output.
pub const LSTM_GATES: [&str; 4] = ["i", "f", "g", "o"];

/// Parameter tensors for one layer.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams {
    None,
    Conv2D {
        /// `[out_channels, in_channels, kh, kw]`
        kernels: Tensor,
        /// `[out_channels]`
        bias: Tensor,
    },
    Dense {
        /// `[in, units]`
        weight: Tensor,
        /// `[units]`
        bias: Tensor,
    },
    BatchNorm {
        gamma: Tensor,
        beta: Tensor,
        running_mean: Tensor,
        running_var: Tensor,
    },
    Lstm {
        /// Input weights per gate (i, f, g, o), each `[in, units]`.
        w: [Tensor; 4],
        /// Recurrent weights per gate, each `[units, units]`.
        u: [Tensor; 4],
        /// Biases per gate, each `[units]`.
        b: [Tensor; 4],
    },
}

impl LayerParams {
    /// Tensors updated by the optimizer, in a fixed order. Batch-norm running
    /// statistics are state, not trainable parameters, and are excluded.
    pub fn trainable(&self) -> Vec<&Tensor> {
        match self {
            LayerParams::None => vec![],
            LayerParams::Conv2D { kernels, bias } => vec![kernels, bias],
            LayerParams::Dense { weight, bias } => vec![weight, bias],
            LayerParams::BatchNorm { gamma, beta, .. } => vec![gamma, beta],
            LayerParams::Lstm { w, u, b } => {
                w.iter().chain(u.iter()).chain(b.iter()).collect()
            }
        }
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            LayerParams::None => vec![],
            LayerParams::Conv2D { kernels, bias } => vec![kernels, bias],
            LayerParams::Dense { weight, bias } => vec![weight, bias],
            LayerParams::BatchNorm { gamma, beta, .. } => vec![gamma, beta],
            LayerParams::Lstm { w, u, b } => w
                .iter_mut()
                .chain(u.iter_mut())
                .chain(b.iter_mut())
                .collect(),
        }
    }

    /// All tensors with their canonical names, including non-trainable state,
    /// in serialization order.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        match self {
            LayerParams::None => vec![],
            LayerParams::Conv2D { kernels, bias } => vec![
                ("kernels".to_string(), kernels),
                ("bias".to_string(), bias),
            ],
            LayerParams::Dense { weight, bias } => {
                vec![("weight".to_string(), weight), ("bias".to_string(), bias)]
            }
            LayerParams::BatchNorm {
                gamma,
                beta,
                running_mean,
                running_var,
            } => vec![
                ("gamma".to_string(), gamma),
                ("beta".to_string(), beta),
                ("running_mean".to_string(), running_mean),
                ("running_var".to_string(), running_var),
            ],
            LayerParams::Lstm { w, u, b } => {
                let mut out = Vec::with_capacity(12);
                for (t, g) in w.iter().zip(LSTM_GATES) {
                    out.push((format!("w_{g}"), t));
                }
                for (t, g) in u.iter().zip(LSTM_GATES) {
                    out.push((format!("u_{g}"), t));
                }
                for (t, g) in b.iter().zip(LSTM_GATES) {
                    out.push((format!("b_{g}"), t));
                }
                out
            }
        }
    }

    /// Total element count across all tensors (trainable and state).
    pub fn param_count(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }
}

/// Per-layer gradients, ordered to match [`LayerParams::trainable`].
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub tensors: Vec<Tensor>,
}

impl LayerGrads {
    pub fn empty() -> Self {
        LayerGrads { tensors: vec![] }
    }
}
