//! Layer composition: build-time shape checking, weight initialization,
//! cached forward passes, and the reverse-order backward pass.

use crate::rng::Prng;
use crate::tensor::Tensor;

use super::conv::conv_output_geometry;
use super::lstm::LstmCache;
use super::{
    batchnorm_backward, batchnorm_infer, batchnorm_train, conv2d_backward, conv2d_forward,
    dense_backward, dense_forward, dropout_backward, dropout_forward_with_mask, dropout_mask,
    lstm_backward, lstm_sequence_forward, maxpool_backward, maxpool_forward, relu_backward,
    relu_forward, softmax_backward, softmax_forward, LayerGrads, LayerParams, LayerSpec, NnError,
};

/// Per-layer values captured during a training-mode forward pass, consumed
/// by [`Network::backward`].
enum LayerCache {
    /// Layer input, re-used by conv and dense backward.
    Stash(Tensor),
    Pool {
        in_dims: Vec<usize>,
        argmax: Vec<usize>,
    },
    Relu {
        mask: Vec<bool>,
    },
    Softmax {
        output: Tensor,
    },
    Dropout {
        mask: Vec<f32>,
    },
    BatchNorm {
        x_hat: Tensor,
        inv_std: Vec<f32>,
    },
    Lstm(LstmCache),
    Flatten {
        in_dims: Vec<usize>,
    },
}

/// Everything [`Network::backward`] needs from one training-mode forward.
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    /// Final network output (softmax probabilities for classifier stacks).
    pub output: Tensor,
}

impl ForwardCache {
    /// The dropout mask drawn for each layer during this forward pass
    /// (`None` for non-dropout layers). Lets a re-evaluation reproduce the
    /// exact same stochastic function.
    pub fn dropout_masks(&self) -> Vec<Option<&[f32]>> {
        self.layers
            .iter()
            .map(|c| match c {
                LayerCache::Dropout { mask } => Some(mask.as_slice()),
                _ => None,
            })
            .collect()
    }
}

/// A feed-forward stack of layers with owned parameters.
///
/// Shapes are inferred per sample (no batch axis) once at build time, so a
/// mismatched architecture fails before any data is touched.
#[derive(Debug)]
pub struct Network {
    specs: Vec<LayerSpec>,
    params: Vec<LayerParams>,
    input_shape: Vec<usize>,
    /// Per-sample output shape after each layer.
    shapes: Vec<Vec<usize>>,
}

/// Per-sample output shape of one layer given its input shape.
fn infer_shape(layer: usize, spec: &LayerSpec, in_shape: &[usize]) -> Result<Vec<usize>, NnError> {
    let flow = |reason: &str| Err(NnError::ShapeFlow {
        layer,
        shape: in_shape.to_vec(),
        reason: reason.to_string(),
    });
    match *spec {
        LayerSpec::Conv2D {
            out_channels,
            kernel_h,
            kernel_w,
            stride,
            padding,
        } => {
            let &[_c, h, w] = in_shape else {
                return flow("convolution expects [C,H,W] input");
            };
            let geo = conv_output_geometry(h, w, kernel_h, kernel_w, stride, padding)?;
            Ok(vec![out_channels, geo.out_h, geo.out_w])
        }
        LayerSpec::MaxPool2D { pool_h, pool_w } => {
            let &[c, h, w] = in_shape else {
                return flow("max pool expects [C,H,W] input");
            };
            if h % pool_h != 0 || w % pool_w != 0 {
                return Err(NnError::PoolNotDivisible {
                    ph: pool_h,
                    pw: pool_w,
                    h,
                    w,
                });
            }
            Ok(vec![c, h / pool_h, w / pool_w])
        }
        LayerSpec::Dense { units } => {
            if in_shape.len() != 1 {
                return flow("dense expects a flat feature vector; add Flatten first");
            }
            Ok(vec![units])
        }
        LayerSpec::ReLU | LayerSpec::Dropout { .. } => Ok(in_shape.to_vec()),
        LayerSpec::Softmax => {
            if in_shape.len() != 1 {
                return flow("softmax expects a flat class-score vector");
            }
            Ok(in_shape.to_vec())
        }
        LayerSpec::BatchNorm { .. } => {
            if in_shape.len() != 1 && in_shape.len() != 3 {
                return flow("batch norm expects [F] or [C,H,W] input");
            }
            Ok(in_shape.to_vec())
        }
        LayerSpec::Flatten => Ok(vec![in_shape.iter().product()]),
        LayerSpec::Lstm {
            units,
            return_sequence,
        } => {
            let &[steps, _width] = in_shape else {
                return flow("lstm expects [T,features] input");
            };
            if return_sequence {
                Ok(vec![steps, units])
            } else {
                Ok(vec![units])
            }
        }
    }
}

/// Expected parameter-tensor dims for a layer, in [`LayerParams::named`]
/// order. Empty for parameterless layers.
fn expected_param_dims(spec: &LayerSpec, in_shape: &[usize]) -> Vec<Vec<usize>> {
    match *spec {
        LayerSpec::Conv2D {
            out_channels,
            kernel_h,
            kernel_w,
            ..
        } => {
            let c = in_shape[0];
            vec![
                vec![out_channels, c, kernel_h, kernel_w],
                vec![out_channels],
            ]
        }
        LayerSpec::Dense { units } => vec![vec![in_shape[0], units], vec![units]],
        LayerSpec::BatchNorm { .. } => {
            let features = in_shape[0];
            vec![vec![features]; 4]
        }
        LayerSpec::Lstm { units, .. } => {
            let width = in_shape[1];
            let mut dims = vec![vec![width, units]; 4];
            dims.extend(vec![vec![units, units]; 4]);
            dims.extend(vec![vec![units]; 4]);
            dims
        }
        _ => vec![],
    }
}

/// Whether the first compute layer after `layer` is a ReLU. Shape-preserving
/// layers (batch norm, dropout, flatten, pooling) are skipped, matching how
/// the activation actually sees this layer's output.
fn feeds_relu(specs: &[LayerSpec], layer: usize) -> bool {
    for spec in &specs[layer + 1..] {
        match spec {
            LayerSpec::ReLU => return true,
            LayerSpec::BatchNorm { .. }
            | LayerSpec::Dropout { .. }
            | LayerSpec::Flatten
            | LayerSpec::MaxPool2D { .. } => continue,
            _ => return false,
        }
    }
    false
}

/// Draw initial parameters: He-uniform fan-in scaling into ReLU, Glorot
/// otherwise; biases zero except the LSTM forget gate at 1.0.
fn init_params(
    spec: &LayerSpec,
    in_shape: &[usize],
    he: bool,
    prng: &mut Prng,
) -> Result<LayerParams, NnError> {
    let limit = |fan_in: usize, fan_out: usize| {
        if he {
            (6.0 / fan_in as f32).sqrt()
        } else {
            (6.0 / (fan_in + fan_out) as f32).sqrt()
        }
    };
    Ok(match *spec {
        LayerSpec::Conv2D {
            out_channels,
            kernel_h,
            kernel_w,
            ..
        } => {
            let c = in_shape[0];
            let fan_in = c * kernel_h * kernel_w;
            let fan_out = out_channels * kernel_h * kernel_w;
            let lim = limit(fan_in, fan_out);
            LayerParams::Conv2D {
                kernels: Tensor::uniform(
                    prng,
                    [out_channels, c, kernel_h, kernel_w],
                    -lim,
                    lim,
                )?,
                bias: Tensor::zeros([out_channels])?,
            }
        }
        LayerSpec::Dense { units } => {
            let fan_in = in_shape[0];
            let lim = limit(fan_in, units);
            LayerParams::Dense {
                weight: Tensor::uniform(prng, [fan_in, units], -lim, lim)?,
                bias: Tensor::zeros([units])?,
            }
        }
        LayerSpec::BatchNorm { .. } => {
            let features = in_shape[0];
            LayerParams::BatchNorm {
                gamma: Tensor::filled([features], 1.0)?,
                beta: Tensor::zeros([features])?,
                running_mean: Tensor::zeros([features])?,
                running_var: Tensor::filled([features], 1.0)?,
            }
        }
        LayerSpec::Lstm { units, .. } => {
            // Glorot throughout: the gates end in sigmoid/tanh, never ReLU.
            let width = in_shape[1];
            let w_lim = (6.0 / (width + units) as f32).sqrt();
            let u_lim = (6.0 / (units + units) as f32).sqrt();
            let mut draw_w =
                || -> Result<Tensor, NnError> { Ok(Tensor::uniform(prng, [width, units], -w_lim, w_lim)?) };
            let w = [draw_w()?, draw_w()?, draw_w()?, draw_w()?];
            let mut draw_u =
                || -> Result<Tensor, NnError> { Ok(Tensor::uniform(prng, [units, units], -u_lim, u_lim)?) };
            let u = [draw_u()?, draw_u()?, draw_u()?, draw_u()?];
            let b = [
                Tensor::zeros([units])?,
                // Forget-gate bias starts at 1 so early training retains memory.
                Tensor::filled([units], 1.0)?,
                Tensor::zeros([units])?,
                Tensor::zeros([units])?,
            ];
            LayerParams::Lstm { w, u, b }
        }
        _ => LayerParams::None,
    })
}

impl Network {
    /// Validate the architecture, infer all shapes, and draw initial weights.
    pub fn build(
        input_shape: Vec<usize>,
        specs: Vec<LayerSpec>,
        prng: &mut Prng,
    ) -> Result<Network, NnError> {
        let shapes = Self::check_specs(&input_shape, &specs)?;
        let mut params = Vec::with_capacity(specs.len());
        for (idx, spec) in specs.iter().enumerate() {
            let in_shape = if idx == 0 {
                &input_shape
            } else {
                &shapes[idx - 1]
            };
            params.push(init_params(spec, in_shape, feeds_relu(&specs, idx), prng)?);
        }
        Ok(Network {
            specs,
            params,
            input_shape,
            shapes,
        })
    }

    /// Reassemble a network from deserialized parts, verifying that every
    /// parameter tensor matches the spec's expected dims.
    pub fn from_parts(
        input_shape: Vec<usize>,
        specs: Vec<LayerSpec>,
        params: Vec<LayerParams>,
    ) -> Result<Network, NnError> {
        let shapes = Self::check_specs(&input_shape, &specs)?;
        if params.len() != specs.len() {
            return Err(NnError::ParamMismatch {
                layer: params.len().min(specs.len()),
            });
        }
        for (idx, (spec, layer_params)) in specs.iter().zip(&params).enumerate() {
            let in_shape = if idx == 0 {
                &input_shape
            } else {
                &shapes[idx - 1]
            };
            let want = expected_param_dims(spec, in_shape);
            let got = layer_params.named();
            if want.len() != got.len()
                || want
                    .iter()
                    .zip(&got)
                    .any(|(dims, (_, tensor))| dims.as_slice() != tensor.dims())
            {
                return Err(NnError::ParamMismatch { layer: idx });
            }
        }
        Ok(Network {
            specs,
            params,
            input_shape,
            shapes,
        })
    }

    fn check_specs(
        input_shape: &[usize],
        specs: &[LayerSpec],
    ) -> Result<Vec<Vec<usize>>, NnError> {
        let mut shapes = Vec::with_capacity(specs.len());
        let mut current = input_shape.to_vec();
        for (idx, spec) in specs.iter().enumerate() {
            spec.validate(idx)?;
            current = infer_shape(idx, spec, &current)?;
            shapes.push(current.clone());
        }
        Ok(shapes)
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn params(&self) -> &[LayerParams] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [LayerParams] {
        &mut self.params
    }

    /// Per-sample input shape (no batch axis).
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    /// Per-sample output shape of the last layer.
    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().map_or(&self.input_shape, |s| s)
    }

    /// Total trainable element count.
    pub fn param_count(&self) -> usize {
        self.params
            .iter()
            .flat_map(|p| p.trainable())
            .map(Tensor::len)
            .sum()
    }

    /// All parameter tensors keyed `layer{idx}.{name}`, in layer order.
    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (idx, params) in self.params.iter().enumerate() {
            for (name, tensor) in params.named() {
                out.push((format!("layer{idx}.{name}"), tensor));
            }
        }
        out
    }

    fn check_input(&self, x: &Tensor) -> Result<(), NnError> {
        if x.rank() < 1 || x.dims()[1..] != self.input_shape[..] || x.dims()[0] == 0 {
            return Err(NnError::InputShape {
                want: self.input_shape.clone(),
                got: x.dims().to_vec(),
            });
        }
        Ok(())
    }

    /// Deterministic inference pass: dropout is identity, batch norm uses
    /// running statistics.
    pub fn forward_infer(&self, x: &Tensor) -> Result<Tensor, NnError> {
        self.check_input(x)?;
        let mut current = x.clone();
        for (spec, params) in self.specs.iter().zip(&self.params) {
            current = match (spec, params) {
                (LayerSpec::Conv2D { stride, padding, .. }, LayerParams::Conv2D { kernels, bias }) => {
                    conv2d_forward(&current, kernels, bias, *stride, *padding)?
                }
                (LayerSpec::MaxPool2D { pool_h, pool_w }, _) => {
                    maxpool_forward(&current, *pool_h, *pool_w)?.0
                }
                (LayerSpec::Dense { .. }, LayerParams::Dense { weight, bias }) => {
                    dense_forward(&current, weight, bias)?
                }
                (LayerSpec::ReLU, _) => relu_forward(&current).0,
                (LayerSpec::Softmax, _) => softmax_forward(&current)?,
                (LayerSpec::Dropout { .. }, _) => current,
                (
                    LayerSpec::BatchNorm { epsilon, .. },
                    LayerParams::BatchNorm {
                        gamma,
                        beta,
                        running_mean,
                        running_var,
                    },
                ) => batchnorm_infer(&current, gamma, beta, running_mean, running_var, *epsilon)?,
                (LayerSpec::Flatten, _) => {
                    let n = current.dims()[0];
                    let flat = current.len() / n;
                    current.reshape([n, flat])?
                }
                (
                    LayerSpec::Lstm {
                        return_sequence, ..
                    },
                    LayerParams::Lstm { w, u, b },
                ) => lstm_sequence_forward(&current, w, u, b, *return_sequence)?.0,
                _ => unreachable!("params checked against specs at construction"),
            };
        }
        Ok(current)
    }

    /// Training pass: dropout masks drawn from `prng`, batch norm uses batch
    /// statistics and updates its running averages in place. Returns the
    /// output and the cache required by [`Network::backward`].
    pub fn forward_train(
        &mut self,
        x: &Tensor,
        prng: &mut Prng,
    ) -> Result<(Tensor, ForwardCache), NnError> {
        self.check_input(x)?;
        let mut current = x.clone();
        let mut layers = Vec::with_capacity(self.specs.len());
        for (spec, params) in self.specs.iter().zip(self.params.iter_mut()) {
            let (next, cache) = match (spec, &mut *params) {
                (LayerSpec::Conv2D { stride, padding, .. }, LayerParams::Conv2D { kernels, bias }) => {
                    let out = conv2d_forward(&current, kernels, bias, *stride, *padding)?;
                    (out, LayerCache::Stash(current))
                }
                (LayerSpec::MaxPool2D { pool_h, pool_w }, _) => {
                    let (out, argmax) = maxpool_forward(&current, *pool_h, *pool_w)?;
                    (
                        out,
                        LayerCache::Pool {
                            in_dims: current.dims().to_vec(),
                            argmax,
                        },
                    )
                }
                (LayerSpec::Dense { .. }, LayerParams::Dense { weight, bias }) => {
                    let out = dense_forward(&current, weight, bias)?;
                    (out, LayerCache::Stash(current))
                }
                (LayerSpec::ReLU, _) => {
                    let (out, mask) = relu_forward(&current);
                    (out, LayerCache::Relu { mask })
                }
                (LayerSpec::Softmax, _) => {
                    let out = softmax_forward(&current)?;
                    (out.clone(), LayerCache::Softmax { output: out })
                }
                (LayerSpec::Dropout { rate }, _) => {
                    let mask = dropout_mask(current.len(), *rate, prng)?;
                    let out = dropout_forward_with_mask(&current, &mask);
                    (out, LayerCache::Dropout { mask })
                }
                (
                    LayerSpec::BatchNorm { momentum, epsilon },
                    LayerParams::BatchNorm {
                        gamma,
                        beta,
                        running_mean,
                        running_var,
                    },
                ) => {
                    let fwd = batchnorm_train(&current, gamma, beta, *epsilon)?;
                    super::batchnorm::update_running_stats(
                        running_mean,
                        running_var,
                        *momentum,
                        &fwd.batch_mean,
                        &fwd.batch_var,
                    );
                    (
                        fwd.output,
                        LayerCache::BatchNorm {
                            x_hat: fwd.x_hat,
                            inv_std: fwd.inv_std,
                        },
                    )
                }
                (LayerSpec::Flatten, _) => {
                    let n = current.dims()[0];
                    let flat = current.len() / n;
                    let in_dims = current.dims().to_vec();
                    (current.reshape([n, flat])?, LayerCache::Flatten { in_dims })
                }
                (
                    LayerSpec::Lstm {
                        return_sequence, ..
                    },
                    LayerParams::Lstm { w, u, b },
                ) => {
                    let (out, cache) = lstm_sequence_forward(&current, w, u, b, *return_sequence)?;
                    (out, LayerCache::Lstm(cache))
                }
                _ => unreachable!("params checked against specs at construction"),
            };
            layers.push(cache);
            current = next;
        }
        Ok((
            current.clone(),
            ForwardCache {
                layers,
                output: current,
            },
        ))
    }

    /// Full backward pass from an upstream gradient at the network output.
    /// Returns per-layer parameter gradients (empty for parameterless layers,
    /// ordered like [`LayerParams::trainable`]) and the input gradient.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: &Tensor,
    ) -> Result<(Vec<LayerGrads>, Tensor), NnError> {
        self.backward_from(cache, upstream, self.specs.len())
    }

    /// Backward pass for a fused softmax + cross-entropy head. `dlogits`
    /// must already be the loss gradient with respect to the pre-softmax
    /// scores (for cross-entropy: `(probabilities - one_hot) / batch`).
    /// The final layer must be `Softmax`; it is skipped and receives an
    /// empty gradient entry.
    pub fn backward_fused_ce(
        &self,
        cache: &ForwardCache,
        dlogits: &Tensor,
    ) -> Result<(Vec<LayerGrads>, Tensor), NnError> {
        if !matches!(self.specs.last(), Some(LayerSpec::Softmax)) {
            return Err(NnError::NoFinalSoftmax);
        }
        let (mut grads, dx) = self.backward_from(cache, dlogits, self.specs.len() - 1)?;
        grads.push(LayerGrads::empty());
        Ok((grads, dx))
    }

    /// Backward through layers `0..upto`, consuming caches in reverse.
    fn backward_from(
        &self,
        cache: &ForwardCache,
        upstream: &Tensor,
        upto: usize,
    ) -> Result<(Vec<LayerGrads>, Tensor), NnError> {
        if cache.layers.len() != self.specs.len() {
            return Err(NnError::MissingCache);
        }
        let mut grads_rev: Vec<LayerGrads> = Vec::with_capacity(upto);
        let mut up = upstream.clone();
        for idx in (0..upto).rev() {
            let spec = &self.specs[idx];
            let params = &self.params[idx];
            let layer_cache = &cache.layers[idx];
            let (layer_grads, dx) = match (spec, params, layer_cache) {
                (
                    LayerSpec::Conv2D { stride, padding, .. },
                    LayerParams::Conv2D { kernels, bias },
                    LayerCache::Stash(input),
                ) => {
                    let (dk, db, dx) = conv2d_backward(input, kernels, bias, *stride, *padding, &up)?;
                    (
                        LayerGrads {
                            tensors: vec![dk, db],
                        },
                        dx,
                    )
                }
                (LayerSpec::MaxPool2D { .. }, _, LayerCache::Pool { in_dims, argmax }) => {
                    (LayerGrads::empty(), maxpool_backward(in_dims, argmax, &up)?)
                }
                (
                    LayerSpec::Dense { .. },
                    LayerParams::Dense { weight, .. },
                    LayerCache::Stash(input),
                ) => {
                    let (dw, db, dx) = dense_backward(input, weight, &up)?;
                    (
                        LayerGrads {
                            tensors: vec![dw, db],
                        },
                        dx,
                    )
                }
                (LayerSpec::ReLU, _, LayerCache::Relu { mask }) => {
                    (LayerGrads::empty(), relu_backward(mask, &up))
                }
                (LayerSpec::Softmax, _, LayerCache::Softmax { output }) => {
                    (LayerGrads::empty(), softmax_backward(output, &up)?)
                }
                (LayerSpec::Dropout { .. }, _, LayerCache::Dropout { mask }) => {
                    (LayerGrads::empty(), dropout_backward(mask, &up))
                }
                (
                    LayerSpec::BatchNorm { .. },
                    LayerParams::BatchNorm { gamma, .. },
                    LayerCache::BatchNorm { x_hat, inv_std },
                ) => {
                    let (d_gamma, d_beta, dx) = batchnorm_backward(x_hat, inv_std, gamma, &up)?;
                    (
                        LayerGrads {
                            tensors: vec![d_gamma, d_beta],
                        },
                        dx,
                    )
                }
                (LayerSpec::Flatten, _, LayerCache::Flatten { in_dims }) => {
                    (LayerGrads::empty(), up.reshape(in_dims.clone())?)
                }
                (
                    LayerSpec::Lstm {
                        return_sequence, ..
                    },
                    LayerParams::Lstm { w, u, .. },
                    LayerCache::Lstm(lstm_cache),
                ) => {
                    let (tensors, dx) = lstm_backward(lstm_cache, w, u, *return_sequence, &up)?;
                    (LayerGrads { tensors }, dx)
                }
                _ => return Err(NnError::MissingCache),
            };
            grads_rev.push(layer_grads);
            up = dx;
        }
        grads_rev.reverse();
        Ok((grads_rev, up))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Padding;

    fn eye_like_specs() -> Vec<LayerSpec> {
        vec![
            LayerSpec::Conv2D {
                out_channels: 4,
                kernel_h: 3,
                kernel_w: 3,
                stride: 1,
                padding: Padding::Same,
            },
            LayerSpec::ReLU,
            LayerSpec::MaxPool2D {
                pool_h: 2,
                pool_w: 2,
            },
            LayerSpec::Flatten,
            LayerSpec::Dense { units: 8 },
            LayerSpec::ReLU,
            LayerSpec::Dropout { rate: 0.5 },
            LayerSpec::Dense { units: 3 },
            LayerSpec::Softmax,
        ]
    }

    #[test]
    fn build_infers_shapes_and_counts_params() {
        let mut prng = Prng::new(1);
        let net = Network::build(vec![1, 8, 8], eye_like_specs(), &mut prng).unwrap();
        assert_eq!(net.output_shape(), [3]);
        // conv 4*1*3*3+4, dense 64*8+8, dense 8*3+3.
        assert_eq!(net.param_count(), 40 + 520 + 27);
    }

    #[test]
    fn incompatible_adjacency_fails_at_build() {
        let mut prng = Prng::new(1);
        // Dense straight after conv output (rank-3) without Flatten.
        let err = Network::build(
            vec![1, 8, 8],
            vec![
                LayerSpec::Conv2D {
                    out_channels: 2,
                    kernel_h: 3,
                    kernel_w: 3,
                    stride: 1,
                    padding: Padding::Same,
                },
                LayerSpec::Dense { units: 4 },
            ],
            &mut prng,
        )
        .unwrap_err();
        assert!(matches!(err, NnError::ShapeFlow { layer: 1, .. }));
    }

    #[test]
    fn pool_that_does_not_divide_fails_at_build() {
        let mut prng = Prng::new(1);
        let err = Network::build(
            vec![1, 7, 7],
            vec![LayerSpec::MaxPool2D {
                pool_h: 2,
                pool_w: 2,
            }],
            &mut prng,
        )
        .unwrap_err();
        assert!(matches!(err, NnError::PoolNotDivisible { .. }));
    }

    #[test]
    fn oversized_valid_kernel_fails_at_build() {
        let mut prng = Prng::new(1);
        let err = Network::build(
            vec![1, 2, 2],
            vec![LayerSpec::Conv2D {
                out_channels: 1,
                kernel_h: 3,
                kernel_w: 3,
                stride: 1,
                padding: Padding::Valid,
            }],
            &mut prng,
        )
        .unwrap_err();
        assert!(matches!(err, NnError::KernelTooLarge { .. }));
    }

    #[test]
    fn empty_layer_list_is_identity() {
        let mut prng = Prng::new(1);
        let net = Network::build(vec![4], vec![], &mut prng).unwrap();
        let x = Tensor::from_vec([2, 4], (0..8).map(|v| v as f32).collect()).unwrap();
        assert_eq!(net.forward_infer(&x).unwrap(), x);
    }

    #[test]
    fn flatten_reshapes_batchwise() {
        let mut prng = Prng::new(1);
        let net = Network::build(vec![1, 2, 2], vec![LayerSpec::Flatten], &mut prng).unwrap();
        let x = Tensor::from_vec([1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = net.forward_infer(&x).unwrap();
        assert_eq!(y.dims(), [1, 4]);
        assert_eq!(y.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn wrong_input_shape_is_rejected() {
        let mut prng = Prng::new(1);
        let net = Network::build(vec![4], vec![LayerSpec::Softmax], &mut prng).unwrap();
        let x = Tensor::zeros([2, 5]).unwrap();
        assert!(matches!(
            net.forward_infer(&x).unwrap_err(),
            NnError::InputShape { .. }
        ));
    }

    #[test]
    fn infer_is_deterministic_while_train_dropout_is_not_identity() {
        let mut prng = Prng::new(7);
        let mut net = Network::build(vec![1, 8, 8], eye_like_specs(), &mut prng).unwrap();
        let x = Tensor::uniform(&mut prng, [3, 1, 8, 8], 0.0, 1.0).unwrap();
        let a = net.forward_infer(&x).unwrap();
        let b = net.forward_infer(&x).unwrap();
        assert_eq!(a, b);
        let (t, _) = net.forward_train(&x, &mut prng).unwrap();
        assert_ne!(a, t, "dropout should perturb training-mode outputs");
        // Softmax rows still sum to one either way.
        for row in t.data().chunks_exact(3) {
            let s: f32 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn backward_covers_every_layer_and_matches_input_shape() {
        let mut prng = Prng::new(11);
        let mut net = Network::build(vec![1, 8, 8], eye_like_specs(), &mut prng).unwrap();
        let x = Tensor::uniform(&mut prng, [2, 1, 8, 8], 0.0, 1.0).unwrap();
        let (out, cache) = net.forward_train(&x, &mut prng).unwrap();
        let up = Tensor::filled(out.dims().to_vec(), 1.0).unwrap();
        let (grads, dx) = net.backward(&cache, &up).unwrap();
        assert_eq!(grads.len(), net.specs().len());
        assert_eq!(dx.dims(), x.dims());
        for (grad, params) in grads.iter().zip(net.params()) {
            assert_eq!(grad.tensors.len(), params.trainable().len());
            for (g, p) in grad.tensors.iter().zip(params.trainable()) {
                assert_eq!(g.dims(), p.dims());
            }
        }
    }

    #[test]
    fn fused_ce_backward_requires_final_softmax() {
        let mut prng = Prng::new(3);
        let mut net = Network::build(vec![4], vec![LayerSpec::Dense { units: 2 }], &mut prng).unwrap();
        let x = Tensor::zeros([1, 4]).unwrap();
        let (out, cache) = net.forward_train(&x, &mut prng).unwrap();
        let err = net.backward_fused_ce(&cache, &out).unwrap_err();
        assert!(matches!(err, NnError::NoFinalSoftmax));
    }

    #[test]
    fn from_parts_round_trips_and_rejects_mismatches() {
        let mut prng = Prng::new(9);
        let net = Network::build(vec![1, 8, 8], eye_like_specs(), &mut prng).unwrap();
        let rebuilt = Network::from_parts(
            net.input_shape().to_vec(),
            net.specs().to_vec(),
            net.params().to_vec(),
        )
        .unwrap();
        let x = Tensor::uniform(&mut prng, [2, 1, 8, 8], 0.0, 1.0).unwrap();
        assert_eq!(
            net.forward_infer(&x).unwrap(),
            rebuilt.forward_infer(&x).unwrap()
        );

        // Swap two layers' params: dims no longer line up.
        let mut bad = net.params().to_vec();
        bad.swap(0, 4);
        let err =
            Network::from_parts(net.input_shape().to_vec(), net.specs().to_vec(), bad).unwrap_err();
        assert!(matches!(err, NnError::ParamMismatch { .. }));
    }

    #[test]
    fn named_params_use_layer_prefixes() {
        let mut prng = Prng::new(2);
        let net = Network::build(
            vec![3, 4],
            vec![
                LayerSpec::Lstm {
                    units: 5,
                    return_sequence: false,
                },
                LayerSpec::Dense { units: 2 },
                LayerSpec::Softmax,
            ],
            &mut prng,
        )
        .unwrap();
        let names: Vec<String> = net.named_params().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names.len(), 14);
        assert_eq!(names[0], "layer0.w_i");
        assert_eq!(names[11], "layer0.b_o");
        assert_eq!(names[12], "layer1.weight");
        assert_eq!(names[13], "layer1.bias");
    }

    #[test]
    fn lstm_forget_bias_initializes_to_one() {
        let mut prng = Prng::new(2);
        let net = Network::build(
            vec![3, 4],
            vec![LayerSpec::Lstm {
                units: 5,
                return_sequence: false,
            }],
            &mut prng,
        )
        .unwrap();
        let LayerParams::Lstm { b, .. } = &net.params()[0] else {
            panic!("expected lstm params")
        };
        assert!(b[1].data().iter().all(|&v| v == 1.0));
        assert!(b[0].data().iter().all(|&v| v == 0.0));
    }
}
