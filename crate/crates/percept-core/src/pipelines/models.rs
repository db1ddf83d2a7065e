//! The standard layer stacks for the three classifiers.

use crate::nn::{LayerSpec, Padding};

use super::PipelineError;

/// Eye-state model input: one-channel 64x64 crops, `[C, H, W]`.
pub const EYE_INPUT: [usize; 3] = [1, 64, 64];

/// Eye-state class names in label order.
pub const EYE_LABELS: [&str; 2] = ["closed", "open"];

/// Facial-expression model input: one-channel 48x48 faces, `[C, H, W]`.
pub const FER_INPUT: [usize; 3] = [1, 48, 48];

fn conv3x3_same(out_channels: usize) -> LayerSpec {
    LayerSpec::Conv2D {
        out_channels,
        kernel_h: 3,
        kernel_w: 3,
        stride: 1,
        padding: Padding::Same,
    }
}

fn pool2x2() -> LayerSpec {
    LayerSpec::MaxPool2D {
        pool_h: 2,
        pool_w: 2,
    }
}

/// Two-block CNN for open/closed eye crops:
/// Conv(16,3x3,same) -> ReLU -> pool2 -> Conv(32,3x3,same) -> ReLU -> pool2
/// -> Flatten -> Dense(64) -> ReLU -> Dropout(0.5) -> Dense(2) -> Softmax.
pub fn build_eye_model() -> Vec<LayerSpec> {
    vec![
        conv3x3_same(16),
        LayerSpec::ReLU,
        pool2x2(),
        conv3x3_same(32),
        LayerSpec::ReLU,
        pool2x2(),
        LayerSpec::Flatten,
        LayerSpec::Dense { units: 64 },
        LayerSpec::ReLU,
        LayerSpec::Dropout { rate: 0.5 },
        LayerSpec::Dense { units: 2 },
        LayerSpec::Softmax,
    ]
}

/// Two-block CNN with batch normalization for seven-way expressions:
/// [Conv(32) -> BN -> ReLU -> pool2] x2 (64 filters in block two)
/// -> Flatten -> Dense(128) -> ReLU -> Dropout(0.5) -> Dense(7) -> Softmax.
pub fn build_fer_model() -> Vec<LayerSpec> {
    let bn = LayerSpec::BatchNorm {
        momentum: 0.9,
        epsilon: 1e-5,
    };
    vec![
        conv3x3_same(32),
        bn.clone(),
        LayerSpec::ReLU,
        pool2x2(),
        conv3x3_same(64),
        bn,
        LayerSpec::ReLU,
        pool2x2(),
        LayerSpec::Flatten,
        LayerSpec::Dense { units: 128 },
        LayerSpec::ReLU,
        LayerSpec::Dropout { rate: 0.5 },
        LayerSpec::Dense { units: 7 },
        LayerSpec::Softmax,
    ]
}

/// Sequence classifier for closed-set speaker identity:
/// LSTM(128, last output) -> Dense(64) -> ReLU -> Dense(n) -> Softmax,
/// consuming `[N, T, n_coeffs]` feature sequences.
pub fn build_speaker_model(n_speakers: usize) -> Result<Vec<LayerSpec>, PipelineError> {
    if n_speakers < 2 {
        return Err(PipelineError::TooFewSpeakers(n_speakers));
    }
    Ok(vec![
        LayerSpec::Lstm {
            units: 128,
            return_sequence: false,
        },
        LayerSpec::Dense { units: 64 },
        LayerSpec::ReLU,
        LayerSpec::Dense { units: n_speakers },
        LayerSpec::Softmax,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Network;
    use crate::rng::Prng;
    use crate::tensor::Tensor;

    #[test]
    fn eye_model_shapes_and_parameter_count() {
        let mut prng = Prng::new(1);
        let net = Network::build(EYE_INPUT.to_vec(), build_eye_model(), &mut prng).unwrap();
        assert_eq!(net.output_shape(), &[2]);
        // conv1: 16*(1*9)+16          =     160
        // conv2: 32*(16*9)+32         =   4,640
        // dense1: (32*16*16)*64 + 64  = 524,352
        // dense2: 64*2 + 2            =     130
        assert_eq!(net.param_count(), 160 + 4_640 + 524_352 + 130);
        assert_eq!(net.param_count(), 529_282);

        let x = Tensor::uniform(&mut prng, [4, 1, 64, 64], 0.0, 1.0).unwrap();
        let y = net.forward_infer(&x).unwrap();
        assert_eq!(y.dims(), &[4, 2]);
        for r in 0..4 {
            let s: f32 = y.row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-5);
            assert!(y.row(r).iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn fer_model_outputs_seven_classes_and_uses_bn_and_dropout() {
        let specs = build_fer_model();
        assert!(specs
            .iter()
            .any(|s| matches!(s, LayerSpec::BatchNorm { .. })));
        assert!(specs.iter().any(|s| matches!(s, LayerSpec::Dropout { .. })));

        let mut prng = Prng::new(2);
        let net = Network::build(FER_INPUT.to_vec(), specs, &mut prng).unwrap();
        assert_eq!(net.output_shape(), &[7]);

        let x = Tensor::uniform(&mut prng, [3, 1, 48, 48], 0.0, 1.0).unwrap();
        let a = net.forward_infer(&x).unwrap();
        let b = net.forward_infer(&x).unwrap();
        assert_eq!(a.data(), b.data(), "inference has no stochastic layers");
        for r in 0..3 {
            let s: f32 = a.row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn speaker_model_lstm_parameter_count() {
        let mut prng = Prng::new(3);
        let net = Network::build(
            vec![98, 13],
            build_speaker_model(5).unwrap(),
            &mut prng,
        )
        .unwrap();
        assert_eq!(net.output_shape(), &[5]);
        // Four gates, each [13,128] input + [128,128] recurrent + [128] bias.
        let lstm_params: usize = net.params()[0].trainable().iter().map(|t| t.len()).sum();
        assert_eq!(lstm_params, 4 * (13 * 128 + 128 * 128 + 128));
        assert_eq!(lstm_params, 72_704);
    }

    #[test]
    fn speaker_model_accepts_a_single_frame_sequence() {
        let mut prng = Prng::new(4);
        let net = Network::build(vec![1, 13], build_speaker_model(5).unwrap(), &mut prng).unwrap();
        let x = Tensor::uniform(&mut prng, [2, 1, 13], -1.0, 1.0).unwrap();
        let y = net.forward_infer(&x).unwrap();
        assert_eq!(y.dims(), &[2, 5]);
        for r in 0..2 {
            let s: f32 = y.row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn single_speaker_is_rejected() {
        assert!(matches!(
            build_speaker_model(1),
            Err(PipelineError::TooFewSpeakers(1))
        ));
    }

    /// Every shipped stack is differentiable end to end: analytic gradients
    /// match central differences on the same architecture instantiated at
    /// small input dims (layer specs carry no input sizes, so the stacks are
    /// identical — only the inferred dense/conv shapes shrink).
    #[test]
    fn shipped_stacks_pass_the_gradient_check() {
        use crate::nn::gradcheck::{check_ce_gradients, COORDS_PER_TENSOR, FD_STEP, REL_TOLERANCE};

        fn one_hot(labels: &[usize], classes: usize) -> Tensor {
            let mut data = vec![0.0f32; labels.len() * classes];
            for (i, &l) in labels.iter().enumerate() {
                data[i * classes + l] = 1.0;
            }
            Tensor::from_vec([labels.len(), classes], data).unwrap()
        }

        let cases: Vec<(&str, Vec<usize>, Vec<LayerSpec>, Vec<usize>, usize)> = vec![
            ("eye", vec![1, 8, 8], build_eye_model(), vec![0, 1], 2),
            ("fer", vec![1, 8, 8], build_fer_model(), vec![4, 2], 7),
            (
                "speaker",
                vec![3, 13],
                build_speaker_model(3).unwrap(),
                vec![1, 0],
                3,
            ),
        ];
        for (name, input, specs, labels, classes) in cases {
            let mut prng = Prng::new(31);
            let mut net = Network::build(input.clone(), specs, &mut prng).unwrap();
            let mut dims = vec![labels.len()];
            dims.extend(&input);
            let x = Tensor::uniform(&mut prng, dims, -1.0, 1.0).unwrap();
            let y = one_hot(&labels, classes);
            let report =
                check_ce_gradients(&mut net, &x, &y, &mut prng, COORDS_PER_TENSOR, FD_STEP)
                    .unwrap();
            assert!(
                report.worst_rel < REL_TOLERANCE,
                "{name}: worst rel {}",
                report.worst_rel
            );
            assert!(report.checked > 50, "{name}: checked {}", report.checked);
        }
    }
}
