//! Strict TOML run configuration.
//!
//! Unknown keys are rejected so typos fail loudly. Relative paths are
//! resolved against the config file's directory, so a config and its data
//! can move together. The seed is mandatory — there is no wall-clock
//! fallback — which makes every artifact reproducible from the config
//! alone; `--seed` and `--out` override their config counterparts.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use percept_core::nn::{LayerSpec, Padding};
use percept_core::pipelines::{PipelineConfig, Task};
use percept_core::train::SplitSpec;

use crate::error::CliError;

/// A fully resolved run: the pipeline inputs plus CLI-level settings.
#[derive(Debug)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub out_dir: PathBuf,
    /// `eval` consumes only the re-derived test split instead of the whole
    /// dataset file.
    pub eval_test_split_only: bool,
    pub quiet: bool,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub quiet: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    task: String,
    /// Eye/speaker: `path,label` manifest. Fer: the pixel CSV itself.
    data: PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
    /// What `percept eval` consumes: "all" (default) or "test", the test
    /// split re-derived from `[split]` and the seed.
    eval_split: Option<String>,
    quiet: Option<bool>,
    split: Option<RawSplit>,
    train: Option<RawTrain>,
    augment: Option<RawAugment>,
    mfcc: Option<RawMfcc>,
    labels: Option<RawLabels>,
    /// `[[layer]]` tables replacing the task's standard stack.
    #[serde(default)]
    layer: Vec<RawLayer>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSplit {
    train: f64,
    val: f64,
    test: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrain {
    epochs: Option<usize>,
    batch_size: Option<usize>,
    patience: Option<usize>,
    min_delta: Option<f32>,
    augment: Option<bool>,
    learning_rate: Option<f32>,
    beta1: Option<f32>,
    beta2: Option<f32>,
    epsilon: Option<f32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAugment {
    max_rotation_deg: Option<f32>,
    shear_factor: Option<f32>,
    zoom: Option<[f32; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMfcc {
    frame_len_ms: Option<f64>,
    hop_ms: Option<f64>,
    n_mels: Option<usize>,
    n_coeffs: Option<usize>,
    fft_size: Option<usize>,
    fmin: Option<f64>,
    fmax: Option<f64>,
    /// Feature cache file: read when present, written after extraction.
    cache: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLabels {
    names: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawLayer {
    Conv2d {
        out_channels: usize,
        #[serde(default = "default_kernel")]
        kernel: usize,
        #[serde(default = "default_stride")]
        stride: usize,
        #[serde(default = "default_padding")]
        padding: String,
    },
    Maxpool2d {
        #[serde(default = "default_pool")]
        pool: usize,
    },
    Dense {
        units: usize,
    },
    Relu,
    Softmax,
    Dropout {
        rate: f32,
    },
    Batchnorm {
        #[serde(default = "default_momentum")]
        momentum: f32,
        #[serde(default = "default_epsilon")]
        epsilon: f32,
    },
    Flatten,
    Lstm {
        units: usize,
        #[serde(default)]
        return_sequence: bool,
    },
}

fn default_kernel() -> usize {
    3
}
fn default_stride() -> usize {
    1
}
fn default_padding() -> String {
    "same".into()
}
fn default_pool() -> usize {
    2
}
fn default_momentum() -> f32 {
    0.9
}
fn default_epsilon() -> f32 {
    1e-5
}

fn to_layer_spec(raw: RawLayer) -> Result<LayerSpec, CliError> {
    Ok(match raw {
        RawLayer::Conv2d {
            out_channels,
            kernel,
            stride,
            padding,
        } => LayerSpec::Conv2D {
            out_channels,
            kernel_h: kernel,
            kernel_w: kernel,
            stride,
            padding: match padding.as_str() {
                "same" => Padding::Same,
                "valid" => Padding::Valid,
                other => {
                    return Err(CliError::Config(format!(
                        "padding must be \"same\" or \"valid\", got \"{other}\""
                    )))
                }
            },
        },
        RawLayer::Maxpool2d { pool } => LayerSpec::MaxPool2D {
            pool_h: pool,
            pool_w: pool,
        },
        RawLayer::Dense { units } => LayerSpec::Dense { units },
        RawLayer::Relu => LayerSpec::ReLU,
        RawLayer::Softmax => LayerSpec::Softmax,
        RawLayer::Dropout { rate } => LayerSpec::Dropout { rate },
        RawLayer::Batchnorm { momentum, epsilon } => LayerSpec::BatchNorm { momentum, epsilon },
        RawLayer::Flatten => LayerSpec::Flatten,
        RawLayer::Lstm {
            units,
            return_sequence,
        } => LayerSpec::Lstm {
            units,
            return_sequence,
        },
    })
}

pub fn load_config(path: &Path, ov: &Overrides) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let raw: RawConfig =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;

    let task = Task::parse(&raw.task).map_err(|e| CliError::Config(e.to_string()))?;
    let seed = ov.seed.or(raw.seed).ok_or_else(|| {
        CliError::Config("seed is required: set `seed` in the config or pass --seed".into())
    })?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));

    let mut pipeline = PipelineConfig::for_task(task, dir.join(&raw.data), seed);

    if let Some(s) = &raw.split {
        pipeline.split = SplitSpec::new(s.train, s.val, s.test, seed)
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    if let Some(t) = &raw.train {
        if let Some(v) = t.epochs {
            pipeline.epochs = v;
        }
        if let Some(v) = t.batch_size {
            pipeline.batch_size = v;
        }
        if let Some(v) = t.patience {
            pipeline.patience = Some(v);
        }
        if let Some(v) = t.min_delta {
            pipeline.min_delta = v;
        }
        if let Some(v) = t.augment {
            pipeline.augment = v;
        }
        if let Some(v) = t.learning_rate {
            pipeline.adam.lr = v;
        }
        if let Some(v) = t.beta1 {
            pipeline.adam.beta1 = v;
        }
        if let Some(v) = t.beta2 {
            pipeline.adam.beta2 = v;
        }
        if let Some(v) = t.epsilon {
            pipeline.adam.epsilon = v;
        }
    }
    if let Some(a) = &raw.augment {
        if let Some(v) = a.max_rotation_deg {
            pipeline.augment_params.max_rotation_deg = v;
        }
        if let Some(v) = a.shear_factor {
            pipeline.augment_params.shear_factor = v;
        }
        if let Some([lo, hi]) = a.zoom {
            pipeline.augment_params.zoom = (lo, hi);
        }
    }
    if let Some(m) = &raw.mfcc {
        if let Some(v) = m.frame_len_ms {
            pipeline.mfcc.frame_len_ms = v;
        }
        if let Some(v) = m.hop_ms {
            pipeline.mfcc.hop_ms = v;
        }
        if let Some(v) = m.n_mels {
            pipeline.mfcc.n_mels = v;
        }
        if let Some(v) = m.n_coeffs {
            pipeline.mfcc.n_coeffs = v;
        }
        if let Some(v) = m.fft_size {
            pipeline.mfcc.fft_size = Some(v);
        }
        if let Some(v) = m.fmin {
            pipeline.mfcc.fmin = v;
        }
        if let Some(v) = m.fmax {
            pipeline.mfcc.fmax = Some(v);
        }
        if let Some(c) = &m.cache {
            pipeline.cache = Some(dir.join(c));
        }
    }
    if let Some(l) = &raw.labels {
        pipeline.label_names = Some(l.names.clone());
    }
    if !raw.layer.is_empty() {
        pipeline.arch = Some(
            raw.layer
                .into_iter()
                .map(to_layer_spec)
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    pipeline.validate()?;

    let out_dir = match (&ov.out, &raw.out) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => dir.join(o),
        (None, None) => dir.join("out"),
    };
    let eval_test_split_only = match raw.eval_split.as_deref() {
        None | Some("all") => false,
        Some("test") => true,
        Some(other) => {
            return Err(CliError::Config(format!(
                "eval_split must be \"all\" or \"test\", got \"{other}\""
            )))
        }
    };

    Ok(RunConfig {
        pipeline,
        out_dir,
        eval_test_split_only,
        quiet: ov.quiet || raw.quiet.unwrap_or(false),
    })
}
