//! End-to-end training orchestration and the evaluation report.

use crate::imaging::{affine_augment, AugmentParams, GrayImage};
use crate::nn::Network;
use crate::rng::Prng;
use crate::tensor::Tensor;
use crate::train::{
    fit, metrics_from_confusion, split_dataset, ConfusionMatrix, Dataset, FitConfig, History,
    Metrics, SplitIndices, TrainError,
};
use crate::util::parallel_map;

use super::data::{load_eye_dataset, load_fer_dataset, LoadedDataset};
use super::features::featurize_speaker_dataset;
use super::io::quantize_mfcc;
use super::models::{build_eye_model, build_fer_model, build_speaker_model, EYE_INPUT, FER_INPUT};
use super::{PipelineConfig, PipelineError, SpeakerFrontend, Task, TrainedModel};

/// One evaluated sample: truth, prediction, and the predicted class's
/// probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleOutcome {
    pub true_label: u32,
    pub predicted: u32,
    pub confidence: f32,
}

/// Test-set evaluation: confusion matrix, the metrics derived from it, mean
/// cross-entropy, and the per-sample outcome table.
#[derive(Debug, Clone)]
pub struct TaskEvalReport {
    pub loss: f64,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    pub samples: Vec<SampleOutcome>,
}

/// Everything a training run produces.
#[derive(Debug)]
pub struct TrainArtifacts {
    pub model: TrainedModel,
    pub history: History,
    pub report: TaskEvalReport,
}

/// Inference-mode evaluation, fanned out over fixed batches with an
/// index-ordered reduction — results are identical for any worker count or
/// batch size.
pub fn evaluate_network(
    net: &Network,
    data: &Dataset,
    batch_size: usize,
) -> Result<TaskEvalReport, PipelineError> {
    if batch_size == 0 {
        return Err(PipelineError::Train(TrainError::BatchSizeZero));
    }
    let n = data.len();
    let indices: Vec<usize> = (0..n).collect();
    let chunks: Vec<&[usize]> = indices.chunks(batch_size).collect();

    type ChunkResult = Result<(Vec<f64>, Vec<SampleOutcome>), PipelineError>;
    let per_chunk: Vec<ChunkResult> = parallel_map(&chunks, |chunk| {
        let xb = data.x().gather_first_axis(chunk)?;
        let yb: Vec<u32> = chunk.iter().map(|&i| data.labels()[i]).collect();
        let probs = net.forward_infer(&xb)?;
        let chunk_losses = crate::train::per_sample_ce(&probs, &yb)?;
        let preds = probs.argmax_rows()?;
        let samples = preds
            .iter()
            .zip(&yb)
            .enumerate()
            .map(|(r, (&p, &y))| SampleOutcome {
                true_label: y,
                predicted: p as u32,
                confidence: probs.row(r)[p],
            })
            .collect();
        Ok((chunk_losses, samples))
    });

    // Per-sample losses are reduced in data order, so the final sum carries
    // no imprint of the chunk boundaries or of which worker ran a chunk.
    let mut losses: Vec<f64> = Vec::with_capacity(n);
    let mut samples = Vec::with_capacity(n);
    for result in per_chunk {
        let (chunk_losses, chunk_samples) = result?;
        losses.extend(chunk_losses);
        samples.extend(chunk_samples);
    }
    let loss_sum: f64 = losses.iter().sum();

    let preds: Vec<u32> = samples.iter().map(|s| s.predicted).collect();
    let confusion = ConfusionMatrix::from_pairs(data.labels(), &preds, data.classes())?;
    let metrics = metrics_from_confusion(&confusion)?;
    Ok(TaskEvalReport {
        loss: loss_sum / n as f64,
        confusion,
        metrics,
        samples,
    })
}

/// Evaluate a saved model on a model-ready dataset.
pub fn evaluate_model(
    model: &TrainedModel,
    data: &Dataset,
    batch_size: usize,
) -> Result<TaskEvalReport, PipelineError> {
    evaluate_network(&model.to_network()?, data, batch_size)
}

/// Random-affine batch augmentation for `[N, 1, H, W]` image batches.
fn augment_batch(
    batch: &Tensor,
    params: &AugmentParams,
    prng: &mut Prng,
) -> Result<Tensor, TrainError> {
    let dims = batch.dims().to_vec();
    let (h, w) = match dims[..] {
        [_, 1, h, w] => (h, w),
        _ => {
            return Err(TrainError::Augment(format!(
                "expected [N, 1, H, W] batch, got {dims:?}"
            )))
        }
    };
    let plane = h * w;
    let mut out = Vec::with_capacity(batch.len());
    for b in 0..dims[0] {
        let pixels = batch.data()[b * plane..(b + 1) * plane].to_vec();
        let img = GrayImage::new(w, h, pixels).map_err(|e| TrainError::Augment(e.to_string()))?;
        let warped =
            affine_augment(&img, params, prng).map_err(|e| TrainError::Augment(e.to_string()))?;
        out.extend_from_slice(&warped.into_pixels());
    }
    Ok(Tensor::from_vec(dims, out)?)
}

struct Prepared {
    loaded: LoadedDataset,
    split: SplitIndices,
    input_shape: Vec<usize>,
    frontend: Option<SpeakerFrontend>,
}

fn prepare(cfg: &PipelineConfig) -> Result<Prepared, PipelineError> {
    match cfg.task {
        Task::Eye => {
            let loaded = load_eye_dataset(&cfg.data, EYE_INPUT[1])?;
            let split = split_dataset(&loaded.labels, loaded.classes, &cfg.split)?;
            Ok(Prepared {
                loaded,
                split,
                input_shape: EYE_INPUT.to_vec(),
                frontend: None,
            })
        }
        Task::Fer => {
            let loaded = load_fer_dataset(&cfg.data, FER_INPUT[1])?;
            let split = split_dataset(&loaded.labels, loaded.classes, &cfg.split)?;
            Ok(Prepared {
                loaded,
                split,
                input_shape: FER_INPUT.to_vec(),
                frontend: None,
            })
        }
        Task::Speaker => {
            let mfcc = quantize_mfcc(&cfg.mfcc);
            let f = featurize_speaker_dataset(&cfg.data, &mfcc, &cfg.split, cfg.cache.as_deref())?;
            if f.classes < 2 {
                return Err(PipelineError::TooFewSpeakers(f.classes));
            }
            let input_shape = vec![f.frames, mfcc.n_coeffs];
            let frontend = SpeakerFrontend {
                mfcc,
                frames: f.frames,
                scaler: f.scaler.clone(),
            };
            Ok(Prepared {
                loaded: LoadedDataset {
                    x: f.x,
                    labels: f.labels,
                    classes: f.classes,
                    label_names: (0..f.classes).map(|i| format!("speaker{i}")).collect(),
                    issues: f
                        .skipped
                        .iter()
                        .map(|s| format!("{}: {}", s.path.display(), s.reason))
                        .collect(),
                },
                split: f.split,
                input_shape,
                frontend: Some(frontend),
            })
        }
    }
}

fn task_specs(cfg: &PipelineConfig, classes: usize) -> Result<Vec<crate::nn::LayerSpec>, PipelineError> {
    if let Some(arch) = &cfg.arch {
        return Ok(arch.clone());
    }
    Ok(match cfg.task {
        Task::Eye => build_eye_model(),
        Task::Fer => build_fer_model(),
        Task::Speaker => build_speaker_model(classes)?,
    })
}

/// Train a classifier exactly as configured: load, stratified-split, fit
/// under softmax cross-entropy with Adam, evaluate on the held-out test
/// split. A fixed seed makes the whole run — parameters, history, report —
/// reproducible bit for bit.
pub fn run_training(cfg: &PipelineConfig) -> Result<TrainArtifacts, PipelineError> {
    cfg.validate()?;
    let prepared = prepare(cfg)?;

    let label_names = match &cfg.label_names {
        Some(names) if names.len() != prepared.loaded.classes => {
            return Err(PipelineError::LabelNamesMismatch {
                got: names.len(),
                classes: prepared.loaded.classes,
            })
        }
        Some(names) => names.clone(),
        None => prepared.loaded.label_names.clone(),
    };

    for (which, indices) in [
        ("train", &prepared.split.train),
        ("val", &prepared.split.val),
        ("test", &prepared.split.test),
    ] {
        if indices.is_empty() {
            return Err(PipelineError::EmptySplit { which });
        }
    }

    let classes = prepared.loaded.classes;
    let full = Dataset::new(prepared.loaded.x, prepared.loaded.labels, classes)?;
    let train_ds = full.subset(&prepared.split.train)?;
    let val_ds = full.subset(&prepared.split.val)?;
    let test_ds = full.subset(&prepared.split.test)?;

    let mut prng = Prng::new(cfg.seed);
    let mut net = Network::build(prepared.input_shape, task_specs(cfg, classes)?, &mut prng)?;

    let fit_cfg = FitConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        adam: cfg.adam,
        patience: cfg.patience,
        min_delta: cfg.min_delta,
    };
    let params = cfg.augment_params.clone();
    let mut hook = move |batch: &Tensor, prng: &mut Prng| augment_batch(batch, &params, prng);
    let augment = cfg.augment.then_some(&mut hook as &mut crate::train::AugmentFn<'_>);
    let history = fit(&mut net, &train_ds, &val_ds, &fit_cfg, &mut prng, augment)?;

    let report = evaluate_network(&net, &test_ds, cfg.batch_size)?;
    let model = TrainedModel::from_network(cfg.task, &net, label_names, prepared.frontend)?;
    Ok(TrainArtifacts {
        model,
        history,
        report,
    })
}
