//! Dataset loading for the vision tasks, plus the model-driven loader used
//! at evaluation time.

use std::path::Path;

use crate::imaging::{
    parse_fer_csv, read_manifest, read_pgm, resize_bilinear, GrayImage, EMOTION_NAMES, FER_SIDE,
};
use crate::tensor::Tensor;
use crate::train::Dataset;
use crate::util::parallel_map;

use super::features::{apply_frontend, extract_clips};
use super::models::{EYE_INPUT, EYE_LABELS};
use super::{PipelineError, Task, TrainedModel};

/// A dataset in model-ready form.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    /// `[N, ...sample shape]`.
    pub x: Tensor,
    pub labels: Vec<u32>,
    pub classes: usize,
    pub label_names: Vec<String>,
    /// Rows or files that were skipped, described for the log. Loaders only
    /// skip where the source format is known-noisy (fer rows, speaker
    /// clips); a broken eye manifest entry fails the load instead.
    pub issues: Vec<String>,
}

impl LoadedDataset {
    pub fn dataset(&self) -> Result<Dataset, PipelineError> {
        Ok(Dataset::new(self.x.clone(), self.labels.clone(), self.classes)?)
    }
}

fn image_rows(img: &GrayImage, side: usize) -> Result<Vec<f32>, PipelineError> {
    if img.width() == side && img.height() == side {
        return Ok(img.pixels().to_vec());
    }
    Ok(resize_bilinear(img, side, side)?.into_pixels())
}

/// Load an eye-state dataset: a `path,label` manifest of grayscale PGM
/// crops, labels 0 (closed) and 1 (open). Images are bilinearly resized to
/// `side` when needed. Any unreadable file fails the load, naming the file.
pub fn load_eye_dataset(manifest: &Path, side: usize) -> Result<LoadedDataset, PipelineError> {
    let entries = read_manifest(manifest)?;
    if entries.is_empty() {
        return Err(PipelineError::NoClips);
    }
    for (path, label) in &entries {
        if *label > 1 {
            return Err(PipelineError::Data {
                path: path.clone(),
                message: format!("eye labels are 0 or 1, got {label}"),
            });
        }
    }

    let results = parallel_map(&entries, |(path, _)| {
        read_pgm(path)
            .map_err(|e| e.to_string())
            .and_then(|img| image_rows(&img, side).map_err(|e| e.to_string()))
    });
    let mut x = Vec::with_capacity(entries.len() * side * side);
    let mut labels = Vec::with_capacity(entries.len());
    for ((path, label), result) in entries.into_iter().zip(results) {
        match result {
            Ok(pixels) => {
                x.extend_from_slice(&pixels);
                labels.push(label);
            }
            Err(message) => return Err(PipelineError::Data { path, message }),
        }
    }

    let n = labels.len();
    Ok(LoadedDataset {
        x: Tensor::from_vec([n, 1, side, side], x)?,
        labels,
        classes: 2,
        label_names: EYE_LABELS.iter().map(|s| s.to_string()).collect(),
        issues: Vec::new(),
    })
}

/// Load a FER-format expression CSV (`emotion,pixels,Usage` header, 48x48
/// space-separated pixel rows). Malformed rows are skipped and reported.
/// The Usage column is parsed for validation but does not drive the split;
/// the training pipeline's own stratified split does.
pub fn load_fer_dataset(csv: &Path, side: usize) -> Result<LoadedDataset, PipelineError> {
    let text = std::fs::read_to_string(csv).map_err(|e| PipelineError::Data {
        path: csv.to_path_buf(),
        message: e.to_string(),
    })?;
    let parsed = parse_fer_csv(&text)?;
    if parsed.records.is_empty() {
        return Err(PipelineError::NoClips);
    }

    let mut x = Vec::with_capacity(parsed.records.len() * side * side);
    let mut labels = Vec::with_capacity(parsed.records.len());
    for record in &parsed.records {
        let pixels = if side == FER_SIDE {
            record.image.pixels().to_vec()
        } else {
            image_rows(&record.image, side)?
        };
        x.extend_from_slice(&pixels);
        labels.push(u32::from(record.emotion));
    }

    let n = labels.len();
    Ok(LoadedDataset {
        x: Tensor::from_vec([n, 1, side, side], x)?,
        labels,
        classes: 7,
        label_names: EMOTION_NAMES.iter().map(|s| s.to_string()).collect(),
        issues: parsed
            .issues
            .iter()
            .map(|i| format!("line {}: {}", i.line, i.message))
            .collect(),
    })
}

fn vision_side(input_shape: &[usize], fallback: usize) -> usize {
    match input_shape {
        [1, h, w] if h == w => *h,
        _ => fallback,
    }
}

/// Load a dataset the way a saved model expects it: same image side, and
/// for speaker models the stored MFCC frontend (scaler applied, never
/// refitted; sequences cut/padded to the trained length).
pub fn load_for_eval(model: &TrainedModel, path: &Path) -> Result<LoadedDataset, PipelineError> {
    match model.task {
        Task::Eye => load_eye_dataset(path, vision_side(&model.input_shape, EYE_INPUT[1])),
        Task::Fer => load_fer_dataset(path, vision_side(&model.input_shape, FER_SIDE)),
        Task::Speaker => {
            let frontend = model
                .frontend
                .as_ref()
                .ok_or_else(|| PipelineError::Corrupt("speaker model lacks a frontend".into()))?;
            let (clips, skipped) = extract_clips(path, &frontend.mfcc)?;
            let x = apply_frontend(&clips, &frontend.scaler, frontend.frames)?;
            Ok(LoadedDataset {
                x,
                labels: clips.iter().map(|c| c.label).collect(),
                classes: model.classes(),
                label_names: model.label_names.clone(),
                issues: skipped
                    .iter()
                    .map(|s| format!("{}: {}", s.path.display(), s.reason))
                    .collect(),
            })
        }
    }
}
