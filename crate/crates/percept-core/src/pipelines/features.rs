//! Speaker-dataset featurization: WAV manifest -> fixed-length, standardized
//! MFCC sequences ready for the sequence classifier.

use std::path::{Path, PathBuf};

use crate::audio::{
    mfcc, read_feature_cache, read_wav, write_feature_cache, FeatureClip, FeatureMatrix,
    FeatureScaler, MfccConfig,
};
use crate::imaging::read_manifest;
use crate::tensor::Tensor;
use crate::train::{split_dataset, SplitIndices, SplitSpec};
use crate::util::parallel_map;

use super::io::snap_f64;
use super::PipelineError;

/// A manifest entry that could not be featurized, with the reason.
#[derive(Debug, Clone)]
pub struct SkippedClip {
    pub path: PathBuf,
    pub reason: String,
}

/// The featurized dataset: standardized sequences, their labels, the split
/// they were standardized under, and the fitted scaler.
#[derive(Debug, Clone)]
pub struct SpeakerFeatures {
    /// `[N, frames, n_coeffs]`.
    pub x: Tensor,
    pub labels: Vec<u32>,
    pub classes: usize,
    /// The common sequence length (dataset median before pad/truncate).
    pub frames: usize,
    pub scaler: FeatureScaler,
    pub split: SplitIndices,
    pub skipped: Vec<SkippedClip>,
}

/// Extract per-clip MFCC matrices for every manifest entry, in manifest
/// order, fanning out across files. Unreadable or too-short clips are
/// dropped and reported rather than failing the batch. Features are
/// quantized to f32 here so a fresh extraction and a cache read-back are
/// bit-identical.
pub fn extract_clips(
    manifest: &Path,
    cfg: &MfccConfig,
) -> Result<(Vec<FeatureClip>, Vec<SkippedClip>), PipelineError> {
    let entries = read_manifest(manifest)?;
    if entries.is_empty() {
        return Err(PipelineError::NoClips);
    }
    let results = parallel_map(&entries, |(path, label)| {
        read_wav(path)
            .and_then(|buf| mfcc(&buf, cfg))
            .map(|m| FeatureClip {
                label: *label,
                frames: m.rows,
                coeffs: m.cols,
                data: m.data.iter().map(|&v| v as f32).collect(),
            })
            .map_err(|e| e.to_string())
    });

    let mut clips = Vec::new();
    let mut skipped = Vec::new();
    for ((path, _), result) in entries.into_iter().zip(results) {
        match result {
            Ok(clip) => clips.push(clip),
            Err(reason) => skipped.push(SkippedClip { path, reason }),
        }
    }
    if clips.is_empty() {
        // Every clip failed; naming one beats a bare "no clips".
        return Err(match skipped.into_iter().next() {
            Some(s) => PipelineError::Data {
                path: s.path,
                message: s.reason,
            },
            None => PipelineError::NoClips,
        });
    }
    Ok((clips, skipped))
}

fn clip_matrix(clip: &FeatureClip) -> FeatureMatrix {
    FeatureMatrix {
        rows: clip.frames,
        cols: clip.coeffs,
        data: clip.data.iter().map(|&v| f64::from(v)).collect(),
    }
}

/// Featurize a `path,label` manifest of WAV clips.
///
/// Pipeline: extract (or reload from `cache`) per-clip MFCCs, stratified-split
/// by label, fit the standard scaler on training-split frames only, scale
/// every clip, then truncate/zero-pad each to the dataset-median frame count.
/// Scaling precedes padding so pad rows sit at the post-scale mean of zero.
pub fn featurize_speaker_dataset(
    manifest: &Path,
    cfg: &MfccConfig,
    split_spec: &SplitSpec,
    cache: Option<&Path>,
) -> Result<SpeakerFeatures, PipelineError> {
    let (clips, skipped) = match cache {
        Some(path) if path.exists() => (read_feature_cache(path)?, Vec::new()),
        _ => {
            let (clips, skipped) = extract_clips(manifest, cfg)?;
            if let Some(path) = cache {
                write_feature_cache(path, &clips)?;
            }
            (clips, skipped)
        }
    };
    for clip in &clips {
        if clip.coeffs != cfg.n_coeffs {
            return Err(PipelineError::CacheCoeffMismatch {
                want: cfg.n_coeffs,
                got: clip.coeffs,
            });
        }
    }

    let labels: Vec<u32> = clips.iter().map(|c| c.label).collect();
    let classes = labels.iter().max().copied().unwrap_or(0) as usize + 1;
    for class in 0..classes as u32 {
        if !labels.contains(&class) {
            return Err(PipelineError::EmptyClass(class));
        }
    }

    let mut counts: Vec<usize> = clips.iter().map(|c| c.frames).collect();
    counts.sort_unstable();
    let frames = counts[counts.len() / 2];

    let split = split_dataset(&labels, classes, split_spec)?;

    let matrices: Vec<FeatureMatrix> = clips.iter().map(clip_matrix).collect();
    let train_matrices: Vec<&FeatureMatrix> = split.train.iter().map(|&i| &matrices[i]).collect();
    let mut scaler = FeatureScaler::fit(&train_matrices)?;
    // Snap to values that survive the model file's f32-pair encoding, so a
    // reloaded model standardizes bit-identically.
    scaler.mean.iter_mut().for_each(|v| *v = snap_f64(*v));
    scaler.std.iter_mut().for_each(|v| *v = snap_f64(*v));

    let n = matrices.len();
    let cols = cfg.n_coeffs;
    let mut x = vec![0.0f32; n * frames * cols];
    for (i, mut m) in matrices.into_iter().enumerate() {
        scaler.apply(&mut m)?;
        let keep = m.rows.min(frames);
        for r in 0..keep {
            for c in 0..cols {
                x[(i * frames + r) * cols + c] = m.row(r)[c] as f32;
            }
        }
    }

    Ok(SpeakerFeatures {
        x: Tensor::from_vec([n, frames, cols], x)?,
        labels,
        classes,
        frames,
        scaler,
        split,
        skipped,
    })
}

/// Standardize and pad/truncate already-extracted clips with a fitted
/// frontend — the evaluation path for saved models, which must never refit
/// the scaler.
pub fn apply_frontend(
    clips: &[FeatureClip],
    scaler: &FeatureScaler,
    frames: usize,
) -> Result<Tensor, PipelineError> {
    if clips.is_empty() {
        return Err(PipelineError::NoClips);
    }
    let cols = scaler.mean.len();
    let mut x = vec![0.0f32; clips.len() * frames * cols];
    for (i, clip) in clips.iter().enumerate() {
        let mut m = clip_matrix(clip);
        scaler.apply(&mut m)?;
        let keep = m.rows.min(frames);
        for r in 0..keep {
            for c in 0..cols {
                x[(i * frames + r) * cols + c] = m.row(r)[c] as f32;
            }
        }
    }
    Ok(Tensor::from_vec([clips.len(), frames, cols], x)?)
}
