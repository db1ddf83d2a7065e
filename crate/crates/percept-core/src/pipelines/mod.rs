//! The three concrete model recipes — eye state, facial expression, speaker
//! identity — and their end-to-end orchestration: dataset loading, speaker
//! featurization, training runs, evaluation reports, and model persistence.

mod data;
mod features;
mod io;
mod models;
mod run;

pub use data::{load_eye_dataset, load_fer_dataset, load_for_eval, LoadedDataset};
pub use features::{
    apply_frontend, extract_clips, featurize_speaker_dataset, SkippedClip, SpeakerFeatures,
};
pub use io::{load_model, quantize_mfcc, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use models::{
    build_eye_model, build_fer_model, build_speaker_model, EYE_INPUT, EYE_LABELS, FER_INPUT,
};
pub use run::{run_training, evaluate_model, evaluate_network, SampleOutcome, TaskEvalReport, TrainArtifacts};

use std::path::PathBuf;

use thiserror::Error;

use crate::audio::{AudioError, FeatureScaler, MfccConfig};
use crate::imaging::ImagingError;
use crate::nn::{LayerParams, LayerSpec, Network, NnError};
use crate::tensor::TensorError;
use crate::train::{AdamHyper, SplitSpec, TrainError};
use crate::imaging::AugmentParams;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("no usable clips in the dataset")]
    NoClips,
    #[error("class {0} has no samples")]
    EmptyClass(u32),
    #[error("the {which} split is empty; adjust the split fractions")]
    EmptySplit { which: &'static str },
    #[error("speaker models need at least 2 classes, got {0}")]
    TooFewSpeakers(usize),
    #[error("{got} label names supplied for {classes} classes")]
    LabelNamesMismatch { got: usize, classes: usize },
    #[error("feature cache holds {got}-coefficient clips, config wants {want}")]
    CacheCoeffMismatch { want: usize, got: usize },
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),
    #[error("model file is truncated")]
    Truncated,
    #[error("malformed model file: {0}")]
    Corrupt(String),
    #[error("model is for the {model} task, dataset is for {dataset}")]
    TaskMismatch { model: Task, dataset: Task },
    #[error("{}: {message}", path.display())]
    Data { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Which classifier a config, dataset, or model file belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// Open/closed eye state from 64x64 grayscale crops.
    Eye,
    /// Seven-emotion facial expression from 48x48 grayscale faces.
    Fer,
    /// Closed-set speaker identity from MFCC sequences.
    Speaker,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Eye => "eye",
            Task::Fer => "fer",
            Task::Speaker => "speaker",
        }
    }

    pub fn parse(s: &str) -> Result<Task, PipelineError> {
        match s {
            "eye" => Ok(Task::Eye),
            "fer" => Ok(Task::Fer),
            "speaker" => Ok(Task::Speaker),
            other => Err(PipelineError::Config(format!("unknown task '{other}'"))),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything a training run needs. [`PipelineConfig::for_task`] fills in
/// the per-task defaults; the facial-expression schedule (20 epochs, batch
/// 64) is the only one with an external source, the others are tuned for
/// the bundled synthetic datasets.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub task: Task,
    /// Eye/speaker: `path,label` manifest. Fer: the pixel CSV itself.
    pub data: PathBuf,
    pub split: SplitSpec,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamHyper,
    pub patience: Option<usize>,
    pub min_delta: f32,
    /// Random affine augmentation of training batches (vision tasks only).
    pub augment: bool,
    pub augment_params: AugmentParams,
    /// MFCC front end (speaker task only).
    pub mfcc: MfccConfig,
    /// Optional on-disk MFCC cache: read when present, written after a
    /// fresh extraction (speaker task only).
    pub cache: Option<PathBuf>,
    /// Class display names; defaults are task-specific.
    pub label_names: Option<Vec<String>>,
    /// Replaces the task's standard layer stack when set.
    pub arch: Option<Vec<LayerSpec>>,
}

impl PipelineConfig {
    pub fn for_task(task: Task, data: PathBuf, seed: u64) -> Self {
        let (epochs, batch_size, patience) = match task {
            Task::Eye => (15, 32, None),
            Task::Fer => (20, 64, None),
            Task::Speaker => (30, 32, Some(5)),
        };
        PipelineConfig {
            task,
            data,
            split: SplitSpec::new(0.7, 0.15, 0.15, seed).expect("standard fractions"),
            seed,
            epochs,
            batch_size,
            adam: AdamHyper::default(),
            patience,
            min_delta: 0.0,
            augment: false,
            augment_params: AugmentParams::default(),
            mfcc: MfccConfig::default(),
            cache: None,
            label_names: None,
            arch: None,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.epochs == 0 {
            return Err(PipelineError::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(PipelineError::Config("batch_size must be >= 1".into()));
        }
        if self.augment {
            if self.task == Task::Speaker {
                return Err(PipelineError::Config(
                    "augmentation applies to vision tasks only".into(),
                ));
            }
            self.augment_params.validate()?;
        }
        Ok(())
    }
}

/// The speaker model's input-side processing, carried inside the model so a
/// saved classifier can consume raw WAV datasets on its own.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerFrontend {
    pub mfcc: MfccConfig,
    /// Fixed sequence length; eval clips are truncated/zero-padded to match.
    pub frames: usize,
    pub scaler: FeatureScaler,
}

/// A trained classifier plus everything needed to run it elsewhere.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub task: Task,
    pub input_shape: Vec<usize>,
    pub specs: Vec<LayerSpec>,
    pub params: Vec<LayerParams>,
    pub label_names: Vec<String>,
    /// Present exactly when `task == Speaker`.
    pub frontend: Option<SpeakerFrontend>,
}

impl TrainedModel {
    pub fn from_network(
        task: Task,
        net: &Network,
        label_names: Vec<String>,
        frontend: Option<SpeakerFrontend>,
    ) -> Result<TrainedModel, PipelineError> {
        let model = TrainedModel {
            task,
            input_shape: net.input_shape().to_vec(),
            specs: net.specs().to_vec(),
            params: net.params().to_vec(),
            label_names,
            frontend,
        };
        model.validate()?;
        Ok(model)
    }

    /// Check internal consistency: specs/params agree and the label list
    /// matches the output width.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let net = self.to_network()?;
        let out = net.output_shape();
        if out != [self.label_names.len()] {
            return Err(PipelineError::LabelNamesMismatch {
                got: self.label_names.len(),
                classes: out.first().copied().unwrap_or(0),
            });
        }
        if (self.task == Task::Speaker) != self.frontend.is_some() {
            return Err(PipelineError::Config(
                "speaker models carry a frontend; other tasks must not".into(),
            ));
        }
        Ok(())
    }

    /// Reassemble an executable network (parameters are cloned).
    pub fn to_network(&self) -> Result<Network, NnError> {
        Network::from_parts(
            self.input_shape.clone(),
            self.specs.clone(),
            self.params.clone(),
        )
    }

    pub fn classes(&self) -> usize {
        self.label_names.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_names_round_trip() {
        for task in [Task::Eye, Task::Fer, Task::Speaker] {
            assert_eq!(Task::parse(task.as_str()).unwrap(), task);
        }
        assert!(Task::parse("gait").is_err());
    }

    #[test]
    fn fer_defaults_follow_the_published_schedule() {
        let cfg = PipelineConfig::for_task(Task::Fer, PathBuf::from("d.csv"), 1);
        assert_eq!(cfg.epochs, 20);
        assert_eq!(cfg.batch_size, 64);
    }

    #[test]
    fn speaker_defaults_enable_early_stopping() {
        let cfg = PipelineConfig::for_task(Task::Speaker, PathBuf::from("m.csv"), 1);
        assert_eq!(cfg.epochs, 30);
        assert_eq!(cfg.patience, Some(5));
    }

    #[test]
    fn zero_epochs_is_rejected() {
        let mut cfg = PipelineConfig::for_task(Task::Eye, PathBuf::from("m.csv"), 1);
        cfg.epochs = 0;
        assert!(matches!(cfg.validate(), Err(PipelineError::Config(_))));
    }

    #[test]
    fn speaker_augmentation_is_rejected() {
        let mut cfg = PipelineConfig::for_task(Task::Speaker, PathBuf::from("m.csv"), 1);
        cfg.augment = true;
        assert!(matches!(cfg.validate(), Err(PipelineError::Config(_))));
    }
}
