//! Training machinery: cross-entropy losses, the Adam optimizer, stratified
//! dataset splitting, early stopping, the mini-batch fit loop, and the
//! evaluation metrics reported by the classifiers.

mod adam;
mod early;
mod fit;
mod loss;
mod metrics;
mod split;

pub use adam::{AdamHyper, AdamState};
pub use early::{EarlyStopper, StopDecision, StopReason};
pub use fit::{evaluate, fit, AugmentFn, EpochStats, EvalReport, FitConfig, FitOutcome, History};
pub use loss::{
    binary_cross_entropy, categorical_cross_entropy, fused_ce_grad, one_hot_rows,
    sparse_categorical_cross_entropy, PROB_CLAMP,
};
pub use metrics::{metrics_from_confusion, ClassMetrics, ConfusionMatrix, Metrics};
pub(crate) use loss::per_sample_ce;
pub use split::{split_dataset, SplitIndices, SplitSpec};

use crate::nn::NnError;
use crate::tensor::{Tensor, TensorError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("probability shape {probs:?} does not match target shape {targets:?}")]
    LossShape {
        probs: Vec<usize>,
        targets: Vec<usize>,
    },
    #[error("expected {want} values, got {got}")]
    LengthMismatch { want: usize, got: usize },
    #[error("row {row} of the probability matrix sums to {sum:.6}, not 1")]
    NonStochastic { row: usize, sum: f64 },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: u32, classes: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("batch size must be >= 1")]
    BatchSizeZero,
    #[error("split fractions ({train}, {val}, {test}) must be non-negative and sum to 1")]
    BadSplitFractions { train: f64, val: f64, test: f64 },
    #[error("{n} items cannot be split across {classes} classes")]
    TooFewItems { n: usize, classes: usize },
    #[error("optimizer holds state for {want} tensors, stepped with {got}")]
    OptimizerArity { want: usize, got: usize },
    #[error("gradient shape {got:?} does not match parameter shape {want:?}")]
    GradShape { want: Vec<usize>, got: Vec<usize> },
    #[error("confusion matrix is empty")]
    EmptyConfusion,
    #[error("batch augmentation failed: {0}")]
    Augment(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// A labeled dataset: sample tensors stacked on the first axis plus one
/// class index per sample.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: Tensor,
    labels: Vec<u32>,
    classes: usize,
}

impl Dataset {
    pub fn new(x: Tensor, labels: Vec<u32>, classes: usize) -> Result<Self, TrainError> {
        if labels.is_empty() {
            return Err(TrainError::EmptyDataset);
        }
        if x.dims()[0] != labels.len() {
            return Err(TrainError::LengthMismatch {
                want: x.dims()[0],
                got: labels.len(),
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l as usize >= classes) {
            return Err(TrainError::LabelOutOfRange { label, classes });
        }
        Ok(Dataset { x, labels, classes })
    }

    pub fn x(&self) -> &Tensor {
        &self.x
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Sub-dataset assembled from the given sample indices, in order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset, TrainError> {
        if indices.is_empty() {
            return Err(TrainError::EmptyDataset);
        }
        Ok(Dataset {
            x: self.x.gather_first_axis(indices)?,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        })
    }
}
