//! Process exit discipline. Failures partition into three classes:
//! configuration problems exit 2, dataset and model-file problems exit 3,
//! and numerical failures exit 4. Success is 0. Malformed input never
//! panics — every user-reachable failure funnels through [`CliError`].

use percept_core::audio::AudioError;
use percept_core::pipelines::PipelineError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// The config file or flags are wrong: fix the invocation.
    #[error("{0}")]
    Config(String),
    /// The dataset, model file, or filesystem is wrong: fix the inputs.
    #[error("{0}")]
    Data(String),
    /// The numerics went wrong at runtime.
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(_) | PipelineError::LabelNamesMismatch { .. } => {
                CliError::Config(e.to_string())
            }
            // Internal layer/training/tensor invariants; user input that
            // reaches them has already passed config and data validation.
            PipelineError::Nn(_) | PipelineError::Train(_) | PipelineError::Tensor(_) => {
                CliError::Numeric(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<AudioError> for CliError {
    fn from(e: AudioError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
