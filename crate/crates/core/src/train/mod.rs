//! Training recipe: cosine-annealed SGD with weight decay, MixUp, random
//! crop/flip and variable-length augmentation, a synthetic sequence dataset
//! and the epoch loop with best-checkpoint selection.

mod augment;
mod dataset;
mod mixup;
mod schedule;
mod sgd;
mod trainer;

use alloc::string::String;

pub use augment::{augment, center_crop, hflip, AugmentConfig, Augmented};
pub use dataset::{SequenceDataset, Split, ToyDataset, ToyDatasetSpec, MOTIF_CAPACITY};
pub use mixup::{mix_pair, mixup, mixup_with, sample_lambda, Batch};
pub use schedule::cosine_lr;
pub use sgd::{sgd_step, Sgd};
pub use trainer::{evaluate, train, EpochRecord, TrainConfig, TrainOutcome};

use crate::model::ModelError;
use crate::tensor::TensorError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("tensor: {0}")]
    Tensor(#[from] TensorError),
    #[error("model: {0}")]
    Model(ModelError),
    #[error("epoch {epoch} outside 0..={total}")]
    EpochOutOfRange { epoch: usize, total: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("mixup alpha must be positive, got {0}")]
    NonPositiveAlpha(f64),
    #[error("crop {crop} larger than frame {size}")]
    CropTooLarge { crop: usize, size: usize },
    #[error("{classes} classes exceed the motif capacity of {capacity}")]
    MotifCapacity { classes: usize, capacity: usize },
    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("training diverged at epoch {epoch}, step {step}: {reason}")]
    Diverged { epoch: usize, step: usize, reason: String },
    #[error("{0:?} split is empty")]
    EmptySplit(Split),
    #[error("model predicts {model} classes, dataset has {dataset}")]
    ClassMismatch { model: usize, dataset: usize },
}

impl From<ModelError> for TrainError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Tensor(t) => TrainError::Tensor(t),
            other => TrainError::Model(other),
        }
    }
}

pub type Result<T, E = TrainError> = core::result::Result<T, E>;
