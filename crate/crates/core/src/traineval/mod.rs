//! Losses, metrics, the Adam optimizer and the training loop.

mod adam;
mod metrics;
mod train;

use thiserror::Error;

use crate::model::ModelError;

pub use adam::{adam_step, AdamState};
pub use metrics::{custom_loss, custom_loss_grad, late_fraction, mae, mse_loss, score, score_term, Aggregation, Metrics, PredictionBatch};
pub use train::{evaluate, train, train_with, EpochRecord, History, LossConfig, LossKind, TrainConfig, TrainOutcome};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("prediction and target lengths differ ({preds} vs {targets})")]
    LengthMismatch { preds: usize, targets: usize },
    #[error("target {value} at index {index} is outside [0, 1]")]
    TargetOutOfRange { index: usize, value: f64 },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    DivergedLoss { epoch: usize, batch: usize },
    #[error("parameter {index} has shape {param:?} but its gradient or state has {other:?}")]
    ShapeMismatch { index: usize, param: Vec<usize>, other: Vec<usize> },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
