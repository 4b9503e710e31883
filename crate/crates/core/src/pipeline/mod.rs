//! Datasets, the two-stage training procedure, the learning-rate schedule,
//! AdamW and the checkpoint format.

pub mod checkpoint;
pub mod data;
pub mod optim;
pub mod schedule;
pub mod synthetic;
pub mod train;

use thiserror::Error;

use crate::lm::LmError;
use crate::model::ModelError;
use crate::numerics::NumericsError;

pub use checkpoint::{load_checkpoint, load_model, save_checkpoint, save_model};
pub use data::{mix, ConversationRecord, ConversationTurn, Dataset, DatasetRecord, Example, SampleRecord, Task};
pub use optim::AdamW;
pub use schedule::{lr_at, TrainingConfig};
pub use train::{pretrain_decoder_with, train_stage1, train_stage1_with, train_stage2, train_stage2_with, StepLog, TrainReport};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("checkpoint does not start with the LLAMO1 magic")]
    BadMagic,
    #[error("checkpoint manifest does not match payload: {0}")]
    ManifestMismatch(String),
    #[error("checkpoint truncated: need {expected} bytes, have {got}")]
    TruncatedPayload { expected: usize, got: usize },
    #[error("no trainable parameters")]
    NoTrainableParams,
    #[error("stage 2 needs a model that completed stage 1")]
    MissingStage1Checkpoint,
    #[error("dataset has no usable examples")]
    EmptyDataset,
    #[error("line {line}: {message}")]
    BadRecord { line: usize, message: String },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
