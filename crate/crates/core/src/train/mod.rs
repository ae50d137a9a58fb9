//! Minibatch training with Adadelta, dev-BLEU early stopping and adaptation.

mod batch;
mod engine;
mod optim;

pub use batch::{encode_corpus, make_batches, Batch, Example, DEFAULT_BATCH_SIZE, PAD_ID};
pub use engine::{
    adapt, batch_loss, batch_loss_and_gradients, dev_bleu, dropout_rng, train, DevSet, LogRow, LossScale, Schedule,
    StopReason, TrainOutcome, TrainSetup, BEST_CHECKPOINT, LOG_FILE,
};
pub use optim::{
    clip_gradients, global_norm, Adadelta, EarlyStopping, Verdict, ADADELTA_EPSILON, ADADELTA_RHO, DEFAULT_MAX_NORM,
};

use crate::eval::EvalError;
use crate::model::{CheckpointError, ModelError};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("batch size must be at least 1")]
    InvalidBatchSize,
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("non-finite value, step aborted: {0}")]
    NonFinite(String),
    #[error("development set is empty")]
    EmptyDev,
    #[error("decoding dev sentence {index} failed: {reason}")]
    DevDecode { index: usize, reason: String },
    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("I/O failed for {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
