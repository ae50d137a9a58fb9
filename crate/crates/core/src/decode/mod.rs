//! Greedy and beam-search decoding, translation of raw text and pivoting.

mod search;
mod system;

pub use search::{beam_search, default_max_len, greedy, log_softmax, BeamConfig, Hypothesis, DEFAULT_BEAM};
pub use system::{
    detokenize, format_nbest, pivot_translate, PivotOutput, System, Translation, MERGES_FILE, MODEL_FILE,
    SOURCE_VOCAB_FILE, TARGET_VOCAB_FILE,
};

use crate::bpe::BpeError;
use crate::model::{CheckpointError, ModelError};
use crate::multilingual::PrepError;
use crate::vocab::VocabError;

#[derive(Debug, thiserror::Error)]
pub enum DecodeError {
    #[error("beam size must be at least 1, got {0}")]
    InvalidBeam(usize),
    #[error("maximum length must be at least 1")]
    InvalidMaxLength,
    #[error("source vocabulary has {vocab} entries but the model expects {model}")]
    VocabularyMismatch { vocab: usize, model: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Prep(#[from] PrepError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Bpe(#[from] BpeError),
}
