//! The attention-based encoder-decoder network.

mod checkpoint;
mod forward;
mod params;

use thiserror::Error;

use crate::autodiff::{finite_difference_check, GradCheckReport, GraphError};

pub use checkpoint::{
    from_bytes, load_checkpoint, save_checkpoint, to_bytes, CheckpointError, FORMAT_VERSION, MAGIC, VERSION_OFFSET,
};
pub use forward::{DecoderStep, Dropout, EncodedSource, Model};
pub use params::{Gru, GruPart, Hyperparameters, ModelParameters, Param, INIT_SCALE, PARAM_COUNT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("source sentence is empty")]
    EmptySource,
    #[error("source id {id} outside vocabulary of {vocab_size}")]
    SourceIdOutOfRange { id: usize, vocab_size: usize },
    #[error("target id {id} outside vocabulary of {vocab_size}")]
    TargetIdOutOfRange { id: usize, vocab_size: usize },
    #[error("target sequence does not end with the end-of-sentence id")]
    MissingEndOfSentence,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameter(String),
    #[error("parameter shapes disagree with hyperparameters: {0}")]
    ShapeInconsistency(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl Model {
    /// Finite-difference check of the teacher-forced loss over every
    /// parameter entry, without dropout.
    pub fn gradient_check(&self, source: &[usize], target: &[usize], step: f64) -> Result<GradCheckReport, ModelError> {
        finite_difference_check(self.params.tensors(), step, |g, nodes| {
            let bound = forward::Bound::from_nodes(nodes);
            forward::sentence_loss_nodes(g, &bound, &self.hyper, source, target, &mut Dropout::Off)
        })
    }
}
