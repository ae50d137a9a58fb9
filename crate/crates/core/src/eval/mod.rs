//! BLEU, wrong-language statistics and embedding export.

mod bleu;
mod embeddings;
mod langstats;

pub use bleu::{bleu, bleu_tokens, delta_report, tokenize_13a, BleuDelta, BleuReport};
pub use embeddings::{export_embeddings, read_embeddings, EmbeddingRecord, EmbeddingTable};
pub use langstats::{wrong_language_stats, Percentage, WrongLanguageReport};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("hypothesis/reference count mismatch: {hypotheses} vs {references}")]
    LengthMismatch { hypotheses: usize, references: usize },
    #[error("cannot score an empty corpus")]
    EmptyCorpus,
    #[error("test sets differ: {system} vs {baseline}")]
    TestSetMismatch { system: String, baseline: String },
    #[error("malformed embedding table at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("I/O failed for {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
