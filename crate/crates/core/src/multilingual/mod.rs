//! Language coding, target forcing and corpus mixing.

mod coding;
mod corpus;
mod prepare;

pub use coding::{
    code_language, force_target, is_forcing_symbol, parse_forcing_symbol, split_code, strip_codes, LanguageSet,
    LanguageTag, TaggedSentence,
};
pub use corpus::{
    balance_report, build_strategy, filter_length, read_lines, BalanceReport, BalanceRow, CorpusSet, MixedCorpus,
    MixedPair, MonolingualCorpus, ParallelCorpus, Strategy, DEFAULT_MAX_LEN,
};
pub use prepare::{prepare, MonolingualSource, ParallelSource, PrepConfig, PrepSummary};

use crate::bpe::BpeError;

#[derive(Debug, thiserror::Error)]
pub enum PrepError {
    #[error("invalid language code {0:?}: expected 2 to 8 lowercase ASCII letters")]
    InvalidLanguage(String),
    #[error("token {0:?} already carries a language code")]
    DoubleCoding(String),
    #[error("target language {0} is not among the configured languages")]
    UnknownTarget(LanguageTag),
    #[error("sentence already contains forcing symbol {0}")]
    AlreadyForced(String),
    #[error("malformed forcing symbols in line {0:?}")]
    MalformedForcing(String),
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
    #[error("strategy {strategy} requires {requirement}")]
    MissingCorpus { strategy: &'static str, requirement: &'static str },
    #[error("source and target files are misaligned: {source_lines} vs {target_lines} lines")]
    Misaligned { source_lines: usize, target_lines: usize },
    #[error("invalid corpus declaration {0:?}")]
    BadDeclaration(String),
    #[error("I/O failed for {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Bpe(#[from] BpeError),
}
