use std::path::Path;

use rayon::prelude::*;

use crate::bpe::{apply_bpe, revert_text, MergeTable};
use crate::model::{load_checkpoint, save_checkpoint, Model};
use crate::multilingual::{
    code_language, force_target, parse_forcing_symbol, strip_codes, LanguageSet, LanguageTag, TaggedSentence,
};
use crate::vocab::Vocabulary;

use super::search::{beam_search, BeamConfig, Hypothesis};
use super::DecodeError;

pub const MODEL_FILE: &str = "model.ckpt";
pub const SOURCE_VOCAB_FILE: &str = "source.vocab";
pub const TARGET_VOCAB_FILE: &str = "target.vocab";
pub const MERGES_FILE: &str = "merges.txt";

/// A trained model with the vocabularies and merge table it was trained on.
#[derive(Debug, Clone)]
pub struct System {
    pub model: Model,
    pub source_vocab: Vocabulary,
    pub target_vocab: Vocabulary,
    pub merges: MergeTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Translation {
    /// Target tokens as produced, language codes included.
    pub coded: Vec<String>,
    /// Plain words after code stripping and subword joining.
    pub words: Vec<String>,
    pub score: f64,
}

impl Translation {
    pub fn text(&self) -> String {
        self.words.join(" ")
    }
}

impl System {
    pub fn new(
        model: Model,
        source_vocab: Vocabulary,
        target_vocab: Vocabulary,
        merges: MergeTable,
    ) -> Result<Self, DecodeError> {
        let expected = model.hyper.source_vocab_size;
        if source_vocab.len() != expected {
            return Err(DecodeError::VocabularyMismatch { vocab: source_vocab.len(), model: expected });
        }
        let expected = model.hyper.target_vocab_size;
        if target_vocab.len() != expected {
            return Err(DecodeError::VocabularyMismatch { vocab: target_vocab.len(), model: expected });
        }
        Ok(System { model, source_vocab, target_vocab, merges })
    }

    /// Reads `model.ckpt`, `source.vocab`, `target.vocab` and `merges.txt`.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, DecodeError> {
        let dir = dir.as_ref();
        System::new(
            load_checkpoint(dir.join(MODEL_FILE))?,
            Vocabulary::load(dir.join(SOURCE_VOCAB_FILE))?,
            Vocabulary::load(dir.join(TARGET_VOCAB_FILE))?,
            MergeTable::load(dir.join(MERGES_FILE))?,
        )
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), DecodeError> {
        let dir = dir.as_ref();
        save_checkpoint(&self.model, dir.join(MODEL_FILE))?;
        self.source_vocab.save(dir.join(SOURCE_VOCAB_FILE))?;
        self.target_vocab.save(dir.join(TARGET_VOCAB_FILE))?;
        self.merges.save(dir.join(MERGES_FILE))?;
        Ok(())
    }

    /// Languages the system can be forced toward.
    pub fn languages(&self) -> LanguageSet {
        LanguageSet::new(
            self.source_vocab.tokens()[..self.source_vocab.reserved_count()]
                .iter()
                .filter_map(|t| parse_forcing_symbol(t)),
        )
    }

    /// Segments, codes and forces a tokenized sentence.
    pub fn prepare_source<S: AsRef<str>>(
        &self,
        words: &[S],
        source_language: &LanguageTag,
        target_language: &LanguageTag,
    ) -> Result<TaggedSentence, DecodeError> {
        let pieces: Vec<String> = apply_bpe(&self.merges, words).iter().map(ToString::to_string).collect();
        let coded = code_language(&pieces, source_language)?;
        Ok(force_target(&coded, source_language, target_language, &self.languages())?)
    }

    pub fn finish(&self, hyp: &Hypothesis, length_normalize: bool) -> Translation {
        let (coded, words) = detokenize(&self.target_vocab, hyp.output());
        Translation { coded, words, score: hyp.score(length_normalize) }
    }

    /// n-best translations of an already coded and forced source.
    pub fn translate_tagged(
        &self,
        source: &TaggedSentence,
        config: &BeamConfig,
    ) -> Result<Vec<Translation>, DecodeError> {
        let ids = self.source_vocab.encode(&source.tokens);
        let hyps = beam_search(&self.model, &ids, config)?;
        Ok(hyps.iter().map(|h| self.finish(h, config.length_normalize)).collect())
    }

    pub fn translate<S: AsRef<str>>(
        &self,
        words: &[S],
        source_language: &LanguageTag,
        target_language: &LanguageTag,
        config: &BeamConfig,
    ) -> Result<Vec<Translation>, DecodeError> {
        let tagged = self.prepare_source(words, source_language, target_language)?;
        self.translate_tagged(&tagged, config)
    }

    /// Translates sentences independently, in parallel, keeping input order.
    pub fn translate_all(
        &self,
        sentences: &[Vec<String>],
        source_language: &LanguageTag,
        target_language: &LanguageTag,
        config: &BeamConfig,
    ) -> Result<Vec<Vec<Translation>>, DecodeError> {
        sentences.par_iter().map(|s| self.translate(s, source_language, target_language, config)).collect()
    }
}

/// Maps output ids to coded tokens and to plain words.
pub fn detokenize(vocab: &Vocabulary, ids: &[usize]) -> (Vec<String>, Vec<String>) {
    let coded = vocab.decode(ids);
    let (plain, _) = strip_codes(&coded);
    let words = revert_text(&plain);
    (coded, words)
}

/// `index ||| tokens ||| score`, one line per candidate.
pub fn format_nbest(index: usize, candidates: &[Translation]) -> String {
    let mut out = String::new();
    for c in candidates {
        out.push_str(&format!("{index} ||| {} ||| {:.6}\n", c.text(), c.score));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PivotOutput {
    pub intermediate: Vec<String>,
    pub output: Translation,
}

/// Translates `a → b` with the first system, then feeds the 1-best into the
/// second system as language `b`, forced toward `c`.
pub fn pivot_translate<S: AsRef<str>>(
    first: &System,
    second: &System,
    words: &[S],
    languages: (&LanguageTag, &LanguageTag, &LanguageTag),
    config: &BeamConfig,
) -> Result<PivotOutput, DecodeError> {
    let (a, b, c) = languages;
    let single = BeamConfig { n_best: 1, ..*config };
    let mid = first.translate(words, a, b, &single)?.remove(0);
    if mid.words.is_empty() {
        log::warn!("pivot: empty intermediate translation, returning empty output");
        return Ok(PivotOutput {
            intermediate: Vec::new(),
            output: Translation { coded: Vec::new(), words: Vec::new(), score: mid.score },
        });
    }
    let output = second.translate(&mid.words, b, c, &single)?.remove(0);
    Ok(PivotOutput { intermediate: mid.words, output })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::model::Hyperparameters;

    fn system() -> System {
        let counts: BTreeMap<String, u64> =
            [("@de@a", 2), ("@en@b", 1)].iter().map(|(t, c)| (t.to_string(), *c)).collect();
        let forcing = ["<EN>".to_string(), "<DE>".to_string()];
        let v = Vocabulary::from_counts(&counts, forcing, 100);
        let model = Model::init(Hyperparameters::new(v.len(), v.len(), 4, 4)).unwrap();
        System::new(model, v.clone(), v, MergeTable::default()).unwrap()
    }

    #[test]
    fn source_preparation() {
        let s = system();
        let de = LanguageTag::new("de").unwrap();
        let en = LanguageTag::new("en").unwrap();
        let t = s.prepare_source(&["a", "b"], &de, &en).unwrap();
        assert_eq!(t.tokens, ["<EN>", "@de@a", "@de@b", "<EN>"]);
        let fr = LanguageTag::new("fr").unwrap();
        assert!(s.prepare_source(&["a"], &de, &fr).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let s = system();
        let dir = tempfile::tempdir().unwrap();
        s.save(dir.path()).unwrap();
        let back = System::load(dir.path()).unwrap();
        assert_eq!(back.model, s.model);
        assert_eq!(back.source_vocab, s.source_vocab);
    }

    #[test]
    fn vocabulary_size_must_match_model() {
        let s = system();
        let small = Vocabulary::from_counts(&BTreeMap::new(), [], 10);
        assert!(matches!(
            System::new(s.model.clone(), small, s.target_vocab.clone(), MergeTable::default()),
            Err(DecodeError::VocabularyMismatch { .. })
        ));
    }

    #[test]
    fn finish_strips_codes_and_joins_pieces() {
        let counts: BTreeMap<String, u64> =
            [("@en@ca@@", 3), ("@en@t", 2)].iter().map(|(t, c)| (t.to_string(), *c)).collect();
        let v = Vocabulary::from_counts(&counts, [], 10);
        let model = Model::init(Hyperparameters::new(v.len(), v.len(), 2, 2)).unwrap();
        let s = System::new(model, v.clone(), v.clone(), MergeTable::default()).unwrap();
        let hyp = Hypothesis {
            tokens: vec![v.id("@en@ca@@"), v.id("@en@t"), crate::vocab::EOS_ID],
            log_prob: -1.0,
            finished: true,
        };
        let t = s.finish(&hyp, false);
        assert_eq!(t.coded, ["@en@ca@@", "@en@t"]);
        assert_eq!(t.words, ["cat"]);
        assert_eq!(format_nbest(4, &[t]), "4 ||| cat ||| -1.000000\n");
    }
}
