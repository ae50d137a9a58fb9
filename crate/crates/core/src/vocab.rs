//! Token/id mapping with a frequency short list.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use crate::multilingual::{is_forcing_symbol, MixedCorpus};

pub const UNK_ID: usize = 0;
pub const EOS_ID: usize = 1;
pub const BOS_ID: usize = 2;

pub const UNK: &str = "<unk>";
pub const EOS: &str = "</s>";
pub const BOS: &str = "<s>";

pub const DEFAULT_SHORT_LIST: usize = 40_000;

#[derive(Debug, thiserror::Error)]
pub enum VocabError {
    #[error("vocabulary I/O failed for {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed vocabulary at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Source,
    Target,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    reserved: usize,
}

impl Vocabulary {
    /// Reserved symbols, then the sorted forcing symbols, then the
    /// `short_list_size` most frequent tokens (ties broken lexicographically).
    pub fn from_counts<I>(counts: &BTreeMap<String, u64>, forcing_symbols: I, short_list_size: usize) -> Self
    where
        I: IntoIterator<Item = String>,
    {
        let mut tokens: Vec<String> = [UNK, EOS, BOS].iter().map(|s| s.to_string()).collect();
        let forcing: BTreeSet<String> = forcing_symbols.into_iter().collect();
        tokens.extend(forcing);
        let reserved = tokens.len();
        let mut ranked: Vec<(&String, u64)> =
            counts.iter().filter(|(t, _)| !tokens.contains(t)).map(|(t, c)| (t, *c)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        tokens.extend(ranked.into_iter().take(short_list_size).map(|(t, _)| t.clone()));
        Self::from_tokens(tokens, reserved)
    }

    fn from_tokens(tokens: Vec<String>, reserved: usize) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { tokens, index, reserved }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Number of reserved entries, forcing symbols included.
    pub fn reserved_count(&self) -> usize {
        self.reserved
    }

    pub fn is_reserved(&self, id: usize) -> bool {
        id < self.reserved
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// The id of `token`, or `UNK_ID` when it is outside the short list.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    /// Encodes and appends the end-of-sentence id.
    pub fn encode_with_eos<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        let mut ids = self.encode(tokens);
        ids.push(EOS_ID);
        ids
    }

    /// Maps ids back to tokens, stopping at the first end-of-sentence.
    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().take_while(|&&i| i != EOS_ID).map(|&i| self.token(i).unwrap_or(UNK).to_string()).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, VocabError> {
        let tokens: Vec<String> = text.lines().map(str::to_string).collect();
        for (i, expected) in [UNK, EOS, BOS].iter().enumerate() {
            match tokens.get(i) {
                Some(t) if t == expected => {}
                other => {
                    return Err(VocabError::Malformed {
                        line: i + 1,
                        reason: format!("expected reserved token {expected}, found {other:?}"),
                    })
                }
            }
        }
        let mut seen = BTreeSet::new();
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.contains(char::is_whitespace) {
                return Err(VocabError::Malformed { line: i + 1, reason: "empty or whitespace token".into() });
            }
            if !seen.insert(t.as_str()) {
                return Err(VocabError::Malformed { line: i + 1, reason: format!("duplicate token {t}") });
            }
        }
        let reserved = 3 + tokens[3..].iter().take_while(|t| is_forcing_symbol(t)).count();
        Ok(Self::from_tokens(tokens, reserved))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), VocabError> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|source| VocabError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, VocabError> {
        let path = path.as_ref();
        let text =
            fs::read_to_string(path).map_err(|source| VocabError::Io { path: path.display().to_string(), source })?;
        Self::from_text(&text)
    }
}

/// Builds one side's vocabulary. Forcing symbols for every language in the
/// corpus are reserved on both sides so the two files share their header.
pub fn build_vocabulary(corpus: &MixedCorpus, side: Side, short_list_size: usize) -> Vocabulary {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut forcing = BTreeSet::new();
    for p in &corpus.pairs {
        forcing.insert(p.source.language.forcing_symbol());
        forcing.insert(p.target.language.forcing_symbol());
        let sentence = match side {
            Side::Source => p.source.body(),
            Side::Target => p.target.body(),
        };
        for t in sentence {
            *counts.entry(t.clone()).or_insert(0) += 1;
        }
    }
    Vocabulary::from_counts(&counts, forcing, short_list_size)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(items: &[(&str, u64)]) -> BTreeMap<String, u64> {
        items.iter().map(|(t, c)| (t.to_string(), *c)).collect()
    }

    #[test]
    fn reserved_ids_come_first() {
        let v = Vocabulary::from_counts(&counts(&[("a", 3)]), ["<FR>".to_string(), "<EN>".to_string()], 10);
        assert_eq!(v.tokens(), ["<unk>", "</s>", "<s>", "<EN>", "<FR>", "a"]);
        assert_eq!(v.reserved_count(), 5);
        assert_eq!(v.id(UNK), UNK_ID);
        assert_eq!(v.id(EOS), EOS_ID);
        assert_eq!(v.id(BOS), BOS_ID);
    }

    #[test]
    fn under_capacity_keeps_everything() {
        let c: BTreeMap<String, u64> = (0..10).map(|i| (format!("w{i}"), i + 1)).collect();
        let v = Vocabulary::from_counts(&c, [], DEFAULT_SHORT_LIST);
        assert_eq!(v.len(), 13);
        assert_eq!(v.token(3), Some("w9"));
    }

    #[test]
    fn ties_are_lexicographic_and_rare_words_are_unknown() {
        let v = Vocabulary::from_counts(&counts(&[("zeta", 5), ("alpha", 5), ("mid", 9), ("rare", 1)]), [], 3);
        assert_eq!(v.tokens()[3..], ["mid", "alpha", "zeta"]);
        assert!(v.id("alpha") < v.id("zeta"));
        assert_eq!(v.id("rare"), UNK_ID);
        assert_eq!(v.encode_with_eos(&["mid", "rare"]), [3, UNK_ID, EOS_ID]);
        assert_eq!(v.decode(&[3, 4, EOS_ID, 5]), ["mid", "alpha"]);
    }

    #[test]
    fn text_round_trip() {
        let v = Vocabulary::from_counts(&counts(&[("@de@x", 2), ("@de@y", 1)]), ["<DE>".to_string()], 10);
        let back = Vocabulary::from_text(&v.to_text()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.reserved_count(), 4);
        assert!(Vocabulary::from_text("a\nb\nc\n").is_err());
        assert!(Vocabulary::from_text("<unk>\n</s>\n<s>\nx\nx\n").is_err());
    }
}
