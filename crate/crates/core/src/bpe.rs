//! Joint byte-pair-encoding: learn merges over word frequencies, segment
//! words into subword pieces, and join pieces back into words.
//!
//! Non-final pieces carry a trailing `@@` in text form. The end-of-word
//! sentinel is internal: it takes part in merging but never appears in
//! emitted text.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use log::warn;
use thiserror::Error;

pub const END_OF_WORD: &str = "</w>";
pub const CONTINUATION_MARKER: &str = "@@";
/// Merge budget used at full scale, counted on source and target text jointly.
pub const DEFAULT_MERGES: usize = 39500;

#[derive(Debug, Error)]
pub enum BpeError {
    #[error("number of merges must be non-negative, got {0}")]
    NegativeMerges(i64),
    #[error("word frequency map is empty")]
    EmptyVocabulary,
    #[error("merge table I/O failed for {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed merge table at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MergeTable {
    merges: Vec<(String, String)>,
}

impl MergeTable {
    pub fn new(merges: Vec<(String, String)>) -> Self {
        MergeTable { merges }
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn len(&self) -> usize {
        self.merges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merges.is_empty()
    }

    /// Header line with the merge count, then one `left right` pair per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.merges.len());
        for (l, r) in &self.merges {
            out.push_str(l);
            out.push(' ');
            out.push_str(r);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, BpeError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(BpeError::Malformed { line: 1, reason: "missing count header".into() })?;
        let count: usize = header
            .trim()
            .parse()
            .map_err(|_| BpeError::Malformed { line: 1, reason: format!("header `{header}` is not a count") })?;
        let mut merges = Vec::with_capacity(count);
        for (i, line) in lines.enumerate() {
            let mut parts = line.split(' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(l), Some(r), None) if !l.is_empty() && !r.is_empty() => {
                    merges.push((l.to_string(), r.to_string()))
                }
                _ => {
                    return Err(BpeError::Malformed {
                        line: i + 2,
                        reason: format!("expected `left right`, got `{line}`"),
                    })
                }
            }
        }
        if merges.len() != count {
            return Err(BpeError::Malformed {
                line: 1,
                reason: format!("header announces {count} merges, file has {}", merges.len()),
            });
        }
        Ok(MergeTable { merges })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), BpeError> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|source| BpeError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BpeError> {
        let path = path.as_ref();
        let text =
            fs::read_to_string(path).map_err(|source| BpeError::Io { path: path.display().to_string(), source })?;
        Self::from_text(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubwordToken {
    pub text: String,
    /// True for every piece of a word except the last.
    pub continuation: bool,
}

impl SubwordToken {
    pub fn new(text: impl Into<String>, continuation: bool) -> Self {
        SubwordToken { text: text.into(), continuation }
    }

    /// Parses the text form, where a trailing `@@` marks continuation.
    pub fn parse(s: &str) -> Self {
        match s.strip_suffix(CONTINUATION_MARKER) {
            Some(stem) if !stem.is_empty() => SubwordToken::new(stem, true),
            _ => SubwordToken::new(s, false),
        }
    }
}

impl fmt::Display for SubwordToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)?;
        if self.continuation {
            f.write_str(CONTINUATION_MARKER)?;
        }
        Ok(())
    }
}

/// Splits a word into characters followed by the end-of-word sentinel.
pub fn initial_symbols(word: &str) -> Vec<String> {
    word.chars().map(String::from).chain(std::iter::once(END_OF_WORD.to_string())).collect()
}

/// Replaces every non-overlapping occurrence of `(left, right)`, scanning
/// left to right.
pub fn merge_pair(symbols: &[String], left: &str, right: &str) -> Vec<String> {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == left && symbols[i + 1] == right {
            out.push(format!("{left}{right}"));
            i += 2;
        } else {
            out.push(symbols[i].clone());
            i += 1;
        }
    }
    out
}

/// Heap entry: highest count first, then lexicographically smallest pair.
#[derive(Debug, PartialEq, Eq)]
struct Candidate {
    count: i64,
    pair: Reverse<(String, String)>,
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.count.cmp(&other.count).then_with(|| self.pair.cmp(&other.pair))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

type Pair = (String, String);

fn word_pairs(symbols: &[String]) -> impl Iterator<Item = Pair> + '_ {
    symbols.windows(2).map(|w| (w[0].clone(), w[1].clone()))
}

/// Learns up to `num_merges` merges, each time joining the most frequent
/// adjacent symbol pair (ties to the lexicographically smallest pair) and
/// stopping early once no pair occurs at least twice.
pub fn learn_bpe(word_frequencies: &BTreeMap<String, u64>, num_merges: i64) -> Result<MergeTable, BpeError> {
    if num_merges < 0 {
        return Err(BpeError::NegativeMerges(num_merges));
    }
    if word_frequencies.is_empty() {
        return Err(BpeError::EmptyVocabulary);
    }
    let mut words: Vec<(Vec<String>, i64)> =
        word_frequencies.iter().filter(|(w, _)| !w.is_empty()).map(|(w, &c)| (initial_symbols(w), c as i64)).collect();

    let mut counts: HashMap<Pair, i64> = HashMap::new();
    let mut index: HashMap<Pair, HashSet<usize>> = HashMap::new();
    for (wi, (symbols, freq)) in words.iter().enumerate() {
        for pair in word_pairs(symbols) {
            *counts.entry(pair.clone()).or_default() += freq;
            index.entry(pair).or_default().insert(wi);
        }
    }
    let mut heap: BinaryHeap<Candidate> =
        counts.iter().map(|(pair, &count)| Candidate { count, pair: Reverse(pair.clone()) }).collect();

    let mut merges = Vec::new();
    while (merges.len() as i64) < num_merges {
        // Skip stale heap entries whose count has since changed.
        let best = loop {
            match heap.pop() {
                None => break None,
                Some(c) if counts.get(&c.pair.0) == Some(&c.count) => break Some(c),
                Some(_) => continue,
            }
        };
        let Some(best) = best else { break };
        if best.count < 2 {
            break;
        }
        let (left, right) = best.pair.0;
        let affected: Vec<usize> = {
            let mut v: Vec<usize> =
                index.get(&(left.clone(), right.clone())).map(|s| s.iter().copied().collect()).unwrap_or_default();
            v.sort_unstable();
            v
        };
        let mut touched: HashSet<Pair> = HashSet::new();
        for wi in affected {
            let (symbols, freq) = &words[wi];
            let freq = *freq;
            let merged = merge_pair(symbols, &left, &right);
            if merged.len() == symbols.len() {
                continue;
            }
            for pair in word_pairs(symbols) {
                let c = counts.get_mut(&pair).expect("counted pair");
                *c -= freq;
                if let Some(set) = index.get_mut(&pair) {
                    set.remove(&wi);
                }
                touched.insert(pair);
            }
            for pair in word_pairs(&merged) {
                *counts.entry(pair.clone()).or_default() += freq;
                index.entry(pair.clone()).or_default().insert(wi);
                touched.insert(pair);
            }
            words[wi].0 = merged;
        }
        for pair in touched {
            let count = counts[&pair];
            if count > 0 {
                heap.push(Candidate { count, pair: Reverse(pair) });
            } else {
                counts.remove(&pair);
                index.remove(&pair);
            }
        }
        merges.push((left, right));
    }
    Ok(MergeTable { merges })
}

/// Applies a merge table to words, caching segmentations.
#[derive(Debug, Clone)]
pub struct Segmenter {
    ranks: HashMap<Pair, usize>,
    cache: HashMap<String, Vec<SubwordToken>>,
}

impl Segmenter {
    pub fn new(table: &MergeTable) -> Self {
        let ranks = table.merges.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
        Segmenter { ranks, cache: HashMap::new() }
    }

    /// Splits a word to characters plus sentinel, then repeatedly merges the
    /// adjacent pair with the earliest rank until no listed pair remains.
    pub fn segment_word(&mut self, word: &str) -> Vec<SubwordToken> {
        if let Some(hit) = self.cache.get(word) {
            return hit.clone();
        }
        let mut symbols = initial_symbols(word);
        loop {
            let best = symbols
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0].clone(), w[1].clone())).map(|&r| (r, w)))
                .min_by_key(|(r, _)| *r)
                .map(|(_, w)| (w[0].clone(), w[1].clone()));
            match best {
                Some((l, r)) => symbols = merge_pair(&symbols, &l, &r),
                None => break,
            }
        }
        let last = symbols.len() - 1;
        let mut pieces = Vec::with_capacity(symbols.len());
        for (i, s) in symbols.into_iter().enumerate() {
            let text = if i == last { s.strip_suffix(END_OF_WORD).unwrap_or(&s).to_string() } else { s };
            if text.is_empty() {
                // A bare sentinel closes the word; the previous piece is final.
                if let Some(prev) = pieces.last_mut() {
                    let prev: &mut SubwordToken = prev;
                    prev.continuation = false;
                }
                continue;
            }
            pieces.push(SubwordToken::new(text, true));
        }
        if let Some(last) = pieces.last_mut() {
            last.continuation = false;
        }
        self.cache.insert(word.to_string(), pieces.clone());
        pieces
    }

    pub fn segment<S: AsRef<str>>(&mut self, sentence: &[S]) -> Vec<SubwordToken> {
        sentence.iter().flat_map(|w| self.segment_word(w.as_ref())).collect()
    }
}

pub fn apply_bpe<S: AsRef<str>>(table: &MergeTable, sentence: &[S]) -> Vec<SubwordToken> {
    Segmenter::new(table).segment(sentence)
}

/// Joins each run of continuation pieces with the final piece that follows.
/// A dangling continuation piece at the end is emitted as-is with a warning.
pub fn revert_bpe(tokens: &[SubwordToken]) -> Vec<String> {
    let mut words = Vec::new();
    let mut pending = String::new();
    for t in tokens {
        pending.push_str(&t.text);
        if !t.continuation {
            words.push(std::mem::take(&mut pending));
        }
    }
    if !pending.is_empty() {
        warn!("subword sequence ends with a continuation piece; joined `{pending}` as-is");
        words.push(pending);
    }
    words
}

/// Reverts text-form pieces (`un@@ related` → `unrelated`).
pub fn revert_text<S: AsRef<str>>(pieces: &[S]) -> Vec<String> {
    let tokens: Vec<SubwordToken> = pieces.iter().map(|p| SubwordToken::parse(p.as_ref())).collect();
    revert_bpe(&tokens)
}

/// Whitespace word counts over any number of sentences.
pub fn word_frequencies<'a, I>(sentences: I) -> BTreeMap<String, u64>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut out = BTreeMap::new();
    for s in sentences {
        for w in s.split_whitespace() {
            *out.entry(w.to_string()).or_insert(0) += 1;
        }
    }
    out
}

/// Merge budget for zero-resourced setups: `base × languages / 2`.
pub fn scaled_merges(base: usize, distinct_languages: usize) -> usize {
    base * distinct_languages / 2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn freqs(items: &[(&str, u64)]) -> BTreeMap<String, u64> {
        items.iter().map(|(w, c)| (w.to_string(), *c)).collect()
    }

    fn text(tokens: &[SubwordToken]) -> Vec<String> {
        tokens.iter().map(ToString::to_string).collect()
    }

    #[test]
    fn single_merge_picks_most_frequent_pair() {
        let t = learn_bpe(&freqs(&[("ab", 3), ("bc", 1)]), 1).unwrap();
        assert_eq!(t.merges(), &[("a".to_string(), "b".to_string())]);
    }

    #[test]
    fn zero_merges_and_errors() {
        assert!(learn_bpe(&freqs(&[("abc", 5)]), 0).unwrap().is_empty());
        assert!(matches!(learn_bpe(&freqs(&[("a", 1)]), -1), Err(BpeError::NegativeMerges(-1))));
        assert!(matches!(learn_bpe(&BTreeMap::new(), 3), Err(BpeError::EmptyVocabulary)));
    }

    #[test]
    fn overlapping_pairs() {
        // (a,a) occurs twice per word → 4; then (a,b), (aa,a), (b,</w>) tie at 2
        // and (a,b) is lexicographically smallest.
        let t = learn_bpe(&freqs(&[("aaab", 2)]), 2).unwrap();
        assert_eq!(t.merges(), &[("a".into(), "a".into()), ("a".into(), "b".into())]);
    }

    #[test]
    fn stops_when_no_pair_repeats() {
        let t = learn_bpe(&freqs(&[("xyz", 1)]), 10).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn apply_examples() {
        let empty = MergeTable::default();
        assert_eq!(text(&apply_bpe(&empty, &["cat"])), ["c@@", "a@@", "t"]);
        let ab = MergeTable::new(vec![("a".into(), "b".into())]);
        assert_eq!(text(&apply_bpe(&ab, &["abc"])), ["ab@@", "c"]);
        let with_sentinel = MergeTable::new(vec![("c".into(), END_OF_WORD.into())]);
        assert_eq!(text(&apply_bpe(&with_sentinel, &["abc"])), ["a@@", "b@@", "c"]);
    }

    #[test]
    fn revert_examples() {
        let toks = vec![SubwordToken::new("un", true), SubwordToken::new("related", false)];
        assert_eq!(revert_bpe(&toks), ["unrelated"]);
        let plain = vec![SubwordToken::new("a", false), SubwordToken::new("b", false)];
        assert_eq!(revert_bpe(&plain), ["a", "b"]);
        let dangling = vec![SubwordToken::new("x", false), SubwordToken::new("y", true)];
        assert_eq!(revert_bpe(&dangling), ["x", "y"]);
        assert_eq!(revert_text(&["un@@", "related", "x"]), ["unrelated", "x"]);
    }

    #[test]
    fn segmentation_reproduces_after_revert() {
        let corpus = "the cat sat on the mat the hat";
        let table = learn_bpe(&word_frequencies([corpus]), 6).unwrap();
        let words: Vec<&str> = corpus.split(' ').collect();
        let once = apply_bpe(&table, &words);
        let again = apply_bpe(&table, &revert_bpe(&once));
        assert_eq!(once, again);
    }

    #[test]
    fn merge_file_round_trip() {
        let table = learn_bpe(&freqs(&[("lower", 5), ("lowest", 3), ("newer", 4)]), 8).unwrap();
        let text = table.to_text();
        assert!(text.starts_with(&format!("{}\n", table.len())));
        assert_eq!(MergeTable::from_text(&text).unwrap(), table);
        assert!(MergeTable::from_text("2\na b\n").is_err());
        assert!(MergeTable::from_text("1\nab\n").is_err());
    }

    #[test]
    fn merge_scaling() {
        assert_eq!(scaled_merges(39500, 2), 39500);
        assert_eq!(scaled_merges(39500, 3), 59250);
    }
}
