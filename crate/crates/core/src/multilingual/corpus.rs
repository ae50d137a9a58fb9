use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::coding::{code_language, force_target, LanguageSet, LanguageTag, TaggedSentence};
use super::PrepError;

/// Default sentence length limit, in tokens, excluding forcing symbols.
pub const DEFAULT_MAX_LEN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Baseline,
    MixSource,
    MixMultiSource,
    MixSourceBig,
    Bridge,
    Universal,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Baseline,
        Strategy::MixSource,
        Strategy::MixMultiSource,
        Strategy::MixSourceBig,
        Strategy::Bridge,
        Strategy::Universal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Baseline => "baseline",
            Strategy::MixSource => "mix-source",
            Strategy::MixMultiSource => "mix-multi-source",
            Strategy::MixSourceBig => "mix-source-big",
            Strategy::Bridge => "bridge",
            Strategy::Universal => "universal",
        }
    }

    pub fn requirement(self) -> &'static str {
        match self {
            Strategy::Baseline => "at least one parallel corpus",
            Strategy::MixSource | Strategy::MixSourceBig => "a parallel corpus X→Y and a monolingual corpus in Y",
            Strategy::MixMultiSource => "two parallel corpora X→Y and Z→Y with different sources and a shared target",
            Strategy::Bridge => "parallel corpora A→B and B→C plus a monolingual corpus in the pivot B",
            Strategy::Universal => "parallel corpora A→B and B→C plus monolingual corpora in B and in C",
        }
    }

    /// Zero-resourced strategies scale the BPE merge budget with the number
    /// of languages.
    pub fn is_zero_resourced(self) -> bool {
        matches!(self, Strategy::Bridge | Strategy::Universal)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = PrepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| PrepError::UnknownStrategy(s.to_string()))
    }
}

/// Aligned sentence pairs, already tokenized (and usually BPE-segmented).
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelCorpus {
    pub name: String,
    pub source_language: LanguageTag,
    pub target_language: LanguageTag,
    pub pairs: Vec<(Vec<String>, Vec<String>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonolingualCorpus {
    pub name: String,
    pub language: LanguageTag,
    pub sentences: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusSet {
    pub parallel: Vec<ParallelCorpus>,
    pub monolingual: Vec<MonolingualCorpus>,
}

impl CorpusSet {
    pub fn languages(&self) -> LanguageSet {
        let mut set = LanguageSet::default();
        for p in &self.parallel {
            set.insert(p.source_language.clone());
            set.insert(p.target_language.clone());
        }
        for m in &self.monolingual {
            set.insert(m.language.clone());
        }
        set
    }

    pub fn len(&self) -> usize {
        self.parallel.iter().map(|p| p.pairs.len()).sum::<usize>()
            + self.monolingual.iter().map(|m| m.sentences.len()).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn has_mono(&self, lang: &LanguageTag) -> bool {
        self.monolingual.iter().any(|m| &m.language == lang)
    }

    /// Checks that the corpora provide the sides `strategy` needs.
    pub fn check(&self, strategy: Strategy) -> Result<(), PrepError> {
        let ok = match strategy {
            Strategy::Baseline => !self.parallel.is_empty(),
            Strategy::MixSource | Strategy::MixSourceBig => {
                self.parallel.iter().any(|p| self.has_mono(&p.target_language))
            }
            Strategy::MixMultiSource => self.parallel.iter().any(|a| {
                self.parallel
                    .iter()
                    .any(|b| a.target_language == b.target_language && a.source_language != b.source_language)
            }),
            Strategy::Bridge | Strategy::Universal => self.parallel.iter().any(|ab| {
                self.parallel.iter().any(|bc| {
                    bc.source_language == ab.target_language
                        && bc.target_language != ab.source_language
                        && self.has_mono(&ab.target_language)
                        && (strategy == Strategy::Bridge || self.has_mono(&bc.target_language))
                })
            }),
        };
        if ok {
            Ok(())
        } else {
            Err(PrepError::MissingCorpus { strategy: strategy.name(), requirement: strategy.requirement() })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MixedPair {
    pub source: TaggedSentence,
    pub target: TaggedSentence,
    /// Name of the corpus the pair came from.
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedCorpus {
    pub strategy: Strategy,
    pub pairs: Vec<MixedPair>,
}

impl MixedCorpus {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Every pair's source is forced toward its target's language.
    pub fn is_consistent(&self) -> bool {
        self.pairs.iter().all(|p| p.source.forced_target.as_ref() == Some(&p.target.language))
    }

    /// Writes `<stem>.src`, `<stem>.tgt` and `<stem>.prov`, one line per pair.
    pub fn write(&self, dir: impl AsRef<Path>, stem: &str) -> Result<(), PrepError> {
        let dir = dir.as_ref();
        let mut src = String::new();
        let mut tgt = String::new();
        let mut prov = String::new();
        for p in &self.pairs {
            src.push_str(&p.source.to_line());
            src.push('\n');
            tgt.push_str(&p.target.to_line());
            tgt.push('\n');
            prov.push_str(&p.provenance);
            prov.push('\n');
        }
        write_file(&dir.join(format!("{stem}.src")), &src)?;
        write_file(&dir.join(format!("{stem}.tgt")), &tgt)?;
        write_file(&dir.join(format!("{stem}.prov")), &prov)?;
        Ok(())
    }

    /// Reads files written by [`MixedCorpus::write`]. A missing provenance
    /// file labels every pair `unknown`.
    pub fn read(dir: impl AsRef<Path>, stem: &str, strategy: Strategy) -> Result<Self, PrepError> {
        let dir = dir.as_ref();
        let src = read_lines(&dir.join(format!("{stem}.src")))?;
        let tgt = read_lines(&dir.join(format!("{stem}.tgt")))?;
        if src.len() != tgt.len() {
            return Err(PrepError::Misaligned { source_lines: src.len(), target_lines: tgt.len() });
        }
        let prov_path = dir.join(format!("{stem}.prov"));
        let prov = if prov_path.exists() { read_lines(&prov_path)? } else { vec!["unknown".to_string(); src.len()] };
        let placeholder = LanguageTag::new("und").expect("valid tag");
        let mut pairs = Vec::with_capacity(src.len());
        for ((s, t), p) in src.iter().zip(&tgt).zip(prov) {
            let source = TaggedSentence::parse(s, &placeholder)?;
            let fallback = source.forced_target.clone().unwrap_or_else(|| placeholder.clone());
            let target = TaggedSentence::parse(t, &fallback)?;
            pairs.push(MixedPair { source, target, provenance: p });
        }
        Ok(MixedCorpus { strategy, pairs })
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), PrepError> {
    fs::write(path, contents).map_err(|source| PrepError::Io { path: path.display().to_string(), source })
}

/// Lines of a UTF-8 text file, without terminators.
pub fn read_lines(path: &Path) -> Result<Vec<String>, PrepError> {
    let text = fs::read_to_string(path).map_err(|source| PrepError::Io { path: path.display().to_string(), source })?;
    Ok(text.lines().map(str::to_string).collect())
}

/// Codes every side, forces every source toward its pair's target language,
/// turns monolingual corpora into identity pairs and shuffles under `seed`.
pub fn build_strategy(strategy: Strategy, corpora: &CorpusSet, seed: u64) -> Result<MixedCorpus, PrepError> {
    corpora.check(strategy)?;
    let known = corpora.languages();
    let mut pairs = Vec::with_capacity(corpora.len());
    for p in &corpora.parallel {
        for (src, tgt) in &p.pairs {
            let coded_src = code_language(src, &p.source_language)?;
            let source = force_target(&coded_src, &p.source_language, &p.target_language, &known)?;
            let target = TaggedSentence {
                tokens: code_language(tgt, &p.target_language)?,
                language: p.target_language.clone(),
                forced_target: None,
            };
            pairs.push(MixedPair { source, target, provenance: p.name.clone() });
        }
    }
    for m in &corpora.monolingual {
        for s in &m.sentences {
            let coded = code_language(s, &m.language)?;
            let source = force_target(&coded, &m.language, &m.language, &known)?;
            let target = TaggedSentence { tokens: coded, language: m.language.clone(), forced_target: None };
            pairs.push(MixedPair { source, target, provenance: m.name.clone() });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pairs.shuffle(&mut rng);
    Ok(MixedCorpus { strategy, pairs })
}

/// Drops pairs where either side has more than `max_len` tokens, not
/// counting forcing symbols. Returns the kept corpus and the removed count.
pub fn filter_length(corpus: &MixedCorpus, max_len: usize) -> (MixedCorpus, usize) {
    let pairs: Vec<MixedPair> = corpus
        .pairs
        .iter()
        .filter(|p| p.source.body_len() <= max_len && p.target.body_len() <= max_len)
        .cloned()
        .collect();
    let removed = corpus.len() - pairs.len();
    (MixedCorpus { strategy: corpus.strategy, pairs }, removed)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BalanceRow {
    pub label: String,
    pub count: usize,
}

/// Pair counts per originating corpus and per language direction.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BalanceReport {
    pub total: usize,
    pub by_provenance: Vec<BalanceRow>,
    pub by_language_pair: Vec<BalanceRow>,
}

impl BalanceReport {
    pub fn fraction(&self, count: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            count as f64 / self.total as f64
        }
    }

    pub fn provenance_fraction(&self, label: &str) -> Option<f64> {
        self.by_provenance.iter().find(|r| r.label == label).map(|r| self.fraction(r.count))
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }
}

impl fmt::Display for BalanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "total\t{}", self.total)?;
        for r in &self.by_provenance {
            writeln!(f, "corpus\t{}\t{}\t{:.4}", r.label, r.count, self.fraction(r.count))?;
        }
        for r in &self.by_language_pair {
            writeln!(f, "direction\t{}\t{}\t{:.4}", r.label, r.count, self.fraction(r.count))?;
        }
        Ok(())
    }
}

pub fn balance_report(corpus: &MixedCorpus) -> BalanceReport {
    let mut prov: BTreeMap<String, usize> = BTreeMap::new();
    let mut dirs: BTreeMap<String, usize> = BTreeMap::new();
    for p in &corpus.pairs {
        *prov.entry(p.provenance.clone()).or_default() += 1;
        let dir = format!("{}-{}", p.source.language, p.target.language);
        *dirs.entry(dir).or_default() += 1;
    }
    let rows = |m: BTreeMap<String, usize>| m.into_iter().map(|(label, count)| BalanceRow { label, count }).collect();
    BalanceReport { total: corpus.len(), by_provenance: rows(prov), by_language_pair: rows(dirs) }
}
