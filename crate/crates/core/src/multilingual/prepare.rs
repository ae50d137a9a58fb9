use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bpe::{learn_bpe, scaled_merges, word_frequencies, MergeTable, Segmenter};

use super::coding::LanguageTag;
use super::corpus::{
    balance_report, build_strategy, filter_length, read_lines, BalanceReport, CorpusSet, MixedCorpus,
    MonolingualCorpus, ParallelCorpus, Strategy,
};
use super::PrepError;

/// `src_lang:tgt_lang:src_path:tgt_path`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelSource {
    pub source_language: LanguageTag,
    pub target_language: LanguageTag,
    pub source_path: PathBuf,
    pub target_path: PathBuf,
}

impl FromStr for ParallelSource {
    type Err = PrepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.splitn(4, ':').collect();
        if parts.len() != 4 || parts[2].is_empty() || parts[3].is_empty() {
            return Err(PrepError::BadDeclaration(s.to_string()));
        }
        Ok(ParallelSource {
            source_language: parts[0].parse()?,
            target_language: parts[1].parse()?,
            source_path: parts[2].into(),
            target_path: parts[3].into(),
        })
    }
}

/// `lang:path`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonolingualSource {
    pub language: LanguageTag,
    pub path: PathBuf,
}

impl FromStr for MonolingualSource {
    type Err = PrepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some((lang, path)) if !path.is_empty() => {
                Ok(MonolingualSource { language: lang.parse()?, path: path.into() })
            }
            _ => Err(PrepError::BadDeclaration(s.to_string())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PrepConfig {
    pub strategy: Strategy,
    pub parallel: Vec<ParallelSource>,
    pub monolingual: Vec<MonolingualSource>,
    /// Merge budget before scaling for zero-resourced strategies.
    pub merges: usize,
    pub max_len: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct PrepSummary {
    pub merges: MergeTable,
    pub corpus: MixedCorpus,
    pub removed: usize,
    pub balance: BalanceReport,
}

fn label(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

fn split(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_string).collect()
}

fn segment(seg: &mut Segmenter, line: &[String]) -> Vec<String> {
    seg.segment(line).iter().map(ToString::to_string).collect()
}

/// Learns joint BPE over every raw side, segments, codes, forces, mixes and
/// length-filters, then writes `train.{src,tgt,prov}`, `merges.txt` and
/// `balance.txt` under `out_dir`.
pub fn prepare(config: &PrepConfig) -> Result<PrepSummary, PrepError> {
    let mut raw_parallel = Vec::new();
    for p in &config.parallel {
        let src = read_lines(&p.source_path)?;
        let tgt = read_lines(&p.target_path)?;
        if src.len() != tgt.len() {
            return Err(PrepError::Misaligned { source_lines: src.len(), target_lines: tgt.len() });
        }
        raw_parallel.push((p, src, tgt));
    }
    let mut raw_mono = Vec::new();
    for m in &config.monolingual {
        raw_mono.push((m, read_lines(&m.path)?));
    }

    let mut skeleton = CorpusSet::default();
    for (p, _, _) in &raw_parallel {
        skeleton.parallel.push(ParallelCorpus {
            name: String::new(),
            source_language: p.source_language.clone(),
            target_language: p.target_language.clone(),
            pairs: Vec::new(),
        });
    }
    for (m, _) in &raw_mono {
        skeleton.monolingual.push(MonolingualCorpus {
            name: String::new(),
            language: m.language.clone(),
            sentences: Vec::new(),
        });
    }
    skeleton.check(config.strategy)?;

    let budget = if config.strategy.is_zero_resourced() {
        scaled_merges(config.merges, skeleton.languages().len())
    } else {
        config.merges
    };
    let all_lines = raw_parallel
        .iter()
        .flat_map(|(_, s, t)| s.iter().chain(t.iter()))
        .chain(raw_mono.iter().flat_map(|(_, l)| l.iter()))
        .map(String::as_str);
    let freqs = word_frequencies(all_lines);
    let merges = if freqs.is_empty() { MergeTable::default() } else { learn_bpe(&freqs, budget as i64)? };
    let mut seg = Segmenter::new(&merges);

    let mut set = CorpusSet::default();
    for (p, src, tgt) in &raw_parallel {
        let pairs =
            src.iter().zip(tgt).map(|(s, t)| (segment(&mut seg, &split(s)), segment(&mut seg, &split(t)))).collect();
        set.parallel.push(ParallelCorpus {
            name: label(&p.source_path),
            source_language: p.source_language.clone(),
            target_language: p.target_language.clone(),
            pairs,
        });
    }
    for (m, lines) in &raw_mono {
        set.monolingual.push(MonolingualCorpus {
            name: label(&m.path),
            language: m.language.clone(),
            sentences: lines.iter().map(|l| segment(&mut seg, &split(l))).collect(),
        });
    }

    let mixed = build_strategy(config.strategy, &set, config.seed)?;
    let (corpus, removed) = filter_length(&mixed, config.max_len);
    let balance = balance_report(&corpus);
    log::info!("{}: {} pairs kept, {} removed by length", config.strategy, corpus.len(), removed);

    fs::create_dir_all(&config.out_dir)
        .map_err(|source| PrepError::Io { path: config.out_dir.display().to_string(), source })?;
    corpus.write(&config.out_dir, "train")?;
    merges.save(config.out_dir.join("merges.txt"))?;
    let balance_path = config.out_dir.join("balance.txt");
    fs::write(&balance_path, balance.to_string())
        .map_err(|source| PrepError::Io { path: balance_path.display().to_string(), source })?;
    Ok(PrepSummary { merges, corpus, removed, balance })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn declarations_parse() {
        let p: ParallelSource = "en:de:src.en:tgt.de".parse().unwrap();
        assert_eq!(p.source_language.code(), "en");
        assert_eq!(p.target_path, PathBuf::from("tgt.de"));
        let m: MonolingualSource = "de:mono.de".parse().unwrap();
        assert_eq!(m.path, PathBuf::from("mono.de"));
        assert!("en:de:src.en".parse::<ParallelSource>().is_err());
        assert!("EN:x".parse::<MonolingualSource>().is_err());
        assert!("de".parse::<MonolingualSource>().is_err());
    }

    #[test]
    fn pipeline_is_byte_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        fs::write(d.join("src.en"), "the cat sat\nthe dog ran fast\n").unwrap();
        fs::write(d.join("tgt.de"), "die katze sass\nder hund lief schnell\n").unwrap();
        fs::write(d.join("mono.de"), "die katze lief\nder hund sass\nschnell schnell\n").unwrap();
        let run = |out: &str| {
            let config = PrepConfig {
                strategy: Strategy::MixSource,
                parallel: vec![format!("en:de:{}:{}", d.join("src.en").display(), d.join("tgt.de").display())
                    .parse()
                    .unwrap()],
                monolingual: vec![format!("de:{}", d.join("mono.de").display()).parse().unwrap()],
                merges: 10,
                max_len: 50,
                seed: 4,
                out_dir: d.join(out),
            };
            prepare(&config).unwrap()
        };
        let a = run("a");
        let b = run("b");
        assert_eq!(a.corpus.len(), 5);
        assert_eq!(a.balance.provenance_fraction("mono.de"), Some(0.6));
        for f in ["train.src", "train.tgt", "train.prov", "merges.txt", "balance.txt"] {
            assert_eq!(fs::read(d.join("a").join(f)).unwrap(), fs::read(d.join("b").join(f)).unwrap(), "{f}");
        }
        assert_eq!(b.merges, a.merges);
        for p in &a.corpus.pairs {
            assert!(p.source.body().iter().all(|t| t.starts_with("@en@") || t.starts_with("@de@")));
        }
    }

    #[test]
    fn misaligned_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        fs::write(d.join("a"), "x\ny\n").unwrap();
        fs::write(d.join("b"), "x\n").unwrap();
        let config = PrepConfig {
            strategy: Strategy::Baseline,
            parallel: vec![ParallelSource {
                source_language: LanguageTag::new("en").unwrap(),
                target_language: LanguageTag::new("de").unwrap(),
                source_path: d.join("a"),
                target_path: d.join("b"),
            }],
            monolingual: vec![],
            merges: 5,
            max_len: 50,
            seed: 1,
            out_dir: d.join("out"),
        };
        assert!(matches!(prepare(&config), Err(PrepError::Misaligned { .. })));
    }
}
