//! The `mlnmt` command line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{ArgMatches, CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::bpe::{learn_bpe, revert_text, scaled_merges, word_frequencies, MergeTable, Segmenter, DEFAULT_MERGES};
use crate::decode::{format_nbest, pivot_translate, BeamConfig, System, DEFAULT_BEAM, MERGES_FILE};
use crate::eval::{bleu, export_embeddings, wrong_language_stats};
use crate::model::{Hyperparameters, Model};
use crate::multilingual::{
    code_language, force_target, prepare, read_lines, LanguageSet, LanguageTag, MixedCorpus, MixedPair,
    MonolingualSource, ParallelSource, PrepConfig, Strategy, TaggedSentence, DEFAULT_MAX_LEN,
};
use crate::tensor::Precision;
use crate::train::{adapt, encode_corpus, train, DevSet, LossScale, Schedule, TrainSetup, DEFAULT_BATCH_SIZE};
use crate::vocab::{build_vocabulary, Side, Vocabulary, DEFAULT_SHORT_LIST};

pub const MANIFEST_FILE: &str = "manifest.txt";
const TRAIN_STEM: &str = "train";
const DEV_STEM: &str = "dev";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("io: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    /// One line, `error: <kind>: <message>`.
    pub fn render(&self) -> String {
        let text = match self {
            CliError::Run(m) => format!("run: {m}"),
            other => other.to_string(),
        };
        format!("error: {}", text.replace('\n', " "))
    }
}

fn run_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Run(e.to_string())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Parser)]
#[command(
    name = "mlnmt",
    version,
    about = "Multilingual attention-based neural machine translation",
    args_override_self = true
)]
struct Cli {
    /// Seed for every random choice of the run.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads for sentence-parallel stages.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// File of `key = value` lines supplying flags; command-line flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct ScheduleArgs {
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    batch_size: usize,
    #[arg(long, default_value_t = 500)]
    eval_every: usize,
    #[arg(long, default_value_t = 5)]
    patience: usize,
    #[arg(long, default_value_t = 10)]
    max_epochs: usize,
    /// Wall-clock budget in minutes.
    #[arg(long)]
    max_minutes: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    max_norm: f64,
    /// token, sentence or sum
    #[arg(long, default_value = "token")]
    loss_scale: String,
}

impl ScheduleArgs {
    fn schedule(&self) -> Result<Schedule, CliError> {
        let loss_scale = match self.loss_scale.as_str() {
            "token" => LossScale::PerToken,
            "sentence" => LossScale::PerSentence,
            "sum" => LossScale::Sum,
            other => return Err(CliError::Usage(format!("unknown loss scale {other:?}"))),
        };
        if self.batch_size == 0 || self.eval_every == 0 {
            return Err(CliError::Usage("batch-size and eval-every must be positive".into()));
        }
        Ok(Schedule {
            batch_size: self.batch_size,
            eval_every_updates: self.eval_every,
            patience: self.patience,
            max_epochs: self.max_epochs,
            wall_clock_limit: self.max_minutes.map(|m| Duration::from_secs_f64(m * 60.0)),
            max_norm: self.max_norm,
            loss_scale,
        })
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learn a joint merge table from raw text files.
    BpeLearn {
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MERGES)]
        merges: usize,
        /// Scale the merge budget by this many languages over two.
        #[arg(long)]
        languages: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Segment a text file with a merge table.
    BpeApply {
        #[arg(long)]
        merges: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Segment, code, force, mix and filter corpora for one strategy.
    Prep {
        #[arg(long)]
        strategy: String,
        /// src_lang:tgt_lang:src_file:tgt_file
        #[arg(long)]
        parallel: Vec<String>,
        /// lang:file
        #[arg(long)]
        mono: Vec<String>,
        /// Development pairs, src_lang:tgt_lang:src_file:tgt_file
        #[arg(long)]
        dev: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_MERGES)]
        merges: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
        max_len: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on a prepared corpus directory.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        embedding: usize,
        #[arg(long, default_value_t = 1024)]
        hidden: usize,
        #[arg(long)]
        attention: Option<usize>,
        #[arg(long)]
        readout: Option<usize>,
        #[arg(long, default_value_t = 0.2)]
        dropout_hidden: f64,
        #[arg(long, default_value_t = 0.1)]
        dropout_io: f64,
        /// 32 or 64
        #[arg(long, default_value = "64")]
        precision: String,
        #[arg(long, default_value_t = DEFAULT_SHORT_LIST)]
        short_list: usize,
        #[command(flatten)]
        schedule: ScheduleArgs,
    },
    /// Continue training a model on the genuine parallel part of a corpus.
    Adapt {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Keep only training pairs from this originating corpus.
        #[arg(long)]
        provenance: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        schedule: ScheduleArgs,
    },
    /// Translate a tokenized text file, one sentence per line.
    Translate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        src: String,
        #[arg(long)]
        tgt: String,
        #[arg(long, default_value_t = DEFAULT_BEAM)]
        beam: usize,
        #[arg(long, default_value_t = 1)]
        nbest: usize,
        #[arg(long)]
        max_len: Option<usize>,
        #[arg(long)]
        normalize: bool,
        /// Emit target tokens with their language codes.
        #[arg(long)]
        coded: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Translate through an intermediate language with two systems.
    Pivot {
        #[arg(long)]
        first: PathBuf,
        #[arg(long)]
        second: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        src: String,
        #[arg(long)]
        via: String,
        #[arg(long)]
        tgt: String,
        #[arg(long, default_value_t = DEFAULT_BEAM)]
        beam: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Corpus BLEU of a hypothesis file against a reference file.
    Bleu {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long)]
        r#ref: PathBuf,
    },
    /// Wrong-language rates of coded outputs forced toward one language.
    LangStats {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        forced: String,
    },
    /// Write source embeddings with language codes split off.
    ExportEmbeddings {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated language codes to keep.
        #[arg(long, value_delimiter = ',')]
        languages: Vec<String>,
    },
}

const SUBCOMMANDS: [&str; 10] = [
    "bpe-learn",
    "bpe-apply",
    "prep",
    "train",
    "adapt",
    "translate",
    "pivot",
    "bleu",
    "lang-stats",
    "export-embeddings",
];

/// Turns `key = value` lines into flags. `true` values become bare flags and
/// `false` values are dropped; `#` starts a comment line.
pub fn config_to_args(text: &str) -> Result<Vec<String>, CliError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
        let key = key.trim().replace('_', "-");
        match value.trim() {
            "false" => {}
            "true" => out.push(format!("--{key}")),
            v => {
                out.push(format!("--{key}"));
                out.push(v.to_string());
            }
        }
    }
    Ok(out)
}

/// Splices config-file flags in right after the subcommand name so that
/// flags given on the command line come later and take precedence.
fn expand_config(args: Vec<String>) -> Result<Vec<String>, CliError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            config = Some(it.next().ok_or_else(|| CliError::Usage("--config needs a file".into()))?);
        } else if let Some(path) = a.strip_prefix("--config=") {
            config = Some(path.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let text = fs::read_to_string(&path).map_err(io_err(Path::new(&path)))?;
    let extra = config_to_args(&text)?;
    let at = rest
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.as_str()))
        .ok_or_else(|| CliError::Usage("a subcommand is required".into()))?;
    rest.splice(at + 1..at + 1, extra);
    Ok(rest)
}

/// Every resolved argument of the subcommand, defaults included.
fn manifest(command: &str, matches: &ArgMatches) -> String {
    let mut out = format!("# mlnmt {} {command}\n", env!("CARGO_PKG_VERSION"));
    let cli = Cli::command();
    let groups: Vec<String> = cli
        .find_subcommand(command)
        .map(|c| c.get_groups().map(|g| g.get_id().to_string()).collect())
        .unwrap_or_default();
    let mut entries: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for id in matches.ids() {
        let id = id.as_str();
        if id == "config" || groups.iter().any(|g| g == id) {
            continue;
        }
        if let Ok(Some(raw)) = matches.try_get_raw(id) {
            entries.insert(id.replace('_', "-"), raw.map(|v| v.to_string_lossy().into_owned()).collect());
        }
    }
    for (key, values) in entries {
        for v in values {
            out.push_str(&format!("{key} = {v}\n"));
        }
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(io_err(path))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_text(p, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(io_err(Path::new("<stdout>")))
        }
    }
}

fn language(code: &str) -> Result<LanguageTag, CliError> {
    LanguageTag::new(code).map_err(|e| CliError::Usage(e.to_string()))
}

fn tokenized_lines(path: &Path) -> Result<Vec<Vec<String>>, CliError> {
    Ok(read_lines(path).map_err(run_err)?.iter().map(|l| l.split_whitespace().map(str::to_string).collect()).collect())
}

fn read_strategy(data: &Path) -> Strategy {
    let text = fs::read_to_string(data.join(MANIFEST_FILE)).unwrap_or_default();
    text.lines()
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == "strategy")
        .and_then(|(_, v)| v.trim().parse().ok())
        .unwrap_or(Strategy::Baseline)
}

fn read_prepared(data: &Path, stem: &str) -> Result<MixedCorpus, CliError> {
    let path = data.join(format!("{stem}.src"));
    if !path.exists() {
        return Err(CliError::Usage(format!("{} does not exist", path.display())));
    }
    MixedCorpus::read(data, stem, read_strategy(data)).map_err(run_err)
}

fn copy_file(from: &Path, to: &Path) -> Result<(), CliError> {
    fs::copy(from, to).map(|_| ()).map_err(io_err(from))
}

fn prep_dev(declarations: &[String], merges: &MergeTable, known: &LanguageSet, out: &Path) -> Result<(), CliError> {
    let mut segmenter = Segmenter::new(merges);
    let mut pairs = Vec::new();
    for d in declarations {
        let src: ParallelSource =
            d.parse().map_err(|e: crate::multilingual::PrepError| CliError::Usage(e.to_string()))?;
        let s_lines = tokenized_lines(&src.source_path)?;
        let t_lines = tokenized_lines(&src.target_path)?;
        if s_lines.len() != t_lines.len() {
            return Err(CliError::Run(format!("dev files {d} are misaligned")));
        }
        for (s, t) in s_lines.iter().zip(&t_lines) {
            let seg = |seg: &mut Segmenter, words: &[String]| -> Vec<String> {
                seg.segment(words).iter().map(ToString::to_string).collect()
            };
            let s_coded = code_language(&seg(&mut segmenter, s), &src.source_language).map_err(run_err)?;
            let source = force_target(&s_coded, &src.source_language, &src.target_language, known).map_err(run_err)?;
            let t_coded = code_language(&seg(&mut segmenter, t), &src.target_language).map_err(run_err)?;
            let target = TaggedSentence { tokens: t_coded, language: src.target_language.clone(), forced_target: None };
            pairs.push(MixedPair { source, target, provenance: format!("dev:{}", src.source_path.display()) });
        }
    }
    MixedCorpus { strategy: Strategy::Baseline, pairs }.write(out, DEV_STEM).map_err(run_err)
}

fn with_pool<T>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError>
where
    T: Send,
{
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build().map_err(run_err)?;
    Ok(pool.install(f))
}

/// Parses and runs one invocation. `args` includes the program name.
pub fn run<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<String> = args.into_iter().map(|a| a.into().to_string_lossy().into_owned()).collect();
    let args = expand_config(args)?;
    let matches = match Cli::command().try_get_matches_from(&args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            let first =
                e.to_string().lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ").to_string();
            return Err(CliError::Usage(first));
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::Usage(e.to_string()))?;
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let manifest_text = manifest(name, sub);
    let threads = cli.threads;
    let seed = cli.seed;
    with_pool(threads, move || execute(cli.command, seed, &manifest_text))?
}

fn execute(command: Command, seed: u64, manifest_text: &str) -> Result<(), CliError> {
    match command {
        Command::BpeLearn { input, merges, languages, out } => {
            let mut lines = Vec::new();
            for p in &input {
                lines.extend(read_lines(p).map_err(run_err)?);
            }
            let budget = languages.map_or(merges, |n| scaled_merges(merges, n));
            let freqs = word_frequencies(lines.iter().map(String::as_str));
            let table = learn_bpe(&freqs, budget as i64).map_err(run_err)?;
            table.save(&out).map_err(run_err)?;
            write_text(&PathBuf::from(format!("{}.manifest", out.display())), manifest_text)?;
            log::info!("learned {} merges", table.len());
        }
        Command::BpeApply { merges, input, output } => {
            let table = MergeTable::load(&merges).map_err(run_err)?;
            let mut seg = Segmenter::new(&table);
            let mut text = String::new();
            for words in tokenized_lines(&input)? {
                let pieces: Vec<String> = seg.segment(&words).iter().map(ToString::to_string).collect();
                text.push_str(&pieces.join(" "));
                text.push('\n');
            }
            write_output(output.as_deref(), &text)?;
        }
        Command::Prep { strategy, parallel, mono, dev, merges, max_len, out } => {
            let strategy: Strategy =
                strategy.parse().map_err(|e: crate::multilingual::PrepError| CliError::Usage(e.to_string()))?;
            if max_len < 1 {
                return Err(CliError::Usage("max-len must be at least 1".into()));
            }
            let usage = |e: crate::multilingual::PrepError| CliError::Usage(e.to_string());
            let parallel =
                parallel.iter().map(|p| p.parse::<ParallelSource>()).collect::<Result<Vec<_>, _>>().map_err(usage)?;
            let monolingual =
                mono.iter().map(|p| p.parse::<MonolingualSource>()).collect::<Result<Vec<_>, _>>().map_err(usage)?;
            for path in parallel
                .iter()
                .flat_map(|p| [&p.source_path, &p.target_path])
                .chain(monolingual.iter().map(|m| &m.path))
            {
                if !path.exists() {
                    return Err(CliError::Usage(format!("{} does not exist", path.display())));
                }
            }
            let config = PrepConfig { strategy, parallel, monolingual, merges, max_len, seed, out_dir: out.clone() };
            let summary = prepare(&config).map_err(|e| match e {
                crate::multilingual::PrepError::MissingCorpus { .. } => CliError::Usage(e.to_string()),
                other => run_err(other),
            })?;
            let known = {
                let mut set = LanguageSet::default();
                for p in &config.parallel {
                    set.insert(p.source_language.clone());
                    set.insert(p.target_language.clone());
                }
                for m in &config.monolingual {
                    set.insert(m.language.clone());
                }
                set
            };
            if !dev.is_empty() {
                prep_dev(&dev, &summary.merges, &known, &out)?;
            }
            write_text(&out.join(MANIFEST_FILE), manifest_text)?;
            log::info!("{} pairs written, {} removed by length", summary.corpus.len(), summary.removed);
        }
        Command::Train {
            data,
            out,
            embedding,
            hidden,
            attention,
            readout,
            dropout_hidden,
            dropout_io,
            precision,
            short_list,
            schedule,
        } => {
            let schedule = schedule.schedule()?;
            let precision: Precision =
                precision.parse().map_err(|_| CliError::Usage(format!("unknown precision {precision:?}")))?;
            let corpus = read_prepared(&data, TRAIN_STEM)?;
            let dev_corpus = read_prepared(&data, DEV_STEM)?;
            let sv = build_vocabulary(&corpus, Side::Source, short_list);
            let tv = build_vocabulary(&corpus, Side::Target, short_list);
            let mut hyper = Hyperparameters::new(sv.len(), tv.len(), embedding, hidden)
                .with_dropout(dropout_hidden, dropout_io)
                .with_precision(precision)
                .with_seed(seed);
            hyper.attention_dim = attention.unwrap_or(hidden);
            hyper.readout_dim = readout.unwrap_or(embedding);
            let model = Model::init(hyper).map_err(|e| CliError::Usage(e.to_string()))?;
            let examples = encode_corpus(&corpus, &sv, &tv);
            let dev = DevSet::from_corpus(&dev_corpus, &sv);
            fs::create_dir_all(&out).map_err(io_err(&out))?;
            write_text(&out.join(MANIFEST_FILE), manifest_text)?;
            sv.save(out.join(crate::decode::SOURCE_VOCAB_FILE)).map_err(run_err)?;
            tv.save(out.join(crate::decode::TARGET_VOCAB_FILE)).map_err(run_err)?;
            copy_file(&data.join(MERGES_FILE), &out.join(MERGES_FILE))?;
            let setup =
                TrainSetup { examples: &examples, dev: &dev, target_vocab: &tv, schedule, seed, out_dir: Some(&out) };
            let outcome = train(model, &setup).map_err(run_err)?;
            if outcome.log.is_empty() {
                crate::model::save_checkpoint(&outcome.best, out.join(crate::decode::MODEL_FILE)).map_err(run_err)?;
            }
            log::info!("{} updates, best dev BLEU {:.2}", outcome.updates, outcome.best_bleu.unwrap_or(0.0));
        }
        Command::Adapt { model, data, provenance, out, schedule } => {
            let schedule = schedule.schedule()?;
            let base = System::load(&model).map_err(run_err)?;
            let mut corpus = read_prepared(&data, TRAIN_STEM)?;
            if let Some(p) = &provenance {
                corpus.pairs.retain(|pair| &pair.provenance == p);
                if corpus.is_empty() {
                    return Err(CliError::Usage(format!("no training pairs with provenance {p:?}")));
                }
            }
            let dev_corpus = read_prepared(&data, DEV_STEM)?;
            let examples = encode_corpus(&corpus, &base.source_vocab, &base.target_vocab);
            let dev = DevSet::from_corpus(&dev_corpus, &base.source_vocab);
            fs::create_dir_all(&out).map_err(io_err(&out))?;
            write_text(&out.join(MANIFEST_FILE), manifest_text)?;
            base.source_vocab.save(out.join(crate::decode::SOURCE_VOCAB_FILE)).map_err(run_err)?;
            base.target_vocab.save(out.join(crate::decode::TARGET_VOCAB_FILE)).map_err(run_err)?;
            base.merges.save(out.join(MERGES_FILE)).map_err(run_err)?;
            let setup = TrainSetup {
                examples: &examples,
                dev: &dev,
                target_vocab: &base.target_vocab,
                schedule,
                seed,
                out_dir: Some(&out),
            };
            let outcome = adapt(base.model.clone(), &base.source_vocab, &setup).map_err(run_err)?;
            log::info!(
                "adapted for {} updates, best dev BLEU {:.2}",
                outcome.updates,
                outcome.best_bleu.unwrap_or(0.0)
            );
        }
        Command::Translate { model, input, src, tgt, beam, nbest, max_len, normalize, coded, output } => {
            let (src, tgt) = (language(&src)?, language(&tgt)?);
            if beam < 1 {
                return Err(CliError::Usage("beam must be at least 1".into()));
            }
            let system = System::load(&model).map_err(run_err)?;
            let sentences = tokenized_lines(&input)?;
            let config = BeamConfig { beam_size: beam, max_len, n_best: nbest.max(1), length_normalize: normalize };
            let results = system.translate_all(&sentences, &src, &tgt, &config).map_err(run_err)?;
            let mut text = String::new();
            for (i, candidates) in results.iter().enumerate() {
                if nbest > 1 {
                    text.push_str(&format_nbest(i, candidates));
                } else {
                    let best = &candidates[0];
                    text.push_str(&if coded { best.coded.join(" ") } else { best.text() });
                    text.push('\n');
                }
            }
            write_output(output.as_deref(), &text)?;
        }
        Command::Pivot { first, second, input, src, via, tgt, beam, output } => {
            let (a, b, c) = (language(&src)?, language(&via)?, language(&tgt)?);
            if beam < 1 {
                return Err(CliError::Usage("beam must be at least 1".into()));
            }
            let first = System::load(&first).map_err(run_err)?;
            let second = System::load(&second).map_err(run_err)?;
            let config = BeamConfig::with_beam(beam);
            let mut text = String::new();
            for words in tokenized_lines(&input)? {
                let out = pivot_translate(&first, &second, &words, (&a, &b, &c), &config).map_err(run_err)?;
                text.push_str(&out.output.text());
                text.push('\n');
            }
            write_output(output.as_deref(), &text)?;
        }
        Command::Bleu { hyp, r#ref } => {
            let h = read_lines(&hyp).map_err(run_err)?;
            let r = read_lines(&r#ref).map_err(run_err)?;
            let report = bleu(&h, &r).map_err(run_err)?;
            println!("{report}");
        }
        Command::LangStats { input, forced } => {
            let forced = language(&forced)?;
            let report = wrong_language_stats(&tokenized_lines(&input)?, &forced);
            println!("{report}");
        }
        Command::ExportEmbeddings { model, out, languages } => {
            let system = System::load(&model).map_err(run_err)?;
            let filter = if languages.is_empty() {
                None
            } else {
                Some(LanguageSet::new(languages.iter().map(|l| language(l)).collect::<Result<Vec<_>, _>>()?))
            };
            let table = export_embeddings(&system.model, &system.source_vocab, filter.as_ref());
            table.save(&out).map_err(run_err)?;
        }
    }
    Ok(())
}

/// Joins subword pieces of a segmented line back into words.
pub fn join_subwords(line: &str) -> String {
    let pieces: Vec<&str> = line.split_whitespace().collect();
    revert_text(&pieces).join(" ")
}

/// Parses a whitespace-tokenized vocabulary-coded line into ids.
pub fn encode_line(vocab: &Vocabulary, line: &str) -> Vec<usize> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    vocab.encode(&tokens)
}
