use std::fmt;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::decode::{detokenize, greedy};
use crate::eval::bleu;
use crate::model::{save_checkpoint, Dropout, Model};
use crate::multilingual::MixedCorpus;
use crate::tensor::Tensor;
use crate::vocab::Vocabulary;

use super::batch::{make_batches, Batch, Example, DEFAULT_BATCH_SIZE};
use super::optim::{clip_gradients, Adadelta, EarlyStopping, Verdict, DEFAULT_MAX_NORM};
use super::TrainError;

pub const BEST_CHECKPOINT: &str = crate::decode::MODEL_FILE;
pub const LOG_FILE: &str = "train.log";

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub batch_size: usize,
    pub eval_every_updates: usize,
    /// Evaluations without improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    pub wall_clock_limit: Option<Duration>,
    pub max_norm: f64,
    pub loss_scale: LossScale,
}

/// How the summed batch loss is normalized before differentiation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossScale {
    /// Divided by the number of real target tokens.
    PerToken,
    /// Divided by the number of sentences.
    PerSentence,
    /// Left as the plain sum.
    Sum,
}

impl LossScale {
    fn divisor(self, batch: &Batch) -> f64 {
        match self {
            LossScale::PerToken => batch.target_tokens().max(1) as f64,
            LossScale::PerSentence => batch.len().max(1) as f64,
            LossScale::Sum => 1.0,
        }
    }
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            batch_size: DEFAULT_BATCH_SIZE,
            eval_every_updates: 500,
            patience: 5,
            max_epochs: 10,
            wall_clock_limit: None,
            max_norm: DEFAULT_MAX_NORM,
            loss_scale: LossScale::PerToken,
        }
    }
}

/// Dev sources as ids with plain-text references.
#[derive(Debug, Clone, PartialEq)]
pub struct DevSet {
    pub sources: Vec<Vec<usize>>,
    pub references: Vec<String>,
}

impl DevSet {
    /// References are the target sides with codes stripped and subwords joined.
    pub fn from_corpus(corpus: &MixedCorpus, source_vocab: &Vocabulary) -> Self {
        let mut sources = Vec::with_capacity(corpus.len());
        let mut references = Vec::with_capacity(corpus.len());
        for p in &corpus.pairs {
            sources.push(source_vocab.encode(&p.source.tokens));
            let (plain, _) = crate::multilingual::strip_codes(&p.target.tokens);
            references.push(crate::bpe::revert_text(&plain).join(" "));
        }
        DevSet { sources, references }
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub updates: usize,
    pub epoch: usize,
    pub mean_loss: f64,
    pub dev_bleu: f64,
    pub patience: usize,
    /// Relative to the output directory; set when this evaluation improved.
    pub checkpoint: Option<String>,
}

impl fmt::Display for LogRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{:.6}\t{:.2}\t{}\t{}",
            self.updates,
            self.epoch,
            self.mean_loss,
            self.dev_bleu,
            self.patience,
            self.checkpoint.as_deref().unwrap_or("-")
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Patience,
    MaxEpochs,
    WallClock,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// The best model by dev BLEU (the starting model if nothing was evaluated).
    pub best: Model,
    pub best_bleu: Option<f64>,
    pub log: Vec<LogRow>,
    pub updates: usize,
    pub epochs: usize,
    pub stop: StopReason,
}

impl TrainOutcome {
    pub fn log_text(&self) -> String {
        self.log.iter().map(|r| format!("{r}\n")).collect()
    }
}

pub struct TrainSetup<'a> {
    pub examples: &'a [Example],
    pub dev: &'a DevSet,
    pub target_vocab: &'a Vocabulary,
    pub schedule: Schedule,
    pub seed: u64,
    pub out_dir: Option<&'a Path>,
}

fn mix(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Dropout stream for one sentence of one update.
pub fn dropout_rng(seed: u64, update: usize, example: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ mix(update as u64 ^ mix(example as u64))));
    rng.set_stream(update as u64);
    rng
}

/// Sum of sentence losses and of their gradients. Sentences run in parallel;
/// the reduction follows row order so the result is independent of threads.
pub fn batch_loss_and_gradients(
    model: &Model,
    batch: &Batch,
    seed: u64,
    update: usize,
) -> Result<(f64, Vec<Tensor>), TrainError> {
    let uses_dropout = model.hyper.dropout_embedding_hidden > 0.0 || model.hyper.dropout_input_output > 0.0;
    let per_row: Vec<_> = (0..batch.len())
        .into_par_iter()
        .map(|r| {
            let (src, tgt) = batch.row(r);
            let mut rng = dropout_rng(seed, update, batch.indices[r]);
            let dropout = if uses_dropout { Dropout::On(&mut rng) } else { Dropout::Off };
            model.sentence_loss_and_gradients(src, tgt, dropout)
        })
        .collect();
    let mut total = 0.0;
    let mut grads: Vec<Tensor> = model.params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
    for result in per_row {
        let (loss, g) = result?;
        total += loss;
        for (k, t) in g.iter() {
            grads[k].add_assign(t);
        }
    }
    Ok((total, grads))
}

/// Sum of per-sentence losses over the batch rows.
pub fn batch_loss(model: &Model, batch: &Batch) -> Result<f64, TrainError> {
    let losses: Vec<_> = (0..batch.len())
        .into_par_iter()
        .map(|r| {
            let (src, tgt) = batch.row(r);
            model.sentence_loss(src, tgt, Dropout::Off)
        })
        .collect();
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total)
}

/// Greedy-decodes the dev set and scores it against the references.
pub fn dev_bleu(model: &Model, dev: &DevSet, target_vocab: &Vocabulary) -> Result<f64, TrainError> {
    if dev.is_empty() {
        return Err(TrainError::EmptyDev);
    }
    let hyps: Vec<Result<String, TrainError>> = dev
        .sources
        .par_iter()
        .enumerate()
        .map(|(i, src)| {
            let hyp =
                greedy(model, src, None).map_err(|e| TrainError::DevDecode { index: i, reason: e.to_string() })?;
            Ok(detokenize(target_vocab, hyp.output()).1.join(" "))
        })
        .collect();
    let hyps = hyps.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(bleu(&hyps, &dev.references)?.bleu)
}

struct Run<'s, 'a> {
    setup: &'s TrainSetup<'a>,
    model: Model,
    best: Model,
    stopping: EarlyStopping,
    log: Vec<LogRow>,
    loss_sum: f64,
    loss_batches: usize,
}

impl Run<'_, '_> {
    fn evaluate(&mut self, updates: usize, epoch: usize) -> Result<Verdict, TrainError> {
        let score = dev_bleu(&self.model, self.setup.dev, self.setup.target_vocab)?;
        let verdict = self.stopping.observe(score);
        let mut checkpoint = None;
        if verdict == Verdict::Improved {
            self.best = self.model.clone();
            if let Some(dir) = self.setup.out_dir {
                save_checkpoint(&self.best, dir.join(BEST_CHECKPOINT))?;
                checkpoint = Some(BEST_CHECKPOINT.to_string());
            }
        }
        let mean_loss = if self.loss_batches == 0 { 0.0 } else { self.loss_sum / self.loss_batches as f64 };
        let row = LogRow {
            updates,
            epoch,
            mean_loss,
            dev_bleu: score,
            patience: self.stopping.since_improvement,
            checkpoint,
        };
        log::info!("{row}");
        self.log.push(row);
        self.loss_sum = 0.0;
        self.loss_batches = 0;
        if let Some(dir) = self.setup.out_dir {
            let text: String = self.log.iter().map(|r| format!("{r}\n")).collect();
            let path = dir.join(LOG_FILE);
            fs::write(&path, text).map_err(|source| TrainError::Io { path: path.display().to_string(), source })?;
        }
        Ok(verdict)
    }

    fn step(&mut self, optimizer: &mut Adadelta, batch: &Batch, update: usize) -> Result<(), TrainError> {
        let (loss, mut grads) = batch_loss_and_gradients(&self.model, batch, self.setup.seed, update)?;
        let divisor = self.setup.schedule.loss_scale.divisor(batch);
        for g in grads.iter_mut() {
            g.scale_inplace(1.0 / divisor);
        }
        clip_gradients(&mut grads, self.setup.schedule.max_norm)?;
        optimizer.step(&mut self.model.params, &grads, self.model.hyper.precision)?;
        self.loss_sum += loss / batch.target_tokens().max(1) as f64;
        self.loss_batches += 1;
        Ok(())
    }
}

fn run(model: Model, setup: &TrainSetup<'_>, evaluate_first: bool) -> Result<TrainOutcome, TrainError> {
    let schedule = &setup.schedule;
    if schedule.eval_every_updates == 0 {
        return Err(TrainError::InvalidSchedule("eval_every_updates must be positive".into()));
    }
    if setup.dev.is_empty() {
        return Err(TrainError::EmptyDev);
    }
    if let Some(dir) = setup.out_dir {
        fs::create_dir_all(dir).map_err(|source| TrainError::Io { path: dir.display().to_string(), source })?;
    }
    let mut optimizer = Adadelta::new(&model.params);
    let mut state = Run {
        setup,
        best: model.clone(),
        model,
        stopping: EarlyStopping::new(schedule.patience),
        log: Vec::new(),
        loss_sum: 0.0,
        loss_batches: 0,
    };
    let start = Instant::now();
    let mut updates = 0;
    let mut last_eval = None;
    let mut epochs = 0;
    let mut stop = StopReason::MaxEpochs;
    if evaluate_first {
        state.evaluate(0, 0)?;
        last_eval = Some(0);
    }
    'epochs: for epoch in 0..schedule.max_epochs {
        epochs = epoch + 1;
        for batch in make_batches(setup.examples, schedule.batch_size, setup.seed, epoch as u64)? {
            state.step(&mut optimizer, &batch, updates)?;
            updates += 1;
            if updates % schedule.eval_every_updates == 0 {
                last_eval = Some(updates);
                if state.evaluate(updates, epochs)? == Verdict::Stop {
                    stop = StopReason::Patience;
                    break 'epochs;
                }
            }
            if schedule.wall_clock_limit.is_some_and(|limit| start.elapsed() >= limit) {
                stop = StopReason::WallClock;
                break 'epochs;
            }
        }
    }
    if updates > 0 && last_eval != Some(updates) {
        state.evaluate(updates, epochs)?;
    }
    Ok(TrainOutcome { best_bleu: state.stopping.best, best: state.best, log: state.log, updates, epochs, stop })
}

/// Trains from `model` and returns the checkpoint with the best dev BLEU.
pub fn train(model: Model, setup: &TrainSetup<'_>) -> Result<TrainOutcome, TrainError> {
    run(model, setup, false)
}

/// Continues training `base` on `setup.examples` with fresh optimizer state.
/// The base model is evaluated first so the result never scores below it.
pub fn adapt(base: Model, source_vocab: &Vocabulary, setup: &TrainSetup<'_>) -> Result<TrainOutcome, TrainError> {
    let h = &base.hyper;
    if source_vocab.len() != h.source_vocab_size || setup.target_vocab.len() != h.target_vocab_size {
        return Err(TrainError::VocabularyMismatch(format!(
            "vocabularies have {}/{} entries, checkpoint expects {}/{}",
            source_vocab.len(),
            setup.target_vocab.len(),
            h.source_vocab_size,
            h.target_vocab_size
        )));
    }
    let out_of_range = setup.examples.iter().position(|e| {
        e.source.iter().any(|&i| i >= h.source_vocab_size) || e.target.iter().any(|&i| i >= h.target_vocab_size)
    });
    if let Some(i) = out_of_range {
        return Err(TrainError::VocabularyMismatch(format!("example {i} uses ids outside the checkpoint vocabulary")));
    }
    run(base, setup, true)
}
