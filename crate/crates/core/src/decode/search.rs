use std::cmp::Ordering;

use crate::model::{Dropout, Model};
use crate::tensor::Tensor;
use crate::vocab::{BOS_ID, EOS_ID};

use super::DecodeError;

pub const DEFAULT_BEAM: usize = 12;

/// `3 × source length + 10`
pub fn default_max_len(source_len: usize) -> usize {
    3 * source_len + 10
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamConfig {
    pub beam_size: usize,
    /// Defaults to [`default_max_len`] of the source.
    pub max_len: Option<usize>,
    pub n_best: usize,
    pub length_normalize: bool,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig { beam_size: DEFAULT_BEAM, max_len: None, n_best: 1, length_normalize: false }
    }
}

impl BeamConfig {
    pub fn with_beam(beam_size: usize) -> Self {
        BeamConfig { beam_size, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Emitted ids, including the final end-of-sentence when finished.
    pub tokens: Vec<usize>,
    /// Sum of log probabilities.
    pub log_prob: f64,
    pub finished: bool,
}

impl Hypothesis {
    /// Ids without the end-of-sentence marker.
    pub fn output(&self) -> &[usize] {
        match self.tokens.last() {
            Some(&EOS_ID) => &self.tokens[..self.tokens.len() - 1],
            _ => &self.tokens,
        }
    }

    pub fn score(&self, length_normalize: bool) -> f64 {
        if length_normalize && !self.tokens.is_empty() {
            self.log_prob / self.tokens.len() as f64
        } else {
            self.log_prob
        }
    }
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

/// Ids by descending log probability, ties toward the lower id.
fn ranked(log_probs: &[f64], k: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..log_probs.len()).collect();
    let cmp =
        |a: &usize, b: &usize| log_probs[*b].partial_cmp(&log_probs[*a]).unwrap_or(Ordering::Equal).then(a.cmp(b));
    if k < ids.len() {
        ids.select_nth_unstable_by(k, cmp);
        ids.truncate(k);
    }
    ids.sort_by(cmp);
    ids
}

struct Live {
    hyp: Hypothesis,
    state: Tensor,
}

/// Beam search where finished hypotheses stay in the beam and compete with
/// open ones. Returns up to `n_best` hypotheses, best first.
pub fn beam_search(model: &Model, source: &[usize], config: &BeamConfig) -> Result<Vec<Hypothesis>, DecodeError> {
    if config.beam_size < 1 {
        return Err(DecodeError::InvalidBeam(config.beam_size));
    }
    let max_len = config.max_len.unwrap_or_else(|| default_max_len(source.len()));
    if max_len < 1 {
        return Err(DecodeError::InvalidMaxLength);
    }
    let enc = model.encode(source, Dropout::Off)?;
    let z0 = model.initial_decoder_state(&enc)?;
    let mut beam = vec![Live { hyp: Hypothesis { tokens: Vec::new(), log_prob: 0.0, finished: false }, state: z0 }];
    for _ in 0..max_len {
        if beam.iter().all(|l| l.hyp.finished) {
            break;
        }
        let mut pool: Vec<Live> = Vec::new();
        for live in beam {
            if live.hyp.finished {
                pool.push(live);
                continue;
            }
            let prev = live.hyp.tokens.last().copied().unwrap_or(BOS_ID);
            let step = model.decode_step(&live.state, prev, &enc)?;
            let lp = log_softmax(step.logits.data());
            for w in ranked(&lp, config.beam_size) {
                let mut tokens = live.hyp.tokens.clone();
                tokens.push(w);
                pool.push(Live {
                    hyp: Hypothesis { tokens, log_prob: live.hyp.log_prob + lp[w], finished: w == EOS_ID },
                    state: step.state.clone(),
                });
            }
        }
        // Stable sort keeps emission order among equal scores.
        pool.sort_by(|a, b| b.hyp.log_prob.partial_cmp(&a.hyp.log_prob).unwrap_or(Ordering::Equal));
        pool.truncate(config.beam_size);
        beam = pool;
    }
    let mut out: Vec<Hypothesis> = beam.into_iter().map(|l| l.hyp).collect();
    out.sort_by(|a, b| {
        b.score(config.length_normalize).partial_cmp(&a.score(config.length_normalize)).unwrap_or(Ordering::Equal)
    });
    out.truncate(config.n_best.max(1));
    Ok(out)
}

/// Stepwise argmax, ties toward the lower id.
pub fn greedy(model: &Model, source: &[usize], max_len: Option<usize>) -> Result<Hypothesis, DecodeError> {
    let max_len = max_len.unwrap_or_else(|| default_max_len(source.len()));
    if max_len < 1 {
        return Err(DecodeError::InvalidMaxLength);
    }
    let enc = model.encode(source, Dropout::Off)?;
    let mut z = model.initial_decoder_state(&enc)?;
    let mut hyp = Hypothesis { tokens: Vec::new(), log_prob: 0.0, finished: false };
    let mut prev = BOS_ID;
    while hyp.tokens.len() < max_len {
        let step = model.decode_step(&z, prev, &enc)?;
        let lp = log_softmax(step.logits.data());
        let w = ranked(&lp, 1)[0];
        hyp.tokens.push(w);
        hyp.log_prob += lp[w];
        if w == EOS_ID {
            hyp.finished = true;
            break;
        }
        z = step.state;
        prev = w;
    }
    Ok(hyp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Hyperparameters, Param};

    fn toy(seed: u64, vocab: usize) -> Model {
        Model::init(Hyperparameters::new(vocab, vocab, 4, 5).with_seed(seed)).unwrap()
    }

    #[test]
    fn ranking_ties_prefer_lower_ids() {
        assert_eq!(ranked(&[0.0, -1.0, 0.0, -0.5], 3), [0, 2, 3]);
        assert_eq!(ranked(&[-2.0, -1.0], 5), [1, 0]);
    }

    #[test]
    fn log_softmax_matches_direct_formula() {
        let lp = log_softmax(&[1.0, 2.0]);
        assert!((lp[0].exp() - 0.2689414213699951).abs() < 1e-15);
        assert!((lp[1].exp() - 0.7310585786300049).abs() < 1e-15);
    }

    #[test]
    fn beam_one_is_greedy() {
        for seed in 0..20 {
            let m = toy(seed, 7);
            let src = [3, 4, 5, (seed % 4) as usize + 3];
            let b = beam_search(&m, &src, &BeamConfig::with_beam(1)).unwrap();
            let g = greedy(&m, &src, None).unwrap();
            assert_eq!(b[0].tokens, g.tokens);
        }
    }

    #[test]
    fn certain_end_of_sentence_gives_empty_output() {
        let mut m = toy(1, 6);
        let bias = m.params.get_mut(Param::OutputBias);
        bias.data_mut()[EOS_ID] = 1e4;
        let best = &beam_search(&m, &[3, 4], &BeamConfig::default()).unwrap()[0];
        assert!(best.output().is_empty());
        assert!(best.finished);
        assert!(best.log_prob.abs() < 1e-12);
    }

    #[test]
    fn n_best_is_sorted_and_distinct() {
        let m = toy(3, 6);
        let config = BeamConfig { beam_size: 8, max_len: Some(4), n_best: 8, length_normalize: false };
        let out = beam_search(&m, &[3, 4, 5], &config).unwrap();
        assert_eq!(out.len(), 8);
        for w in out.windows(2) {
            assert!(w[0].log_prob >= w[1].log_prob);
            assert_ne!(w[0].tokens, w[1].tokens);
        }
        assert!(out.iter().all(|h| h.log_prob <= 0.0 && h.tokens.len() <= 4));
    }

    #[test]
    fn rejects_bad_configuration() {
        let m = toy(1, 6);
        assert!(matches!(beam_search(&m, &[3], &BeamConfig::with_beam(0)), Err(DecodeError::InvalidBeam(0))));
        let zero = BeamConfig { max_len: Some(0), ..BeamConfig::default() };
        assert!(matches!(beam_search(&m, &[3], &zero), Err(DecodeError::InvalidMaxLength)));
        assert!(beam_search(&m, &[60], &BeamConfig::default()).is_err());
    }
}
