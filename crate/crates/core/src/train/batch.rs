use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::multilingual::MixedCorpus;
use crate::vocab::{Vocabulary, EOS_ID};

use super::TrainError;

pub const DEFAULT_BATCH_SIZE: usize = 80;

/// Filler for padded positions; masked out of every computation.
pub const PAD_ID: usize = EOS_ID;

/// One training pair as ids. The target ends with the end-of-sentence id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Example {
    pub source: Vec<usize>,
    pub target: Vec<usize>,
}

impl Example {
    pub fn new(source: Vec<usize>, mut target: Vec<usize>) -> Self {
        if target.last() != Some(&EOS_ID) {
            target.push(EOS_ID);
        }
        Example { source, target }
    }
}

/// Encodes a mixed corpus with the given vocabularies. Pairs with an empty
/// source are skipped.
pub fn encode_corpus(corpus: &MixedCorpus, source_vocab: &Vocabulary, target_vocab: &Vocabulary) -> Vec<Example> {
    corpus
        .pairs
        .iter()
        .filter(|p| !p.source.tokens.is_empty())
        .map(|p| Example {
            source: source_vocab.encode(&p.source.tokens),
            target: target_vocab.encode_with_eos(&p.target.tokens),
        })
        .collect()
}

/// Rows padded to the batch's longest source and target, with masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    /// Corpus indices of the rows, in row order.
    pub indices: Vec<usize>,
    pub source: Vec<Vec<usize>>,
    pub source_mask: Vec<Vec<bool>>,
    pub target: Vec<Vec<usize>>,
    pub target_mask: Vec<Vec<bool>>,
}

fn pad(rows: &[&[usize]]) -> (Vec<Vec<usize>>, Vec<Vec<bool>>) {
    let width = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    rows.iter()
        .map(|r| {
            let mut ids = r.to_vec();
            ids.resize(width, PAD_ID);
            let mask = (0..width).map(|i| i < r.len()).collect();
            (ids, mask)
        })
        .unzip()
}

impl Batch {
    pub fn from_indices(examples: &[Example], indices: Vec<usize>) -> Self {
        let src: Vec<&[usize]> = indices.iter().map(|&i| examples[i].source.as_slice()).collect();
        let tgt: Vec<&[usize]> = indices.iter().map(|&i| examples[i].target.as_slice()).collect();
        let (source, source_mask) = pad(&src);
        let (target, target_mask) = pad(&tgt);
        Batch { indices, source, source_mask, target, target_mask }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    fn unpadded<'b>(ids: &'b [usize], mask: &[bool]) -> &'b [usize] {
        &ids[..mask.iter().take_while(|&&m| m).count()]
    }

    /// The unpadded source and target of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[usize]) {
        (Self::unpadded(&self.source[r], &self.source_mask[r]), Self::unpadded(&self.target[r], &self.target_mask[r]))
    }

    /// Real target tokens in the batch.
    pub fn target_tokens(&self) -> usize {
        self.target_mask.iter().flatten().filter(|&&m| m).count()
    }
}

/// Shuffles the corpus for `epoch`, slices consecutive batches (the last may
/// be short) and shuffles the rows inside each batch.
pub fn make_batches(examples: &[Example], batch_size: usize, seed: u64, epoch: u64) -> Result<Vec<Batch>, TrainError> {
    if batch_size < 1 {
        return Err(TrainError::InvalidBatchSize);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut rng);
    Ok(order
        .chunks(batch_size)
        .map(|chunk| {
            let mut rows = chunk.to_vec();
            rows.shuffle(&mut rng);
            Batch::from_indices(examples, rows)
        })
        .collect())
}
