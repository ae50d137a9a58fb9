//! Synthetic languages for toy experiments: random sentences over small
//! word lists and deterministic substitution ciphers between them.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::multilingual::{LanguageTag, MonolingualCorpus, ParallelCorpus};

/// A toy language with words `<stem>0`, `<stem>1`, ...
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToyLanguage {
    pub tag: LanguageTag,
    pub words: Vec<String>,
}

impl ToyLanguage {
    pub fn new(code: &str, stem: &str, size: usize) -> Self {
        ToyLanguage {
            tag: LanguageTag::new(code).expect("valid language code"),
            words: (0..size).map(|i| format!("{stem}{i}")).collect(),
        }
    }

    pub fn render(&self, sentence: &[usize]) -> Vec<String> {
        sentence.iter().map(|&i| self.words[i].clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Random word-index sentences with lengths uniform in `min_len..=max_len`.
pub fn random_sentences<R: Rng>(
    rng: &mut R,
    count: usize,
    vocab: usize,
    min_len: usize,
    max_len: usize,
) -> Vec<Vec<usize>> {
    (0..count)
        .map(|_| {
            let len = rng.gen_range(min_len..=max_len);
            (0..len).map(|_| rng.gen_range(0..vocab)).collect()
        })
        .collect()
}

/// A word-for-word substitution table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cipher {
    pub table: Vec<usize>,
}

impl Cipher {
    pub fn identity(size: usize) -> Self {
        Cipher { table: (0..size).collect() }
    }

    pub fn random<R: Rng>(rng: &mut R, size: usize) -> Self {
        let mut table: Vec<usize> = (0..size).collect();
        table.shuffle(rng);
        Cipher { table }
    }

    pub fn apply(&self, sentence: &[usize]) -> Vec<usize> {
        sentence.iter().map(|&i| self.table[i]).collect()
    }

    /// `other ∘ self`
    pub fn then(&self, other: &Cipher) -> Cipher {
        Cipher { table: self.table.iter().map(|&i| other.table[i]).collect() }
    }
}

/// Renders `sentences` in `from` and their ciphered versions in `to`.
pub fn parallel_corpus(
    name: &str,
    sentences: &[Vec<usize>],
    from: &ToyLanguage,
    to: &ToyLanguage,
    cipher: &Cipher,
) -> ParallelCorpus {
    ParallelCorpus {
        name: name.to_string(),
        source_language: from.tag.clone(),
        target_language: to.tag.clone(),
        pairs: sentences.iter().map(|s| (from.render(s), to.render(&cipher.apply(s)))).collect(),
    }
}

pub fn monolingual_corpus(name: &str, sentences: &[Vec<usize>], lang: &ToyLanguage) -> MonolingualCorpus {
    MonolingualCorpus {
        name: name.to_string(),
        language: lang.tag.clone(),
        sentences: sentences.iter().map(|s| lang.render(s)).collect(),
    }
}

/// Fraction of reference positions matched by the hypothesis, compared
/// position by position; length differences count as misses.
pub fn token_accuracy<S: AsRef<str>>(hypotheses: &[Vec<S>], references: &[Vec<S>]) -> f64 {
    let mut hits = 0usize;
    let mut total = 0usize;
    for (h, r) in hypotheses.iter().zip(references) {
        total += h.len().max(r.len());
        hits += h.iter().zip(r).filter(|(a, b)| a.as_ref() == b.as_ref()).count();
    }
    if total == 0 {
        1.0
    } else {
        hits as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn ciphers_compose() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Cipher::random(&mut rng, 10);
        let b = Cipher::random(&mut rng, 10);
        let s = vec![0, 3, 9, 3];
        assert_eq!(a.then(&b).apply(&s), b.apply(&a.apply(&s)));
        assert_eq!(Cipher::identity(10).apply(&s), s);
    }

    #[test]
    fn accuracy_counts_length_differences_as_misses() {
        let h = vec![vec!["a", "b"]];
        let r = vec![vec!["a", "c", "d"]];
        assert!((token_accuracy(&h, &r) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sentence_lengths_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_sentences(&mut rng, 100, 7, 2, 5);
        assert!(s.iter().all(|x| (2..=5).contains(&x.len()) && x.iter().all(|&w| w < 7)));
    }
}
