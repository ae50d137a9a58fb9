//! Builds the mixed corpora of every strategy from three toy languages and
//! prints their balance.

use mlnmt::multilingual::{balance_report, build_strategy, filter_length, CorpusSet, Strategy};
use mlnmt::synthetic::{monolingual_corpus, parallel_corpus, random_sentences, Cipher, ToyLanguage};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let (de, en, fr) =
        (ToyLanguage::new("de", "d", 10), ToyLanguage::new("en", "e", 10), ToyLanguage::new("fr", "f", 10));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let c = Cipher::random(&mut rng, 10);
    let sent = random_sentences(&mut rng, 40, 10, 2, 12);
    let de_en = parallel_corpus("de-en", &sent[..10], &de, &en, &c);
    let en_fr = parallel_corpus("en-fr", &sent[10..20], &en, &fr, &c);
    let fr_en = parallel_corpus("fr-en", &sent[20..25], &fr, &en, &c);
    let en_mono = monolingual_corpus("en.mono", &sent[25..35], &en);
    let fr_mono = monolingual_corpus("fr.mono", &sent[35..], &fr);
    // Each strategy mixes every corpus it is given; choose the inputs per strategy.
    let setups = [
        (Strategy::Baseline, vec![de_en.clone()], vec![]),
        (Strategy::MixSource, vec![de_en.clone()], vec![en_mono.clone()]),
        (Strategy::MixMultiSource, vec![de_en.clone(), fr_en], vec![]),
        (Strategy::Bridge, vec![de_en.clone(), en_fr.clone()], vec![en_mono.clone()]),
        (Strategy::Universal, vec![de_en, en_fr], vec![en_mono, fr_mono]),
    ];
    for (strategy, parallel, monolingual) in setups {
        let mixed = build_strategy(strategy, &CorpusSet { parallel, monolingual }, 1).unwrap();
        let (kept, removed) = filter_length(&mixed, 10);
        println!("== {strategy}: {} pairs, {removed} longer than 10 removed", kept.len());
        println!("{}", kept.pairs[0].source.to_line());
        print!("{}", balance_report(&kept));
    }
}
