//! Chains two cipher systems a→b and b→c through the intermediate language.

use mlnmt::decode::{pivot_translate, BeamConfig, System};
use mlnmt::model::{Hyperparameters, Model};
use mlnmt::multilingual::{build_strategy, CorpusSet, Strategy};
use mlnmt::synthetic::{parallel_corpus, random_sentences, token_accuracy, Cipher, ToyLanguage};
use mlnmt::train::{encode_corpus, train, DevSet, Schedule, TrainSetup};
use mlnmt::vocab::{build_vocabulary, Side, DEFAULT_SHORT_LIST};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn system(from: &ToyLanguage, to: &ToyLanguage, cipher: &Cipher, rng: &mut ChaCha8Rng) -> System {
    let sentences = random_sentences(rng, 1000, from.len(), 3, 6);
    let set = CorpusSet { parallel: vec![parallel_corpus("train", &sentences, from, to, cipher)], monolingual: vec![] };
    let corpus = build_strategy(Strategy::Baseline, &set, 1).unwrap();
    let sv = build_vocabulary(&corpus, Side::Source, DEFAULT_SHORT_LIST);
    let tv = build_vocabulary(&corpus, Side::Target, DEFAULT_SHORT_LIST);
    let examples = encode_corpus(&corpus, &sv, &tv);
    let dev_corpus = mlnmt::multilingual::MixedCorpus { strategy: corpus.strategy, pairs: corpus.pairs[..50].to_vec() };
    let dev = DevSet::from_corpus(&dev_corpus, &sv);
    let model = Model::init(Hyperparameters::new(sv.len(), tv.len(), 24, 48)).unwrap();
    let schedule =
        Schedule { batch_size: 5, eval_every_updates: 400, patience: 100, max_epochs: 60, ..Schedule::default() };
    let out = train(
        model,
        &TrainSetup { examples: &examples, dev: &dev, target_vocab: &tv, schedule, seed: 1, out_dir: None },
    )
    .unwrap();
    // Toy words are whole tokens, so an empty merge table would split them
    // into characters. Learn one that keeps them intact.
    let words: Vec<String> = from.words.iter().chain(&to.words).map(|w| format!("{w} {w}")).collect();
    let merges =
        mlnmt::bpe::learn_bpe(&mlnmt::bpe::word_frequencies(words.iter().map(String::as_str)), 10_000).unwrap();
    System::new(out.best, sv, tv, merges).unwrap()
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let (a, b, c) = (ToyLanguage::new("aa", "a", 20), ToyLanguage::new("bb", "b", 20), ToyLanguage::new("cc", "c", 20));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (ab, bc) = (Cipher::random(&mut rng, 20), Cipher::random(&mut rng, 20));
    let first = system(&a, &b, &ab, &mut rng);
    let second = system(&b, &c, &bc, &mut rng);
    let held = random_sentences(&mut rng, 100, 20, 3, 6);
    let mut hyps = Vec::new();
    for x in &held {
        let out =
            pivot_translate(&first, &second, &a.render(x), (&a.tag, &b.tag, &c.tag), &BeamConfig::default()).unwrap();
        hyps.push(out.output.words);
    }
    let refs: Vec<Vec<String>> = held.iter().map(|x| c.render(&ab.then(&bc).apply(x))).collect();
    println!("{} → {}", a.render(&held[0]).join(" "), hyps[0].join(" "));
    println!("pivot token accuracy {:.3}", token_accuracy(&hyps, &refs));
}
