//! One source language, two cipher targets. A single model learns both and
//! the forcing symbol picks the output language.

use mlnmt::decode::{BeamConfig, System};
use mlnmt::eval::wrong_language_stats;
use mlnmt::model::{Hyperparameters, Model};
use mlnmt::multilingual::{build_strategy, CorpusSet, Strategy};
use mlnmt::synthetic::{monolingual_corpus, parallel_corpus, random_sentences, Cipher, ToyLanguage};
use mlnmt::train::{encode_corpus, train, DevSet, Schedule, TrainSetup};
use mlnmt::vocab::{build_vocabulary, Side, DEFAULT_SHORT_LIST};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let s = ToyLanguage::new("ss", "s", 20);
    let t1 = ToyLanguage::new("ta", "p", 20);
    let t2 = ToyLanguage::new("tb", "q", 20);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (c1, c2) = (Cipher::random(&mut rng, 20), Cipher::random(&mut rng, 20));
    let a = random_sentences(&mut rng, 600, 20, 3, 6);
    let b = random_sentences(&mut rng, 600, 20, 3, 6);
    let m = random_sentences(&mut rng, 300, 20, 3, 6);
    let corpora = CorpusSet {
        parallel: vec![parallel_corpus("s-ta", &a, &s, &t1, &c1), parallel_corpus("s-tb", &b, &s, &t2, &c2)],
        monolingual: vec![monolingual_corpus("ta", &m, &t1), monolingual_corpus("tb", &m, &t2)],
    };
    let corpus = build_strategy(Strategy::MixSource, &corpora, 1).unwrap();
    let sv = build_vocabulary(&corpus, Side::Source, DEFAULT_SHORT_LIST);
    let tv = build_vocabulary(&corpus, Side::Target, DEFAULT_SHORT_LIST);
    let examples = encode_corpus(&corpus, &sv, &tv);
    let dev_corpus = mlnmt::multilingual::MixedCorpus { strategy: corpus.strategy, pairs: corpus.pairs[..50].to_vec() };
    let dev = DevSet::from_corpus(&dev_corpus, &sv);
    let model = Model::init(Hyperparameters::new(sv.len(), tv.len(), 24, 48)).unwrap();
    let schedule =
        Schedule { batch_size: 5, eval_every_updates: 400, patience: 2, max_epochs: 4, ..Schedule::default() };
    let out = train(
        model,
        &TrainSetup { examples: &examples, dev: &dev, target_vocab: &tv, schedule, seed: 1, out_dir: None },
    )
    .unwrap();
    let system = System::new(out.best, sv, tv, Default::default()).unwrap();

    let held = random_sentences(&mut rng, 50, 20, 3, 6);
    for target in [&t1, &t2] {
        let mut coded = Vec::new();
        for x in &held {
            let source = system.prepare_source(&s.render(x), &s.tag, &target.tag).unwrap();
            coded.push(system.translate_tagged(&source, &BeamConfig::default()).unwrap().remove(0).coded);
        }
        println!("forced {}: {}", target.tag.code(), coded[0].join(" "));
        println!("  {}", wrong_language_stats(&coded, &target.tag));
    }
}
