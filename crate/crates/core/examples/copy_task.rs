//! Trains a small model to copy sentences between two synthetic languages.

use std::time::Instant;

use mlnmt::decode::{BeamConfig, System};
use mlnmt::eval::bleu;
use mlnmt::model::{Hyperparameters, Model};
use mlnmt::multilingual::{build_strategy, CorpusSet, Strategy};
use mlnmt::synthetic::{parallel_corpus, random_sentences, Cipher, ToyLanguage};
use mlnmt::train::{encode_corpus, train, DevSet, LossScale, Schedule, TrainSetup};
use mlnmt::vocab::{build_vocabulary, Side, DEFAULT_SHORT_LIST};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().collect();
    let batch: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(30);
    let loss_scale = match args.get(3).map(String::as_str) {
        Some("sum") => LossScale::Sum,
        Some("sentence") => LossScale::PerSentence,
        _ => LossScale::PerToken,
    };
    let src = ToyLanguage::new("sa", "a", 45);
    let tgt = ToyLanguage::new("sb", "b", 45);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let train_s = random_sentences(&mut rng, 2000, src.len(), 3, 8);
    let test_s = random_sentences(&mut rng, 200, src.len(), 3, 8);
    let copy = Cipher::identity(src.len());
    let train_set =
        CorpusSet { parallel: vec![parallel_corpus("copy", &train_s, &src, &tgt, &copy)], monolingual: vec![] };
    let test_set =
        CorpusSet { parallel: vec![parallel_corpus("copy-test", &test_s, &src, &tgt, &copy)], monolingual: vec![] };
    let mixed = build_strategy(Strategy::Baseline, &train_set, 1).unwrap();
    let test = build_strategy(Strategy::Baseline, &test_set, 1).unwrap();
    let sv = build_vocabulary(&mixed, Side::Source, DEFAULT_SHORT_LIST);
    let tv = build_vocabulary(&mixed, Side::Target, DEFAULT_SHORT_LIST);
    println!("vocabulary sizes: {} / {}", sv.len(), tv.len());
    let examples = encode_corpus(&mixed, &sv, &tv);
    let dev = DevSet::from_corpus(&test, &sv);
    let model = Model::init(Hyperparameters::new(sv.len(), tv.len(), 32, 64)).unwrap();
    let schedule = Schedule {
        batch_size: batch,
        eval_every_updates: 2000 / batch,
        patience: 100,
        max_epochs: epochs,
        loss_scale,
        ..Schedule::default()
    };
    let start = Instant::now();
    let out = train(
        model,
        &TrainSetup { examples: &examples, dev: &dev, target_vocab: &tv, schedule, seed: 1, out_dir: None },
    )
    .unwrap();
    println!(
        "trained {} updates in {:.1}s, best dev BLEU {:.2}",
        out.updates,
        start.elapsed().as_secs_f64(),
        out.best_bleu.unwrap_or(0.0)
    );
    let system = System::new(out.best, sv, tv, Default::default()).unwrap();
    let hyps: Vec<String> = test
        .pairs
        .iter()
        .map(|p| system.translate_tagged(&p.source, &BeamConfig::default()).unwrap()[0].text())
        .collect();
    println!("beam 12 {}", bleu(&hyps, &dev.references).unwrap());
}
