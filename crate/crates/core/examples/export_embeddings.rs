//! Writes source embeddings of an untrained two-language model, split by
//! language code.

use std::collections::BTreeMap;

use mlnmt::eval::{export_embeddings, read_embeddings};
use mlnmt::model::{Hyperparameters, Model};
use mlnmt::multilingual::{LanguageSet, LanguageTag};
use mlnmt::vocab::Vocabulary;

fn main() {
    let counts: BTreeMap<String, u64> = [("@de@haus", 3), ("@en@house", 3), ("@de@katze", 2), ("@en@cat", 1)]
        .iter()
        .map(|(t, c)| (t.to_string(), *c))
        .collect();
    let vocab = Vocabulary::from_counts(&counts, ["<DE>".to_string(), "<EN>".to_string()], 100);
    let model = Model::init(Hyperparameters::new(vocab.len(), vocab.len(), 4, 4)).unwrap();
    let en = LanguageSet::new([LanguageTag::new("en").unwrap()]);
    let table = export_embeddings(&model, &vocab, Some(&en));
    let text = table.to_text();
    print!("{text}");
    assert_eq!(read_embeddings(&text).unwrap(), table);
}
