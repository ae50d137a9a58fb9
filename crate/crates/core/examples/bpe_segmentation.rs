//! Learns a small merge table and segments a sentence with it.

use mlnmt::bpe::{apply_bpe, learn_bpe, revert_bpe, word_frequencies};

fn main() {
    let corpus = ["the lower newer widest lowest", "low lower lowest newer newest", "a wider road is the widest road"];
    let table = learn_bpe(&word_frequencies(corpus.iter().copied()), 20).unwrap();
    for (i, (l, r)) in table.merges().iter().enumerate() {
        println!("merge {i:>2}: {l} + {r}");
    }
    let sentence = ["the", "slowest", "newer", "roads"];
    let pieces = apply_bpe(&table, &sentence);
    let text: Vec<String> = pieces.iter().map(ToString::to_string).collect();
    println!("segmented: {}", text.join(" "));
    println!("restored:  {}", revert_bpe(&pieces).join(" "));
}
