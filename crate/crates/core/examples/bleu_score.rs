//! Scores two systems against the same references and prints the difference.

use mlnmt::eval::{bleu, delta_report};

fn main() {
    let refs = ["Hello, world! It's nice here.", "I like red apples and green pears"];
    let baseline = ["Hello , world ! It is nice here .", "I like green apples and pears"];
    let system = ["Hello, world! It is nice here.", "I like red apples and pears"];
    let b = bleu(&baseline, &refs).unwrap();
    let s = bleu(&system, &refs).unwrap();
    println!("baseline {b}");
    println!("system   {s}");
    println!("delta    {}", delta_report(&s, &b).unwrap());
}
