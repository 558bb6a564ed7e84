//! Bag-of-n-grams vocabulary and sparse vectors with the one-hot company
//! block.

use finsent::features::{extract_ngrams, fit_vocabulary, vectorize, BIGRAM_SEPARATOR};
use finsent::synthetic;
use finsent::tokenize::Tokenizer;

pub fn run() -> finsent::Result<()> {
    let data = synthetic::headlines(30, 3);
    let tokenizer = Tokenizer::default();
    let orders = [1, 2].into();
    let grams: Vec<Vec<String>> = data
        .iter()
        .map(|i| extract_ngrams(&tokenizer.tokenize(&i.sentence), &orders))
        .collect();
    let vocab = fit_vocabulary(grams.iter().map(Vec::as_slice), data.iter().map(|i| i.company.as_str()), true);
    println!(
        "{} n-gram columns + {} company columns = {}",
        vocab.n_gram_columns(),
        vocab.n_aspect_columns(),
        vocab.width()
    );

    let first = &data[0];
    let x = vectorize(&grams[0], Some(&first.company), &vocab);
    println!("{:?} -> {} non-zero of {}", first.sentence, x.nnz(), x.width);
    let bigrams: Vec<String> = grams[0]
        .iter()
        .filter(|g| g.contains(BIGRAM_SEPARATOR))
        .map(|g| g.replace(BIGRAM_SEPARATOR, "_"))
        .collect();
    println!("bigrams: {}", bigrams.join(" "));
    Ok(())
}

#[allow(dead_code)]
fn main() -> finsent::Result<()> {
    run()
}
