//! Word vectors: write and reload the word2vec binary format, query nearest
//! neighbours and build the replacement lexicons.

use finsent::embeddings::{build_replacement_lexicon, load_word2vec_binary};
use finsent::synthetic;

pub fn run() -> finsent::Result<()> {
    let wv = synthetic::embeddings(50, 7);
    let path = std::env::temp_dir().join(format!("finsent-example-{}.bin", std::process::id()));
    wv.write_word2vec_binary(&path)?;
    let loaded = load_word2vec_binary(&path)?;
    std::fs::remove_file(&path).ok();
    assert_eq!(loaded.to_word2vec_binary(), wv.to_word2vec_binary());
    println!("{} words x {} dims round-tripped", loaded.len(), loaded.dim());

    for (word, sim) in loaded.most_similar("rises", 5)? {
        println!("  rises ~ {word:<12} {sim:.3}");
    }
    for seed in ["excellent", "poor"] {
        let lexicon = build_replacement_lexicon(&loaded, seed, 10)?;
        println!("{seed}: {}", lexicon.words.join(", "));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> finsent::Result<()> {
    run()
}
