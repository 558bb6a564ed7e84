//! Rule-based and whitespace tokenization, then word replacement with
//! company, positive and negative placeholders.

use std::collections::BTreeSet;

use finsent::embeddings::build_replacement_lexicon;
use finsent::features::{apply_replacements, extract_ngrams, ReplacementConfig, ReplacementGroup};
use finsent::synthetic;
use finsent::tokenize::{Tokenizer, TokenizerKind};

pub fn run() -> finsent::Result<()> {
    let headline = "Umbrella Corp's pre-tax profit soars 12.5%, beats U.S. forecasts";
    for kind in [TokenizerKind::Whitespace, TokenizerKind::Rules] {
        println!("{kind:?}: {}", Tokenizer::new(kind).tokenize(headline).join());
    }

    let tokenizer = Tokenizer::default();
    let wv = synthetic::embeddings(32, 1);
    let all: BTreeSet<ReplacementGroup> =
        [ReplacementGroup::Company, ReplacementGroup::Positive, ReplacementGroup::Negative].into();
    let cfg = ReplacementConfig::new(
        synthetic::COMPANIES,
        &tokenizer,
        Some(build_replacement_lexicon(&wv, "excellent", 10)?),
        Some(build_replacement_lexicon(&wv, "poor", 10)?),
        all,
    );
    let replaced = apply_replacements(&tokenizer.tokenize(headline), &cfg);
    println!("replaced: {}", replaced.join());

    let grams = extract_ngrams(&replaced, &[1, 2].into());
    println!("{} uni- and bigrams", grams.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> finsent::Result<()> {
    run()
}
