use finsent::embeddings::build_replacement_lexicon;
use finsent::features::{apply_replacements, extract_ngrams, fit_vocabulary, vectorize, ReplacementConfig, ReplacementGroup};
use finsent::synthetic;
use finsent::tokenize::{rule_tokenize, whitespace_tokenize, Tokenizer, TokenizerKind};

const RULES: &str = include_str!("golden/tokenizer_rules.tsv");

fn cases() -> Vec<(&'static str, &'static str)> {
    RULES
        .lines()
        .filter(|l| !l.is_empty())
        .map(|l| l.split_once('\t').expect("tab-separated golden line"))
        .collect()
}

#[test]
fn rule_tokenizer_matches_golden_corpus() {
    let cases = cases();
    assert!(cases.len() >= 50);
    let mismatches: Vec<String> = cases
        .iter()
        .filter_map(|(input, want)| {
            let got = rule_tokenize(input).join();
            (got != *want).then(|| format!("{input:?}\n  got:  {got}\n  want: {want}"))
        })
        .collect();
    assert!(mismatches.is_empty(), "{}", mismatches.join("\n"));
}

#[test]
fn golden_outputs_are_fixed_points() {
    // no golden token contains whitespace
    for (_, want) in cases() {
        assert_eq!(whitespace_tokenize(want).join(), want);
    }
}

#[test]
fn keep_case_only_changes_case() {
    let keep = Tokenizer {
        lowercase: false,
        ..Tokenizer::new(TokenizerKind::Rules)
    };
    for (input, want) in cases() {
        assert_eq!(keep.tokenize(input).join().to_lowercase(), want);
    }
}

#[test]
fn rules_never_yield_fewer_tokens_than_whitespace() {
    for (input, _) in cases() {
        assert!(rule_tokenize(input).len() >= whitespace_tokenize(input).len(), "{input}");
    }
}

#[test]
fn feature_pipeline_is_deterministic_on_golden_corpus() {
    let inputs: Vec<&str> = cases().into_iter().map(|c| c.0).collect();
    let featurize = || {
        let tokenizer = Tokenizer::default();
        let wv = synthetic::embeddings(16, 1);
        let cfg = ReplacementConfig::new(
            ["BP", "Rolls-Royce", "Marks & Spencer"],
            &tokenizer,
            Some(build_replacement_lexicon(&wv, "excellent", 10).unwrap()),
            Some(build_replacement_lexicon(&wv, "poor", 10).unwrap()),
            [ReplacementGroup::Company, ReplacementGroup::Positive, ReplacementGroup::Negative].into(),
        );
        let grams: Vec<Vec<String>> = inputs
            .iter()
            .map(|s| extract_ngrams(&apply_replacements(&tokenizer.tokenize(s), &cfg), &[1, 2].into()))
            .collect();
        let vocab = fit_vocabulary(grams.iter().map(Vec::as_slice), ["BP"], true);
        let vectors: Vec<String> = grams
            .iter()
            .map(|g| serde_json::to_string(&vectorize(g, Some("BP"), &vocab)).unwrap())
            .collect();
        (vocab.to_json(), vectors)
    };
    assert_eq!(featurize(), featurize());
}
