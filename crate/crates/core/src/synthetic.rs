//! Small seeded headline corpora and matching word vectors, for examples,
//! tests and smoke runs when the licensed data is unavailable.
//!
//! Headlines are built from a fixed word list: companies, clearly positive
//! and negative verbs and adjectives, and neutral filler. Gold scores follow
//! the polarity of the sentiment words with a little noise. About a quarter
//! of the sentences mention two companies with opposite sentiment, so the
//! corpus has multi-aspect groups. The embeddings place positive words near
//! "excellent" and negative words near "poor".

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::HeadlineInstance;
use crate::embeddings::WordVectors;
use crate::seed;

pub const COMPANIES: [&str; 10] = [
    "Acme",
    "Globex",
    "Initech",
    "Umbrella Corp",
    "Hooli",
    "Vandelay Industries",
    "Soylent",
    "Wonka",
    "Stark Industries",
    "Tyrell",
];

pub const POSITIVE_WORDS: [&str; 14] = [
    "rises", "gains", "soars", "jumps", "climbs", "surges", "rallies", "beats", "strong", "record",
    "upgrade", "boost", "outperform", "growth",
];

pub const NEGATIVE_WORDS: [&str; 14] = [
    "falls", "drops", "slumps", "plunges", "slides", "tumbles", "misses", "weak", "loss", "downgrade",
    "warning", "cut", "underperform", "decline",
];

pub const NEUTRAL_WORDS: [&str; 16] = [
    "shares", "quarter", "after", "results", "sales", "market", "investors", "outlook", "in", "on",
    "the", "as", "profit", "forecast", "trading", "update",
];

/// Labeled headlines with ids `"0000"`, `"0001"`, ... Returns exactly `n`
/// instances; every sentence is distinct.
pub fn headlines(n: usize, seed: u64) -> Vec<HeadlineInstance> {
    headlines_with(n, seed, 0.25)
}

/// Like [`headlines`], with the share of two-company sentences set by
/// `multi_aspect_rate` (0 gives one aspect per sentence).
pub fn headlines_with(n: usize, seed: u64, multi_aspect_rate: f64) -> Vec<HeadlineInstance> {
    let mut rng = seed::derived_rng(seed, "synthetic/headlines");
    let mut out: Vec<HeadlineInstance> = Vec::with_capacity(n);
    let mut sentences = std::collections::HashSet::new();
    while out.len() < n {
        let two = n - out.len() >= 2 && rng.gen_bool(multi_aspect_rate);
        let (sentence, aspects) = if two {
            let pair: Vec<&str> = COMPANIES.choose_multiple(&mut rng, 2).copied().collect();
            let (p, n) = (pick(&POSITIVE_WORDS, &mut rng), pick(&NEGATIVE_WORDS, &mut rng));
            let strength = rng.gen_range(0.3..0.9);
            (
                format!("{} {} as {} {}", pair[0], p, pair[1], n),
                vec![(pair[0], strength), (pair[1], -strength)],
            )
        } else {
            let company = pick(&COMPANIES, &mut rng);
            let polarity: f64 = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let pool = if polarity > 0.0 { &POSITIVE_WORDS } else { &NEGATIVE_WORDS };
            let k = rng.gen_range(1..=2);
            let mut words: Vec<&str> = pool.choose_multiple(&mut rng, k).copied().collect();
            let fillers = rng.gen_range(1..=3);
            words.extend(NEUTRAL_WORDS.choose_multiple(&mut rng, fillers).copied());
            words.shuffle(&mut rng);
            let strength = 0.25 * k as f64 + rng.gen_range(0.0..0.4);
            (format!("{company} {}", words.join(" ")), vec![(company, polarity * strength)])
        };
        if !sentences.insert(sentence.clone()) {
            continue;
        }
        for (company, score) in aspects {
            let noise = rng.gen_range(-0.05..0.05);
            let score: f64 = score + noise;
            let id = format!("{:04}", out.len());
            out.push(HeadlineInstance::new(id, company, sentence.clone(), Some(round(score.clamp(-1.0, 1.0)))));
        }
    }
    out
}

fn pick<'a>(words: &[&'a str], rng: &mut impl Rng) -> &'a str {
    words.choose(rng).copied().expect("non-empty word list")
}

fn round(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Every lowercased token the generator can emit, plus "excellent" and
/// "poor".
pub fn vocabulary() -> Vec<String> {
    let mut words: Vec<String> = vec!["excellent".into(), "poor".into()];
    for company in COMPANIES {
        for part in company.split_whitespace() {
            let part = part.to_lowercase();
            if !words.contains(&part) {
                words.push(part);
            }
        }
    }
    for w in POSITIVE_WORDS.iter().chain(&NEGATIVE_WORDS).chain(&NEUTRAL_WORDS) {
        words.push(w.to_string());
    }
    words
}

/// `dim`-dimensional vectors for [`vocabulary`]. Sentiment words sit close
/// to their seed word's direction; everything else is random.
pub fn embeddings(dim: usize, seed: u64) -> WordVectors {
    assert!(dim >= 2, "need at least two dimensions");
    let mut rng = seed::derived_rng(seed, "synthetic/embeddings");
    let mut gaussian_ish = |scale: f64| -> Vec<f64> {
        (0..dim).map(|_| rng.gen_range(-1.0..1.0) * scale).collect()
    };
    let pos_dir = gaussian_ish(1.0);
    let neg_dir: Vec<f64> = pos_dir.iter().map(|v| -v).collect();
    let vocab = vocabulary();
    let mut matrix = Vec::with_capacity(vocab.len() * dim);
    for word in &vocab {
        let row: Vec<f64> = match word.as_str() {
            "excellent" => pos_dir.clone(),
            "poor" => neg_dir.clone(),
            w if POSITIVE_WORDS.contains(&w) => add(&pos_dir, &gaussian_ish(0.3)),
            w if NEGATIVE_WORDS.contains(&w) => add(&neg_dir, &gaussian_ish(0.3)),
            _ => gaussian_ish(1.0),
        };
        matrix.extend(row.iter().map(|&v| v as f32));
    }
    WordVectors::new(dim, vocab, matrix).expect("vocabulary is duplicate-free")
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::group_by_sentence;
    use crate::embeddings::build_replacement_lexicon;

    #[test]
    fn exact_count_and_deterministic() {
        let a = headlines(37, 5);
        assert_eq!(a.len(), 37);
        assert_eq!(a, headlines(37, 5));
        assert_ne!(a, headlines(37, 6));
        assert!(a.iter().all(|i| i.validate(0).is_ok()));
    }

    #[test]
    fn zero_rate_is_single_aspect() {
        let groups = group_by_sentence(&headlines_with(40, 1, 0.0));
        assert_eq!(groups.len(), 40);
    }

    #[test]
    fn has_multi_aspect_groups() {
        let groups = group_by_sentence(&headlines(60, 1));
        assert!(groups.iter().any(|g| g.is_multi_aspect()));
        assert!(groups.iter().any(|g| !g.is_multi_aspect()));
    }

    #[test]
    fn lexicons_find_sentiment_words() {
        let wv = embeddings(16, 2);
        let pos = build_replacement_lexicon(&wv, "excellent", 10).unwrap();
        assert!(pos.words.iter().all(|w| POSITIVE_WORDS.contains(&w.as_str())));
        let neg = build_replacement_lexicon(&wv, "poor", 10).unwrap();
        assert!(neg.words.iter().all(|w| NEGATIVE_WORDS.contains(&w.as_str())));
    }
}
