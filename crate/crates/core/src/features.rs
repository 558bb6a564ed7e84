//! Sparse n-gram features for the SVR: word replacement, n-gram extraction,
//! vocabulary fitting and vectorization with a one-hot target-company block.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::embeddings::ReplacementLexicon;
use crate::error::{Error, Result};
use crate::tokenize::{TokenSequence, Tokenizer, COMPANY_TOKEN, NEGATIVE_TOKEN, POSITIVE_TOKEN};

/// Joins the two tokens of a bigram. Tokens never contain it.
pub const BIGRAM_SEPARATOR: char = '\u{1f}';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplacementGroup {
    Company,
    Positive,
    Negative,
}

/// What `apply_replacements` substitutes and with what.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplacementConfig {
    /// Tokenized, lowercased company names.
    pub company_names: Vec<Vec<String>>,
    pub positive: Option<ReplacementLexicon>,
    pub negative: Option<ReplacementLexicon>,
    pub enabled_groups: BTreeSet<ReplacementGroup>,
}

impl ReplacementConfig {
    pub fn disabled() -> Self {
        ReplacementConfig {
            company_names: Vec::new(),
            positive: None,
            negative: None,
            enabled_groups: BTreeSet::new(),
        }
    }

    /// Tokenizes every company name with the sentence tokenizer so that
    /// matching happens on identical token streams.
    pub fn new<'a>(
        companies: impl IntoIterator<Item = &'a str>,
        tokenizer: &Tokenizer,
        positive: Option<ReplacementLexicon>,
        negative: Option<ReplacementLexicon>,
        enabled_groups: BTreeSet<ReplacementGroup>,
    ) -> Self {
        let mut names: Vec<Vec<String>> = companies
            .into_iter()
            .map(|c| {
                tokenizer
                    .tokenize(c)
                    .tokens
                    .into_iter()
                    .map(|t| t.to_lowercase())
                    .collect::<Vec<_>>()
            })
            .filter(|t| !t.is_empty())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        // longest first, then lexicographic, for a stable greedy match
        names.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        let lower = |lex: Option<ReplacementLexicon>| {
            lex.map(|mut l| {
                l.words = l.words.iter().map(|w| w.to_lowercase()).collect();
                l
            })
        };
        ReplacementConfig {
            company_names: names,
            positive: lower(positive),
            negative: lower(negative),
            enabled_groups,
        }
    }

    fn enabled(&self, group: ReplacementGroup) -> bool {
        self.enabled_groups.contains(&group)
    }
}

/// Replaces company mentions, then positive words, then negative words with
/// placeholder tokens. A token consumed by one group is not re-examined.
pub fn apply_replacements(tokens: &TokenSequence, cfg: &ReplacementConfig) -> TokenSequence {
    let lowered: Vec<String> = tokens.tokens.iter().map(|t| t.to_lowercase()).collect();
    let mut out: Vec<String> = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        if cfg.enabled(ReplacementGroup::Company) {
            let matched = cfg
                .company_names
                .iter()
                .find(|name| lowered[i..].starts_with(name));
            if let Some(name) = matched {
                out.push(COMPANY_TOKEN.to_string());
                i += name.len();
                continue;
            }
        }
        let token = &tokens.tokens[i];
        let lower = &lowered[i];
        let replacement = if cfg.enabled(ReplacementGroup::Positive)
            && cfg.positive.as_ref().is_some_and(|l| l.contains(lower))
        {
            POSITIVE_TOKEN.to_string()
        } else if cfg.enabled(ReplacementGroup::Negative)
            && cfg.negative.as_ref().is_some_and(|l| l.contains(lower))
        {
            NEGATIVE_TOKEN.to_string()
        } else {
            token.clone()
        };
        out.push(replacement);
        i += 1;
    }
    TokenSequence::new(out, tokens.source_len)
}

/// All unigrams left to right, then all bigrams left to right.
pub fn extract_ngrams(tokens: &TokenSequence, orders: &BTreeSet<usize>) -> Vec<String> {
    let mut grams = Vec::new();
    if orders.contains(&1) {
        grams.extend(tokens.tokens.iter().cloned());
    }
    if orders.contains(&2) {
        grams.extend(
            tokens
                .tokens
                .windows(2)
                .map(|w| format!("{}{BIGRAM_SEPARATOR}{}", w[0], w[1])),
        );
    }
    grams
}

pub const VOCABULARY_VERSION: u32 = 1;

/// Frozen column layout: gram columns first, then one column per training
/// company.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    grams: Vec<String>,
    aspects: Vec<String>,
    gram_index: HashMap<String, usize>,
    aspect_index: HashMap<String, usize>,
    binary: bool,
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    version: u32,
    binary: bool,
    grams: Vec<String>,
    aspects: Vec<String>,
}

impl Vocabulary {
    fn from_parts(grams: Vec<String>, aspects: Vec<String>, binary: bool) -> Result<Self> {
        let n = grams.len();
        let gram_index: HashMap<String, usize> =
            grams.iter().enumerate().map(|(i, g)| (g.clone(), i)).collect();
        let aspect_index: HashMap<String, usize> = aspects
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), n + i))
            .collect();
        if gram_index.len() != grams.len() || aspect_index.len() != aspects.len() {
            return Err(Error::VocabularyMismatch("duplicate vocabulary entry".into()));
        }
        Ok(Vocabulary {
            grams,
            aspects,
            gram_index,
            aspect_index,
            binary,
        })
    }

    pub fn n_gram_columns(&self) -> usize {
        self.grams.len()
    }

    pub fn n_aspect_columns(&self) -> usize {
        self.aspects.len()
    }

    pub fn width(&self) -> usize {
        self.grams.len() + self.aspects.len()
    }

    pub fn is_binary(&self) -> bool {
        self.binary
    }

    pub fn gram_column(&self, gram: &str) -> Option<usize> {
        self.gram_index.get(gram).copied()
    }

    pub fn aspect_column(&self, company: &str) -> Option<usize> {
        self.aspect_index.get(company.trim()).copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&VocabularyFile {
            version: VOCABULARY_VERSION,
            binary: self.binary,
            grams: self.grams.clone(),
            aspects: self.aspects.clone(),
        })
        .expect("vocabulary serializes")
    }

    pub fn from_json(raw: &str) -> Result<Self> {
        let file: VocabularyFile = serde_json::from_str(raw)
            .map_err(|e| Error::VocabularyMismatch(format!("bad vocabulary file: {e}")))?;
        if file.version != VOCABULARY_VERSION {
            return Err(Error::VocabularyMismatch(format!(
                "unsupported vocabulary version {}",
                file.version
            )));
        }
        Self::from_parts(file.grams, file.aspects, file.binary)
    }
}

/// Assigns columns in order of first occurrence. Pass an empty `aspects`
/// iterator to disable the company block.
pub fn fit_vocabulary<'a>(
    training_grams: impl IntoIterator<Item = &'a [String]>,
    aspects: impl IntoIterator<Item = &'a str>,
    binary: bool,
) -> Vocabulary {
    let mut grams = Vec::new();
    let mut seen = HashMap::new();
    for doc in training_grams {
        for g in doc {
            if !seen.contains_key(g) {
                seen.insert(g.clone(), grams.len());
                grams.push(g.clone());
            }
        }
    }
    let mut companies = Vec::new();
    let mut seen_companies = BTreeSet::new();
    for a in aspects {
        let a = a.trim();
        if seen_companies.insert(a.to_string()) {
            companies.push(a.to_string());
        }
    }
    Vocabulary::from_parts(grams, companies, binary).expect("deduplicated above")
}

/// Index/value pairs sorted by column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseFeatureVector {
    pub entries: Vec<(usize, f64)>,
    pub width: usize,
}

impl SparseFeatureVector {
    pub fn new(mut entries: Vec<(usize, f64)>, width: usize) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    found: w[0].0,
                });
            }
        }
        if let Some(&(last, _)) = entries.last() {
            if last >= width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    found: last + 1,
                });
            }
        }
        entries.retain(|e| e.1 != 0.0);
        Ok(SparseFeatureVector { entries, width })
    }

    pub fn zeros(width: usize) -> Self {
        SparseFeatureVector {
            entries: Vec::new(),
            width,
        }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(j, v)| v * dense[j]).sum()
    }

    pub fn dot(&self, other: &SparseFeatureVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < self.entries.len() && j < other.entries.len() {
            let (a, b) = (self.entries[i], other.entries[j]);
            match a.0.cmp(&b.0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a.1 * b.1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn squared_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum()
    }
}

/// Unknown grams and companies are dropped. `company = None` leaves the
/// aspect block empty.
pub fn vectorize(grams: &[String], company: Option<&str>, vocab: &Vocabulary) -> SparseFeatureVector {
    let mut counts: HashMap<usize, f64> = HashMap::new();
    for g in grams {
        if let Some(col) = vocab.gram_column(g) {
            *counts.entry(col).or_insert(0.0) += 1.0;
        }
    }
    let mut entries: Vec<(usize, f64)> = counts
        .into_iter()
        .map(|(c, n)| (c, if vocab.binary { 1.0 } else { n }))
        .collect();
    if let Some(col) = company.and_then(|c| vocab.aspect_column(c)) {
        entries.push((col, 1.0));
    }
    entries.sort_by_key(|e| e.0);
    SparseFeatureVector {
        entries,
        width: vocab.width(),
    }
}
