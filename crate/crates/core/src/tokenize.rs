//! Whitespace and rule-based tokenizers.
//!
//! The rule tokenizer applies a small frozen rule list, in priority order:
//!
//! 1. URLs (`http://`, `https://`, `www.`) stay whole; trailing sentence
//!    punctuation is split off.
//! 2. Dotted abbreviations of single letters (`U.S.`) stay whole.
//! 3. Runs of letters and digits form words. A hyphen between two
//!    alphanumerics joins (`pre-tax`); `.` or `,` between two digits joins
//!    (`3.5`, `12,000`).
//! 4. Apostrophe clitics split off: `'s 're 've 'll 'd 'm` and `n't`. Other
//!    apostrophes between letters join (`o'neil`); any remaining apostrophe
//!    is punctuation (`shares'` gives `shares`, `'`).
//! 5. `...` is one token; every other symbol (currency, `%`, brackets,
//!    quotes) is a token of its own.
//!
//! Both tokenizers lowercase by default.

use serde::{Deserialize, Serialize};

/// Reserved placeholder tokens produced by word replacement.
pub const COMPANY_TOKEN: &str = "\u{27e8}COMPANY\u{27e9}";
pub const POSITIVE_TOKEN: &str = "\u{27e8}POS\u{27e9}";
pub const NEGATIVE_TOKEN: &str = "\u{27e8}NEG\u{27e9}";

const RESERVED: [&str; 3] = [COMPANY_TOKEN, POSITIVE_TOKEN, NEGATIVE_TOKEN];
const ESCAPE: char = '\\';

pub fn is_reserved(token: &str) -> bool {
    RESERVED.contains(&token)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    /// Character count of the input text.
    pub source_len: usize,
}

impl TokenSequence {
    pub fn new(tokens: Vec<String>, source_len: usize) -> Self {
        TokenSequence { tokens, source_len }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn join(&self) -> String {
        self.tokens.join(" ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerKind {
    Whitespace,
    #[default]
    Rules,
}

impl std::str::FromStr for TokenizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "whitespace" => Ok(TokenizerKind::Whitespace),
            "rules" => Ok(TokenizerKind::Rules),
            other => Err(format!("unknown tokenizer {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    pub kind: TokenizerKind,
    pub lowercase: bool,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer {
            kind: TokenizerKind::Rules,
            lowercase: true,
        }
    }
}

impl Tokenizer {
    pub fn new(kind: TokenizerKind) -> Self {
        Tokenizer {
            kind,
            lowercase: true,
        }
    }

    pub fn tokenize(&self, text: &str) -> TokenSequence {
        let raw = match self.kind {
            TokenizerKind::Whitespace => split_whitespace(text),
            TokenizerKind::Rules => split_rules(text),
        };
        finish(raw, text, self.lowercase)
    }
}

pub fn whitespace_tokenize(text: &str) -> TokenSequence {
    Tokenizer::new(TokenizerKind::Whitespace).tokenize(text)
}

pub fn rule_tokenize(text: &str) -> TokenSequence {
    Tokenizer::new(TokenizerKind::Rules).tokenize(text)
}

fn finish(raw: Vec<String>, text: &str, lowercase: bool) -> TokenSequence {
    let tokens = raw
        .into_iter()
        .map(|t| if lowercase { t.to_lowercase() } else { t })
        .map(escape_reserved)
        .collect();
    TokenSequence::new(tokens, text.chars().count())
}

fn escape_reserved(token: String) -> String {
    if is_reserved(&token) || token.starts_with(ESCAPE) && is_reserved(token.trim_start_matches(ESCAPE)) {
        format!("{ESCAPE}{token}")
    } else {
        token
    }
}

fn split_whitespace(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

fn split_rules(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        if is_url(chunk) {
            split_url(chunk, &mut out);
        } else {
            let chars: Vec<char> = chunk.chars().collect();
            scan_chunk(&chars, &mut out);
        }
    }
    out
}

fn is_url(chunk: &str) -> bool {
    let lower = chunk.to_ascii_lowercase();
    ["http://", "https://", "www."]
        .iter()
        .any(|p| lower.starts_with(p) && lower.len() > p.len())
}

fn split_url(chunk: &str, out: &mut Vec<String>) {
    let trailing: &[char] = &['.', ',', ';', ':', '!', '?', ')', ']', '}', '"', '\''];
    let body = chunk.trim_end_matches(trailing);
    out.push(body.to_string());
    out.extend(chunk[body.len()..].chars().map(String::from));
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

const CLITICS: [&str; 6] = ["s", "re", "ve", "ll", "d", "m"];

fn scan_chunk(chars: &[char], out: &mut Vec<String>) {
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_alphanumeric() {
            if let Some(end) = abbreviation_end(chars, i) {
                out.push(chars[i..end].iter().collect());
                i = end;
            } else {
                i = scan_word(chars, i, out);
            }
        } else if c == '.' && chars.get(i + 1) == Some(&'.') && chars.get(i + 2) == Some(&'.') {
            let mut end = i;
            while end < chars.len() && chars[end] == '.' {
                end += 1;
            }
            out.push(chars[i..end].iter().collect());
            i = end;
        } else if is_apostrophe(c) {
            out.push("'".to_string());
            i += 1;
        } else {
            out.push(c.to_string());
            i += 1;
        }
    }
}

/// `U.S.`-style abbreviations: at least two single letters, each followed by
/// a period, not followed by another alphanumeric.
fn abbreviation_end(chars: &[char], start: usize) -> Option<usize> {
    let mut i = start;
    let mut pairs = 0;
    while i + 1 < chars.len() && chars[i].is_alphabetic() && chars[i + 1] == '.' {
        pairs += 1;
        i += 2;
    }
    let next_is_alnum = chars.get(i).is_some_and(|c| c.is_alphanumeric());
    (pairs >= 2 && !next_is_alnum).then_some(i)
}

fn scan_word(chars: &[char], start: usize, out: &mut Vec<String>) -> usize {
    let mut i = start;
    while i < chars.len() {
        let c = chars[i];
        if c.is_alphanumeric() {
            i += 1;
            continue;
        }
        let prev = chars[i - 1];
        let next = chars.get(i + 1).copied();
        let next_alnum = next.is_some_and(char::is_alphanumeric);
        if c == '-' && prev.is_alphanumeric() && next_alnum {
            i += 1;
        } else if (c == '.' || c == ',')
            && prev.is_ascii_digit()
            && next.is_some_and(|n| n.is_ascii_digit())
        {
            i += 1;
        } else if is_apostrophe(c) && prev.is_alphabetic() && next_alnum {
            let mut end = i + 1;
            while end < chars.len() && chars[end].is_alphanumeric() {
                end += 1;
            }
            let rest: String = chars[i + 1..end].iter().collect::<String>().to_lowercase();
            if rest == "t" && (prev == 'n' || prev == 'N') && i - 1 > start {
                out.push(chars[start..i - 1].iter().collect());
                out.push(format!("{prev}'t"));
                return end;
            }
            if CLITICS.contains(&rest.as_str()) {
                out.push(chars[start..i].iter().collect());
                let clitic: String = chars[i + 1..end].iter().collect();
                out.push(format!("'{clitic}"));
                return end;
            }
            i = end;
        } else {
            break;
        }
    }
    out.push(chars[start..i].iter().collect());
    i
}
