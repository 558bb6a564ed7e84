//! Word vectors: word2vec binary/text I/O, cosine similarity, exact nearest
//! neighbours and seed-word replacement lexicons.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense word vectors stored row-major as 32-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectors {
    dim: usize,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Vec<f32>,
    norms: Vec<f64>,
}

impl WordVectors {
    pub fn new(dim: usize, vocab: Vec<String>, matrix: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Format("dimension must be positive".into()));
        }
        if matrix.len() != vocab.len() * dim {
            return Err(Error::Format(format!(
                "{} words x {} dims needs {} values, got {}",
                vocab.len(),
                dim,
                vocab.len() * dim,
                matrix.len()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite vector entry".into()));
        }
        let mut index = HashMap::with_capacity(vocab.len());
        for (i, word) in vocab.iter().enumerate() {
            if word.is_empty() {
                return Err(Error::Format(format!("empty word at position {i}")));
            }
            if index.insert(word.clone(), i).is_some() {
                return Err(Error::DuplicateWord(word.clone()));
            }
        }
        let norms = matrix.chunks_exact(dim).map(norm_f32).collect();
        Ok(WordVectors {
            dim,
            vocab,
            index,
            matrix,
            norms,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn position(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.matrix[i * self.dim..(i + 1) * self.dim]
    }

    pub fn lookup(&self, word: &str) -> Option<&[f32]> {
        self.position(word).map(|i| self.row(i))
    }

    /// Nearest neighbours of `query` by cosine similarity, excluding the query
    /// itself. Ties are broken by vocabulary position.
    pub fn most_similar(&self, query: &str, n: usize) -> Result<Vec<(String, f64)>> {
        let q = self
            .position(query)
            .ok_or_else(|| Error::UnknownWord(query.to_string()))?;
        if n == 0 {
            return Ok(Vec::new());
        }
        let qrow = self.row(q);
        let qnorm = self.norms[q];
        let mut scored: Vec<(f64, usize)> = (0..self.len())
            .filter(|&i| i != q)
            .map(|i| {
                let denom = qnorm * self.norms[i];
                let sim = if denom == 0.0 {
                    0.0
                } else {
                    dot_f32(qrow, self.row(i)) / denom
                };
                (sim, i)
            })
            .collect();
        let by_rank = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
        let keep = n.min(scored.len());
        if keep < scored.len() {
            scored.select_nth_unstable_by(keep, by_rank);
            scored.truncate(keep);
        }
        scored.sort_by(by_rank);
        Ok(scored
            .into_iter()
            .map(|(sim, i)| (self.vocab[i].clone(), sim))
            .collect())
    }

    pub fn write_word2vec_binary(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_word2vec_binary()).map_err(|e| Error::io(path, e))
    }

    pub fn to_word2vec_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.matrix.len() * 4 + self.len() * 8 + 16);
        write!(out, "{} {}\n", self.len(), self.dim).expect("write to vec");
        for (i, word) in self.vocab.iter().enumerate() {
            out.extend_from_slice(word.as_bytes());
            out.push(b' ');
            for v in self.row(i) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn write_word2vec_text(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_word2vec_text()).map_err(|e| Error::io(path, e))
    }

    pub fn to_word2vec_text(&self) -> String {
        let mut out = format!("{} {}\n", self.len(), self.dim);
        for (i, word) in self.vocab.iter().enumerate() {
            out.push_str(word);
            for v in self.row(i) {
                out.push(' ');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

pub fn load_word2vec_binary(path: &Path) -> Result<WordVectors> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_word2vec_binary(&bytes)
}

pub fn parse_word2vec_binary(bytes: &[u8]) -> Result<WordVectors> {
    let header_end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| Error::Format("header is not ASCII".into()))?;
    let (count, dim) = parse_header(header)?;

    let mut pos = header_end + 1;
    let mut vocab = Vec::with_capacity(count);
    let mut matrix = Vec::with_capacity(count * dim);
    for k in 0..count {
        // optional newline left over from the previous record
        if k > 0 && bytes.get(pos) == Some(&b'\n') {
            pos += 1;
        }
        let space = bytes[pos..]
            .iter()
            .position(|&b| b == b' ')
            .ok_or_else(|| Error::Format(format!("truncated file: word {k} of {count}")))?;
        let word = String::from_utf8_lossy(&bytes[pos..pos + space]).into_owned();
        pos += space + 1;
        let need = dim * 4;
        if bytes.len() < pos + need {
            return Err(Error::Format(format!(
                "truncated file: vector {k} of {count}"
            )));
        }
        matrix.extend(
            bytes[pos..pos + need]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])),
        );
        pos += need;
        vocab.push(word);
    }
    WordVectors::new(dim, vocab, matrix)
}

pub fn load_word2vec_text(path: &Path) -> Result<WordVectors> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_word2vec_text(&raw)
}

pub fn parse_word2vec_text(raw: &str) -> Result<WordVectors> {
    let mut lines = raw.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("missing header line".into()))?;
    let (count, dim) = parse_header(header)?;
    let mut vocab = Vec::with_capacity(count);
    let mut matrix = Vec::with_capacity(count * dim);
    for (k, line) in lines.enumerate() {
        let mut fields = line.split_whitespace();
        let word = fields.next().expect("non-empty line");
        let start = matrix.len();
        for field in fields {
            let v: f32 = field
                .parse()
                .map_err(|_| Error::Format(format!("line {}: bad value {field:?}", k + 2)))?;
            matrix.push(v);
        }
        if matrix.len() - start != dim {
            return Err(Error::Format(format!(
                "line {}: {} values, expected {dim}",
                k + 2,
                matrix.len() - start
            )));
        }
        vocab.push(word.to_string());
    }
    if vocab.len() != count {
        return Err(Error::Format(format!(
            "header promises {count} words, found {}",
            vocab.len()
        )));
    }
    WordVectors::new(dim, vocab, matrix)
}

fn parse_header(header: &str) -> Result<(usize, usize)> {
    let mut parts = header.split_whitespace();
    let mut field = |name: &str| -> Result<usize> {
        parts
            .next()
            .and_then(|p| p.parse().ok())
            .ok_or_else(|| Error::Format(format!("bad header {header:?}: missing {name}")))
    };
    let count = field("vocab size")?;
    let dim = field("dimension")?;
    if dim == 0 {
        return Err(Error::Format("dimension must be positive".into()));
    }
    Ok((count, dim))
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return Ok(0.0);
    }
    Ok((ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0))
}

fn dot_f32(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

fn norm_f32(a: &[f32]) -> f64 {
    dot_f32(a, a).sqrt()
}

/// The `n` nearest neighbours of a seed word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplacementLexicon {
    pub seed: String,
    pub n: usize,
    /// Ranked by similarity to the seed, closest first.
    pub words: Vec<String>,
}

impl ReplacementLexicon {
    pub fn contains(&self, word: &str) -> bool {
        self.words.iter().any(|w| w == word)
    }
}

pub fn build_replacement_lexicon(
    wv: &WordVectors,
    seed: &str,
    n: usize,
) -> Result<ReplacementLexicon> {
    let words = wv
        .most_similar(seed, n)?
        .into_iter()
        .map(|(w, _)| w)
        .collect();
    Ok(ReplacementLexicon {
        seed: seed.to_string(),
        n,
        words,
    })
}
