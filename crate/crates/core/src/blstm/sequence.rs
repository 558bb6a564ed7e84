use crate::embeddings::WordVectors;
use crate::error::{Error, Result};
use crate::tokenize::TokenSequence;

use super::Real;

/// A sentence as an `L x dim` matrix of embeddings, zero-padded on the right.
/// Out-of-vocabulary tokens are zero rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedSequence<T = f32> {
    pub matrix: Vec<T>,
    pub max_len: usize,
    pub dim: usize,
    pub valid_len: usize,
}

impl<T: Real> PaddedSequence<T> {
    pub fn zeros(max_len: usize, dim: usize) -> Self {
        PaddedSequence {
            matrix: vec![T::zero(); max_len * dim],
            max_len,
            dim,
            valid_len: 0,
        }
    }

    pub fn row(&self, t: usize) -> &[T] {
        &self.matrix[t * self.dim..(t + 1) * self.dim]
    }

    pub fn cast<U: Real>(&self) -> PaddedSequence<U> {
        PaddedSequence {
            matrix: self.matrix.iter().map(|&v| U::of(v.as_f64())).collect(),
            max_len: self.max_len,
            dim: self.dim,
            valid_len: self.valid_len,
        }
    }
}

/// Looks up the first `max_len` tokens; longer sentences are truncated.
pub fn embed_sequence(
    tokens: &TokenSequence,
    wv: &WordVectors,
    max_len: usize,
    embed_dim: usize,
) -> Result<PaddedSequence<f32>> {
    if wv.dim() != embed_dim {
        return Err(Error::DimensionMismatch {
            expected: embed_dim,
            found: wv.dim(),
        });
    }
    if max_len == 0 {
        return Err(Error::Config("sequence length must be at least 1".into()));
    }
    let mut seq = PaddedSequence::zeros(max_len, embed_dim);
    let valid = tokens.len().min(max_len);
    for (t, token) in tokens.tokens.iter().take(valid).enumerate() {
        if let Some(v) = wv.lookup(token) {
            seq.matrix[t * embed_dim..(t + 1) * embed_dim].copy_from_slice(v);
        }
    }
    seq.valid_len = valid;
    Ok(seq)
}
