//! Aspect-based sentiment regression for financial news headlines.
//!
//! Given a headline and a company it mentions, predict a sentiment score in
//! `[-1, 1]` toward that company. Two model families are provided:
//!
//! * a linear epsilon-insensitive SVR over sparse n-gram features, with
//!   optional company / positive / negative word replacement and a one-hot
//!   target-company block ([`svr`], [`features`]);
//! * bidirectional LSTM regressors over word embeddings, in two variants
//!   that differ in dropout placement and stopping rule ([`blstm`]).
//!
//! Predictions are scored with three cosine-based metrics plus MAE
//! ([`eval`]). The `finsent` binary wraps the pipeline in a small CLI; the
//! `examples/` directory has one runnable program per capability.

pub mod blstm;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod features;
pub mod pipeline;
pub mod seed;
pub mod svr;
pub mod synthetic;
pub mod tokenize;

pub use error::{Error, ErrorCategory, Result};
