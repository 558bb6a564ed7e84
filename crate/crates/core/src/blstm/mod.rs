//! Bidirectional LSTM sentiment regressor, written from scratch: embedding
//! lookup, forward pass, BPTT, gradient clipping, RMSprop and two training
//! regimes.
//!
//! * [`Variant::Slstm`]: dropout 0.2 on whole input rows and 0.2 recurrent
//!   dropout on `h_prev` (one mask per sequence), fixed epoch count.
//! * [`Variant::Elstm`]: dropout 0.5 between layers only (embedding output and
//!   the concatenated final states), early stopping on a validation set.
//!
//! Both minimize MSE with RMSprop on mini-batches, clip gradients
//! element-wise and use a linear output unit. The model ignores the target
//! company: it scores the sentence.

mod io;
pub mod network;
pub mod optim;
pub mod sequence;

use std::fmt::Debug;
use std::iter::Sum;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{group_by_sentence, HeadlineInstance};
use crate::embeddings::WordVectors;
use crate::error::{Error, Result};
use crate::seed;
use crate::tokenize::Tokenizer;

pub use io::{read_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use network::{
    backward, forward, lstm_cell_forward, mse_loss, predict, DirectionParams, DropoutMasks,
    DropoutRates, ForwardCache, Params,
};
pub use optim::{clip_gradients, EarlyStopping, RmsProp, StopDecision};
pub use sequence::{embed_sequence, PaddedSequence};

/// Floating-point storage for network parameters and activations.
pub trait Real:
    num_traits::Float + Send + Sync + Debug + Default + Sum + 'static
{
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Slstm,
    Elstm,
}

impl Variant {
    pub fn dropout(self) -> DropoutRates {
        match self {
            Variant::Slstm => DropoutRates {
                input_rows: 0.2,
                recurrent: 0.2,
                ..DropoutRates::default()
            },
            Variant::Elstm => DropoutRates {
                embedding: 0.5,
                dense: 0.5,
                ..DropoutRates::default()
            },
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "slstm" => Ok(Variant::Slstm),
            "elstm" => Ok(Variant::Elstm),
            other => Err(format!("unknown variant {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlstmConfig {
    /// Sequence length; fixed from the longest training sentence when unset.
    pub max_len: Option<usize>,
    pub embed_dim: usize,
    pub hidden: usize,
    pub variant: Variant,
    pub clip_value: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub rms_decay: f64,
    pub rms_eps: f64,
    /// Fixed epoch count (SLSTM) or cap (ELSTM).
    pub epochs: usize,
    pub patience: usize,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for BlstmConfig {
    fn default() -> Self {
        Self::slstm()
    }
}

impl BlstmConfig {
    pub fn slstm() -> Self {
        BlstmConfig {
            max_len: None,
            embed_dim: 300,
            hidden: 100,
            variant: Variant::Slstm,
            clip_value: 5.0,
            batch_size: 32,
            learning_rate: 0.001,
            rms_decay: 0.9,
            rms_eps: 1e-8,
            epochs: 25,
            patience: 10,
            val_fraction: 0.1,
            seed: 0,
        }
    }

    pub fn elstm() -> Self {
        BlstmConfig {
            variant: Variant::Elstm,
            epochs: 100,
            ..Self::slstm()
        }
    }

    pub fn for_variant(variant: Variant) -> Self {
        match variant {
            Variant::Slstm => Self::slstm(),
            Variant::Elstm => Self::elstm(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.max_len == Some(0) {
            return fail("max_len must be at least 1".into());
        }
        if self.hidden == 0 || self.embed_dim == 0 {
            return fail("hidden and embed_dim must be at least 1".into());
        }
        if !(self.clip_value > 0.0) {
            return fail(format!("clip_value must be positive, got {}", self.clip_value));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if !(self.learning_rate >= 0.0) {
            return fail(format!("learning_rate must be >= 0, got {}", self.learning_rate));
        }
        if !(self.rms_decay > 0.0 && self.rms_decay < 1.0) {
            return fail(format!("rms_decay must be in (0, 1), got {}", self.rms_decay));
        }
        if self.variant == Variant::Elstm && !(self.val_fraction > 0.0 && self.val_fraction < 1.0)
        {
            return fail(format!("val_fraction must be in (0, 1), got {}", self.val_fraction));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingHistory {
    /// Inference-mode training MSE after each epoch.
    pub train_mse: Vec<f64>,
    pub val_mse: Vec<f64>,
    pub epochs_run: usize,
    /// Epoch whose parameters were kept (1-based; 0 if none ran).
    pub best_epoch: usize,
}

/// A trained (or freshly initialized) network and its configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BlstmModel {
    pub params: Params<f32>,
    pub config: BlstmConfig,
    pub history: TrainingHistory,
}

/// A padded sequence and its regression target.
pub type Example = (PaddedSequence<f32>, f64);

impl BlstmModel {
    pub fn new(config: BlstmConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::derived_rng(config.seed, "blstm/init");
        Ok(BlstmModel {
            params: Params::init(config.hidden, config.embed_dim, &mut rng),
            config,
            history: TrainingHistory::default(),
        })
    }

    pub fn max_len(&self) -> usize {
        self.config.max_len.unwrap_or(1)
    }

    pub fn predict(&self, seq: &PaddedSequence<f32>) -> Result<f64> {
        predict(&self.params, seq).map(|s| s as f64)
    }

    pub fn predict_all(&self, seqs: &[PaddedSequence<f32>]) -> Result<Vec<f64>> {
        seqs.par_iter().map(|s| self.predict(s)).collect()
    }

    /// Tokenizes and embeds `sentences` at this model's sequence length.
    pub fn encode(
        &self,
        sentences: &[&str],
        wv: &WordVectors,
        tokenizer: &Tokenizer,
    ) -> Result<Vec<PaddedSequence<f32>>> {
        sentences
            .iter()
            .map(|s| {
                embed_sequence(
                    &tokenizer.tokenize(s),
                    wv,
                    self.max_len(),
                    self.config.embed_dim,
                )
            })
            .collect()
    }

    pub fn mse(&self, examples: &[Example]) -> Result<f64> {
        let preds: Vec<f64> = examples
            .par_iter()
            .map(|(s, _)| self.predict(s))
            .collect::<Result<_>>()?;
        let targets: Vec<f64> = examples.iter().map(|e| e.1).collect();
        mse_loss(&preds, &targets)
    }
}

/// Length of the longest tokenized sentence (at least 1).
pub fn longest_sentence(instances: &[HeadlineInstance], tokenizer: &Tokenizer) -> usize {
    instances
        .iter()
        .map(|i| tokenizer.tokenize(&i.sentence).len())
        .max()
        .unwrap_or(1)
        .max(1)
}

/// Turns labeled instances into padded examples.
pub fn prepare_examples(
    instances: &[HeadlineInstance],
    wv: &WordVectors,
    tokenizer: &Tokenizer,
    max_len: usize,
    embed_dim: usize,
) -> Result<Vec<Example>> {
    instances
        .iter()
        .map(|inst| {
            let y = inst
                .gold_score
                .ok_or_else(|| Error::EmptyDataset("training instance without a gold score"))?;
            let seq = embed_sequence(&tokenizer.tokenize(&inst.sentence), wv, max_len, embed_dim)?;
            Ok((seq, y))
        })
        .collect()
}

/// Splits at the sentence-group level into (train, validation).
pub fn split_validation(
    instances: &[HeadlineInstance],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<HeadlineInstance>, Vec<HeadlineInstance>)> {
    let groups = group_by_sentence(instances);
    if groups.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            found: groups.len(),
        });
    }
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.shuffle(&mut seed::rng(seed));
    let n_val = ((groups.len() as f64 * fraction).ceil() as usize).clamp(1, groups.len() - 1);
    let val_keys: std::collections::HashSet<&str> = order[..n_val]
        .iter()
        .map(|&g| groups[g].sentence_key.as_str())
        .collect();
    let (val, train) = instances
        .iter()
        .cloned()
        .partition(|i| val_keys.contains(i.sentence_key().as_str()));
    Ok((train, val))
}

pub fn train_slstm(
    train: &[HeadlineInstance],
    wv: &WordVectors,
    tokenizer: &Tokenizer,
    cfg: &BlstmConfig,
) -> Result<BlstmModel> {
    if cfg.variant != Variant::Slstm {
        return Err(Error::Config("train_slstm needs the slstm variant".into()));
    }
    if train.is_empty() {
        return Err(Error::EmptyDataset("BLSTM training set"));
    }
    let mut cfg = *cfg;
    let max_len = *cfg
        .max_len
        .get_or_insert_with(|| longest_sentence(train, tokenizer));
    let examples = prepare_examples(train, wv, tokenizer, max_len, cfg.embed_dim)?;
    fit(&examples, None, &cfg)
}

pub fn train_elstm(
    train: &[HeadlineInstance],
    val: &[HeadlineInstance],
    wv: &WordVectors,
    tokenizer: &Tokenizer,
    cfg: &BlstmConfig,
) -> Result<BlstmModel> {
    if cfg.variant != Variant::Elstm {
        return Err(Error::Config("train_elstm needs the elstm variant".into()));
    }
    if train.is_empty() {
        return Err(Error::EmptyDataset("BLSTM training set"));
    }
    if val.is_empty() {
        return Err(Error::EmptyDataset("ELSTM validation set"));
    }
    let mut cfg = *cfg;
    let max_len = *cfg
        .max_len
        .get_or_insert_with(|| longest_sentence(train, tokenizer));
    let train_ex = prepare_examples(train, wv, tokenizer, max_len, cfg.embed_dim)?;
    let val_ex = prepare_examples(val, wv, tokenizer, max_len, cfg.embed_dim)?;
    fit(&train_ex, Some(&val_ex), &cfg)
}

/// The training loop shared by both variants. `cfg.max_len` must be set and
/// match the examples. With `val` present (ELSTM), keeps the parameters of
/// the best validation epoch and stops after `cfg.patience` epochs without
/// improvement.
pub fn fit(train: &[Example], val: Option<&[Example]>, cfg: &BlstmConfig) -> Result<BlstmModel> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset("BLSTM training set"));
    }
    let max_len = cfg
        .max_len
        .ok_or_else(|| Error::Config("max_len must be fixed before fitting".into()))?;
    for (seq, y) in train.iter().chain(val.unwrap_or_default()) {
        if seq.max_len != max_len || seq.dim != cfg.embed_dim {
            return Err(Error::DimensionMismatch {
                expected: max_len * cfg.embed_dim,
                found: seq.max_len * seq.dim,
            });
        }
        if !y.is_finite() {
            return Err(Error::NonFinite("BLSTM targets"));
        }
    }
    if cfg.variant == Variant::Elstm && val.is_none_or(|v| v.is_empty()) {
        return Err(Error::EmptyDataset("ELSTM validation set"));
    }

    let mut model = BlstmModel::new(*cfg)?;
    let mut optimizer = RmsProp::new(
        cfg.learning_rate as f32,
        cfg.rms_decay as f32,
        cfg.rms_eps as f32,
        cfg.hidden,
        cfg.embed_dim,
    );
    let rates = cfg.variant.dropout();
    let mut shuffle_rng: ChaCha8Rng = seed::derived_rng(cfg.seed, "blstm/shuffle");
    let mut dropout_rng: ChaCha8Rng = seed::derived_rng(cfg.seed, "blstm/dropout");
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best_params = model.params.clone();
    let mut history = TrainingHistory::default();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(cfg.batch_size) {
            let masks: Vec<DropoutMasks<f32>> = batch
                .iter()
                .map(|_| rates.sample(max_len, cfg.embed_dim, cfg.hidden, &mut dropout_rng))
                .collect();
            let mut grads = batch_gradient(&model.params, train, batch, masks)?;
            clip_gradients(&mut grads, cfg.clip_value as f32);
            optimizer.step(&mut model.params, &grads);
        }
        if !model.params.is_finite() {
            return Err(Error::NonFinite("BLSTM parameters"));
        }
        history.epochs_run = epoch;
        history.train_mse.push(model.mse(train)?);
        match val {
            Some(val) if cfg.variant == Variant::Elstm => {
                let loss = model.mse(val)?;
                history.val_mse.push(loss);
                match stopper.observe(epoch, loss) {
                    StopDecision::Improved => best_params = model.params.clone(),
                    StopDecision::Waiting => {}
                    StopDecision::Stop => break,
                }
            }
            _ => history.best_epoch = epoch,
        }
    }
    if cfg.variant == Variant::Elstm {
        history.best_epoch = stopper.best_epoch();
        if history.best_epoch > 0 {
            model.params = best_params;
        }
    }
    model.history = history;
    Ok(model)
}

/// Mean-MSE gradient of one mini-batch. Per-sample passes run in parallel;
/// the reduction happens in batch order.
fn batch_gradient(
    params: &Params<f32>,
    data: &[Example],
    batch: &[usize],
    masks: Vec<DropoutMasks<f32>>,
) -> Result<Params<f32>> {
    let scale = 2.0 / batch.len() as f32;
    let per_sample: Vec<Params<f32>> = batch
        .par_iter()
        .zip(masks)
        .map(|(&i, mask)| {
            let (seq, y) = &data[i];
            let cache = forward(params, seq, mask)?;
            let mut g = Params::zeros(params.hidden, params.embed_dim);
            network::backward_one(params, &cache, scale * (cache.score - *y as f32), &mut g);
            Ok(g)
        })
        .collect::<Result<_>>()?;
    let mut total = Params::zeros(params.hidden, params.embed_dim);
    for g in &per_sample {
        total.add_assign(g);
    }
    Ok(total)
}

/// Compares analytic gradients of the batch MSE with central finite
/// differences. Returns the maximum over parameters of
/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn gradient_check(params: &Params<f64>, batch: &[(PaddedSequence<f64>, f64)], step: f64) -> Result<f64> {
    let analytic = analytic_gradient(params, batch)?;
    gradient_check_against(params, batch, step, &analytic)
}

pub fn analytic_gradient(params: &Params<f64>, batch: &[(PaddedSequence<f64>, f64)]) -> Result<Params<f64>> {
    let caches = batch
        .iter()
        .map(|(s, _)| forward(params, s, DropoutMasks::default()))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<f64> = batch.iter().map(|b| b.1).collect();
    backward(params, &targets, &caches)
}

/// Like [`gradient_check`] but against a caller-supplied analytic gradient.
pub fn gradient_check_against(
    params: &Params<f64>,
    batch: &[(PaddedSequence<f64>, f64)],
    step: f64,
    analytic: &Params<f64>,
) -> Result<f64> {
    let loss = |p: &Params<f64>| -> Result<f64> {
        let preds = batch
            .iter()
            .map(|(s, _)| predict(p, s))
            .collect::<Result<Vec<_>>>()?;
        let targets: Vec<f64> = batch.iter().map(|b| b.1).collect();
        mse_loss(&preds, &targets)
    };
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    for (t, grad) in analytic.tensors().iter().enumerate() {
        for (k, &a) in grad.iter().enumerate() {
            let original = probe.tensors()[t][k];
            probe.tensors_mut()[t][k] = original + step;
            let up = loss(&probe)?;
            probe.tensors_mut()[t][k] = original - step;
            let down = loss(&probe)?;
            probe.tensors_mut()[t][k] = original;
            let numeric = (up - down) / (2.0 * step);
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    Ok(worst)
}
