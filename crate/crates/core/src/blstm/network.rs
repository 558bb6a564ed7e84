//! Bidirectional LSTM forward pass and backpropagation through time.
//!
//! Gate rows are laid out `input | forget | cell | output`, each `H` wide:
//!
//! ```text
//! z   = W x + U (h_prev * m_rec) + b
//! i,f,o = sigmoid(z_i, z_f, z_o);  g = tanh(z_g)
//! c   = f * c_prev + i * g
//! h   = o * tanh(c)
//! ```
//!
//! The forward direction reads rows `0..L`, the backward direction
//! `L-1..=0`. Their final hidden states are concatenated and fed to a linear
//! output unit.

use rand::Rng;

use super::sequence::PaddedSequence;
use super::Real;
use crate::error::{Error, Result};

pub const GATES: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionParams<T> {
    /// `4H x E`, row-major.
    pub w: Vec<T>,
    /// `4H x H`, row-major.
    pub u: Vec<T>,
    /// `4H`.
    pub b: Vec<T>,
}

impl<T: Real> DirectionParams<T> {
    fn zeros(hidden: usize, embed_dim: usize) -> Self {
        DirectionParams {
            w: vec![T::zero(); GATES * hidden * embed_dim],
            u: vec![T::zero(); GATES * hidden * hidden],
            b: vec![T::zero(); GATES * hidden],
        }
    }
}

/// Every trainable tensor of the network. Also used for gradients and
/// optimizer accumulators, which share the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub hidden: usize,
    pub embed_dim: usize,
    pub forward: DirectionParams<T>,
    pub backward: DirectionParams<T>,
    /// `2H`: forward final state first, then backward.
    pub dense_w: Vec<T>,
    /// Length 1.
    pub dense_b: Vec<T>,
}

impl<T: Real> Params<T> {
    pub fn zeros(hidden: usize, embed_dim: usize) -> Self {
        Params {
            hidden,
            embed_dim,
            forward: DirectionParams::zeros(hidden, embed_dim),
            backward: DirectionParams::zeros(hidden, embed_dim),
            dense_w: vec![T::zero(); 2 * hidden],
            dense_b: vec![T::zero()],
        }
    }

    /// Glorot-uniform weights, forget-gate bias 1, other biases 0.
    pub fn init(hidden: usize, embed_dim: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(hidden, embed_dim);
        let h = hidden as f64;
        let w_bound = (6.0 / (embed_dim as f64 + 4.0 * h)).sqrt();
        let u_bound = (6.0 / (h + 4.0 * h)).sqrt();
        let d_bound = (6.0 / (2.0 * h + 1.0)).sqrt();
        for dir in [&mut p.forward, &mut p.backward] {
            for v in dir.w.iter_mut() {
                *v = T::of(rng.gen_range(-w_bound..w_bound));
            }
            for v in dir.u.iter_mut() {
                *v = T::of(rng.gen_range(-u_bound..u_bound));
            }
            for v in &mut dir.b[hidden..2 * hidden] {
                *v = T::one();
            }
        }
        for v in p.dense_w.iter_mut() {
            *v = T::of(rng.gen_range(-d_bound..d_bound));
        }
        p
    }

    /// Tensors in serialization order.
    pub fn tensors(&self) -> [&[T]; 8] {
        [
            &self.forward.w,
            &self.forward.u,
            &self.forward.b,
            &self.backward.w,
            &self.backward.u,
            &self.backward.b,
            &self.dense_w,
            &self.dense_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<T>; 8] {
        [
            &mut self.forward.w,
            &mut self.forward.u,
            &mut self.forward.b,
            &mut self.backward.w,
            &mut self.backward.u,
            &mut self.backward.b,
            &mut self.dense_w,
            &mut self.dense_b,
        ]
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn cast<U: Real>(&self) -> Params<U> {
        let conv = |v: &Vec<T>| v.iter().map(|&x| U::of(x.as_f64())).collect::<Vec<U>>();
        let dir = |d: &DirectionParams<T>| DirectionParams {
            w: conv(&d.w),
            u: conv(&d.u),
            b: conv(&d.b),
        };
        Params {
            hidden: self.hidden,
            embed_dim: self.embed_dim,
            forward: dir(&self.forward),
            backward: dir(&self.backward),
            dense_w: conv(&self.dense_w),
            dense_b: conv(&self.dense_b),
        }
    }

    pub fn add_assign(&mut self, other: &Params<T>) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = *x + y;
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for t in self.tensors_mut() {
            for x in t.iter_mut() {
                *x = *x * factor;
            }
        }
    }

    pub fn max_abs(&self) -> T {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .fold(T::zero(), |m, &v| m.max(v.abs()))
    }
}

/// Inverted-dropout masks for one sequence. Every entry is either 0 or
/// `1 / (1 - p)`; `None` means no dropout at that site.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks<T> {
    /// Per-direction keep factor for each whole input row (length `L`).
    pub input_rows: [Option<Vec<T>>; 2],
    /// Element-wise mask on the embedding matrix shared by both directions
    /// (length `L * E`).
    pub embedding: Option<Vec<T>>,
    /// Per-direction mask on `h_prev` entering the gates, reused at every
    /// time step (length `H`).
    pub recurrent: [Option<Vec<T>>; 2],
    /// Mask on the `2H` concatenation entering the output unit.
    pub dense: Option<Vec<T>>,
}

impl<T> Default for DropoutMasks<T> {
    fn default() -> Self {
        DropoutMasks {
            input_rows: [None, None],
            embedding: None,
            recurrent: [None, None],
            dense: None,
        }
    }
}

/// Dropout probabilities at each site.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DropoutRates {
    pub input_rows: f64,
    pub embedding: f64,
    pub recurrent: f64,
    pub dense: f64,
}

fn sample_mask<T: Real>(len: usize, p: f64, rng: &mut impl Rng) -> Option<Vec<T>> {
    if p <= 0.0 {
        return None;
    }
    let keep = T::of(1.0 / (1.0 - p));
    Some(
        (0..len)
            .map(|_| if rng.gen::<f64>() < p { T::zero() } else { keep })
            .collect(),
    )
}

impl DropoutRates {
    pub fn sample<T: Real>(
        &self,
        max_len: usize,
        embed_dim: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> DropoutMasks<T> {
        DropoutMasks {
            input_rows: [
                sample_mask(max_len, self.input_rows, rng),
                sample_mask(max_len, self.input_rows, rng),
            ],
            embedding: sample_mask(max_len * embed_dim, self.embedding, rng),
            recurrent: [
                sample_mask(hidden, self.recurrent, rng),
                sample_mask(hidden, self.recurrent, rng),
            ],
            dense: sample_mask(2 * hidden, self.dense, rng),
        }
    }
}

#[derive(Debug, Clone)]
struct StepCache<T> {
    /// Input after dropout; `None` when all-zero.
    x: Option<Vec<T>>,
    /// `h_prev` after recurrent dropout.
    h_in: Vec<T>,
    c_prev: Vec<T>,
    /// Activated gates `i | f | g | o`.
    gates: Vec<T>,
    tanh_c: Vec<T>,
}

#[derive(Debug, Clone)]
struct DirectionCache<T> {
    steps: Vec<StepCache<T>>,
    h_final: Vec<T>,
}

/// Everything `backward` needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    max_len: usize,
    directions: [DirectionCache<T>; 2],
    /// The concatenated final states after dense dropout.
    features: Vec<T>,
    masks: DropoutMasks<T>,
    pub score: T,
}

fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// One LSTM step. Returns `(h_t, c_t)`.
pub fn lstm_cell_forward<T: Real>(
    p: &DirectionParams<T>,
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
) -> (Vec<T>, Vec<T>) {
    let hidden = h_prev.len();
    let gates = gate_activations(p, Some(x), h_prev, hidden, x.len());
    let (c, tanh_c) = cell_update(&gates, c_prev, hidden);
    let h = (0..hidden).map(|k| gates[3 * hidden + k] * tanh_c[k]).collect();
    (h, c)
}

fn gate_activations<T: Real>(
    p: &DirectionParams<T>,
    x: Option<&[T]>,
    h_in: &[T],
    hidden: usize,
    embed_dim: usize,
) -> Vec<T> {
    let mut z = p.b.clone();
    for (r, zr) in z.iter_mut().enumerate() {
        let mut acc = *zr;
        if let Some(x) = x {
            let wrow = &p.w[r * embed_dim..(r + 1) * embed_dim];
            for (&wv, &xv) in wrow.iter().zip(x) {
                acc = acc + wv * xv;
            }
        }
        let urow = &p.u[r * hidden..(r + 1) * hidden];
        for (&uv, &hv) in urow.iter().zip(h_in) {
            acc = acc + uv * hv;
        }
        *zr = acc;
    }
    for (r, zr) in z.iter_mut().enumerate() {
        *zr = if (2 * hidden..3 * hidden).contains(&r) {
            zr.tanh()
        } else {
            sigmoid(*zr)
        };
    }
    z
}

fn cell_update<T: Real>(gates: &[T], c_prev: &[T], hidden: usize) -> (Vec<T>, Vec<T>) {
    let c: Vec<T> = (0..hidden)
        .map(|k| gates[hidden + k] * c_prev[k] + gates[k] * gates[2 * hidden + k])
        .collect();
    let tanh_c = c.iter().map(|v| v.tanh()).collect();
    (c, tanh_c)
}

fn direction_input<T: Real>(
    seq: &PaddedSequence<T>,
    t: usize,
    row_mask: Option<&[T]>,
    embedding_mask: Option<&[T]>,
) -> Option<Vec<T>> {
    let row = seq.row(t);
    let keep = row_mask.map_or(T::one(), |m| m[t]);
    if keep == T::zero() || row.iter().all(|v| *v == T::zero()) {
        return None;
    }
    let x: Vec<T> = match embedding_mask {
        Some(m) => row
            .iter()
            .zip(&m[t * seq.dim..(t + 1) * seq.dim])
            .map(|(&v, &mk)| v * mk * keep)
            .collect(),
        None => row.iter().map(|&v| v * keep).collect(),
    };
    Some(x)
}

fn run_direction<T: Real>(
    p: &DirectionParams<T>,
    seq: &PaddedSequence<T>,
    reverse: bool,
    row_mask: Option<&[T]>,
    embedding_mask: Option<&[T]>,
    rec_mask: Option<&[T]>,
    hidden: usize,
) -> DirectionCache<T> {
    let l = seq.max_len;
    let mut h = vec![T::zero(); hidden];
    let mut c = vec![T::zero(); hidden];
    let mut steps = Vec::with_capacity(l);
    for s in 0..l {
        let t = if reverse { l - 1 - s } else { s };
        let x = direction_input(seq, t, row_mask, embedding_mask);
        let h_in: Vec<T> = match rec_mask {
            Some(m) => h.iter().zip(m).map(|(&a, &b)| a * b).collect(),
            None => h.clone(),
        };
        let gates = gate_activations(p, x.as_deref(), &h_in, hidden, seq.dim);
        let (c_next, tanh_c) = cell_update(&gates, &c, hidden);
        h = (0..hidden).map(|k| gates[3 * hidden + k] * tanh_c[k]).collect();
        let c_prev = std::mem::replace(&mut c, c_next);
        steps.push(StepCache {
            x,
            h_in,
            c_prev,
            gates,
            tanh_c,
        });
    }
    DirectionCache { steps, h_final: h }
}

/// Runs both directions and the output unit.
pub fn forward<T: Real>(
    params: &Params<T>,
    seq: &PaddedSequence<T>,
    masks: DropoutMasks<T>,
) -> Result<ForwardCache<T>> {
    if seq.dim != params.embed_dim {
        return Err(Error::DimensionMismatch {
            expected: params.embed_dim,
            found: seq.dim,
        });
    }
    let hidden = params.hidden;
    let dirs = [&params.forward, &params.backward];
    let directions = [0, 1].map(|d| {
        run_direction(
            dirs[d],
            seq,
            d == 1,
            masks.input_rows[d].as_deref(),
            masks.embedding.as_deref(),
            masks.recurrent[d].as_deref(),
            hidden,
        )
    });
    let mut features: Vec<T> = directions[0]
        .h_final
        .iter()
        .chain(&directions[1].h_final)
        .copied()
        .collect();
    if let Some(m) = &masks.dense {
        for (f, &k) in features.iter_mut().zip(m) {
            *f = *f * k;
        }
    }
    let score = features
        .iter()
        .zip(&params.dense_w)
        .fold(params.dense_b[0], |acc, (&f, &w)| acc + f * w);
    Ok(ForwardCache {
        max_len: seq.max_len,
        directions,
        features,
        masks,
        score,
    })
}

/// Inference-mode score (no dropout).
pub fn predict<T: Real>(params: &Params<T>, seq: &PaddedSequence<T>) -> Result<T> {
    forward(params, seq, DropoutMasks::default()).map(|c| c.score)
}

fn backward_direction<T: Real>(
    p: &DirectionParams<T>,
    g: &mut DirectionParams<T>,
    cache: &DirectionCache<T>,
    rec_mask: Option<&[T]>,
    dh_final: &[T],
    hidden: usize,
    embed_dim: usize,
) {
    let mut dh = dh_final.to_vec();
    let mut dc = vec![T::zero(); hidden];
    let mut dz = vec![T::zero(); GATES * hidden];
    let one = T::one();
    for step in cache.steps.iter().rev() {
        let gates = &step.gates;
        for k in 0..hidden {
            let (i, f, gg, o) = (
                gates[k],
                gates[hidden + k],
                gates[2 * hidden + k],
                gates[3 * hidden + k],
            );
            let tc = step.tanh_c[k];
            let d_o = dh[k] * tc;
            dc[k] = dc[k] + dh[k] * o * (one - tc * tc);
            let d_i = dc[k] * gg;
            let d_g = dc[k] * i;
            let d_f = dc[k] * step.c_prev[k];
            dz[k] = d_i * i * (one - i);
            dz[hidden + k] = d_f * f * (one - f);
            dz[2 * hidden + k] = d_g * (one - gg * gg);
            dz[3 * hidden + k] = d_o * o * (one - o);
            dc[k] = dc[k] * f;
        }
        for (r, &dzr) in dz.iter().enumerate() {
            g.b[r] = g.b[r] + dzr;
            if let Some(x) = &step.x {
                let grow = &mut g.w[r * embed_dim..(r + 1) * embed_dim];
                for (gw, &xv) in grow.iter_mut().zip(x) {
                    *gw = *gw + dzr * xv;
                }
            }
            let grow = &mut g.u[r * hidden..(r + 1) * hidden];
            for (gu, &hv) in grow.iter_mut().zip(&step.h_in) {
                *gu = *gu + dzr * hv;
            }
        }
        // dh_prev = (U^T dz) * mask
        for (k, dhk) in dh.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (r, &dzr) in dz.iter().enumerate() {
                acc = acc + p.u[r * hidden + k] * dzr;
            }
            *dhk = match rec_mask {
                Some(m) => acc * m[k],
                None => acc,
            };
        }
    }
}

/// Accumulates into `grads` the gradient of `d_score * score` for the
/// sequence behind `cache`.
pub fn backward_one<T: Real>(
    params: &Params<T>,
    cache: &ForwardCache<T>,
    d_score: T,
    grads: &mut Params<T>,
) {
    let hidden = params.hidden;
    grads.dense_b[0] = grads.dense_b[0] + d_score;
    for (g, &f) in grads.dense_w.iter_mut().zip(&cache.features) {
        *g = *g + d_score * f;
    }
    let mut d_features: Vec<T> = params.dense_w.iter().map(|&w| w * d_score).collect();
    if let Some(m) = &cache.masks.dense {
        for (d, &k) in d_features.iter_mut().zip(m) {
            *d = *d * k;
        }
    }
    backward_direction(
        &params.forward,
        &mut grads.forward,
        &cache.directions[0],
        cache.masks.recurrent[0].as_deref(),
        &d_features[..hidden],
        hidden,
        params.embed_dim,
    );
    backward_direction(
        &params.backward,
        &mut grads.backward,
        &cache.directions[1],
        cache.masks.recurrent[1].as_deref(),
        &d_features[hidden..],
        hidden,
        params.embed_dim,
    );
}

/// Mean squared error.
pub fn mse_loss(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: predictions.len(),
            found: targets.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / predictions.len() as f64)
}

/// Gradient of the batch MSE with respect to every parameter.
pub fn backward<T: Real>(
    params: &Params<T>,
    targets: &[T],
    caches: &[ForwardCache<T>],
) -> Result<Params<T>> {
    if caches.len() != targets.len() {
        return Err(Error::CacheMismatch(format!(
            "{} caches for {} targets",
            caches.len(),
            targets.len()
        )));
    }
    if caches.is_empty() {
        return Err(Error::EmptyBatch);
    }
    for cache in caches {
        if cache.directions[0].h_final.len() != params.hidden
            || cache.features.len() != 2 * params.hidden
        {
            return Err(Error::CacheMismatch("hidden size differs from model".into()));
        }
        if cache.directions[0].steps.len() != cache.max_len {
            return Err(Error::CacheMismatch("truncated cache".into()));
        }
    }
    let scale = T::of(2.0 / caches.len() as f64);
    let mut grads = Params::zeros(params.hidden, params.embed_dim);
    for (cache, &y) in caches.iter().zip(targets) {
        backward_one(params, cache, scale * (cache.score - y), &mut grads);
    }
    Ok(grads)
}
