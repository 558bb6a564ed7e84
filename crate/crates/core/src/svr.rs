//! Linear epsilon-insensitive support vector regression.
//!
//! Solves
//!
//! ```text
//! min_{w,b}  1/2 |w|^2 + C * sum_i max(0, |w.x_i + b - y_i| - eps)
//! ```
//!
//! with an unregularized bias, through its dual in `beta_i = alpha_i - alpha*_i`:
//!
//! ```text
//! max_beta  -1/2 |sum_i beta_i x_i|^2 + sum_i beta_i y_i - eps * sum_i |beta_i|
//! s.t.      -C <= beta_i <= C,   sum_i beta_i = 0
//! ```
//!
//! The equality constraint (from the free bias) rules out single-coordinate
//! moves, so each update moves a pair `(beta_i += t, beta_j -= t)` and solves
//! the resulting one-dimensional piecewise-quadratic problem exactly. Epochs
//! visit every coordinate once in a seeded random order, pairing it with its
//! maximally violating partner. Training stops once the duality gap falls
//! below `tol * max(1, |primal|)`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SparseFeatureVector;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvrConfig {
    #[serde(rename = "C")]
    pub c: f64,
    pub epsilon: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SvrConfig {
    fn default() -> Self {
        SvrConfig {
            c: 0.1,
            epsilon: 0.01,
            tol: 1e-6,
            max_iter: 10_000,
            seed: 0,
        }
    }
}

impl SvrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("C must be positive, got {}", self.c)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// The C and epsilon values searched by the default grid.
pub const C_GRID: [f64; 3] = [0.01, 0.1, 1.0];
pub const EPSILON_GRID: [f64; 3] = [0.001, 0.01, 0.1];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub iterations: usize,
    pub final_objective: f64,
    pub duality_gap: f64,
    pub converged: bool,
    /// Primal objective at the end of every epoch.
    pub objective_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub config: SvrConfig,
    pub summary: TrainingSummary,
    /// Dual coefficients `beta_i` of the training samples; empty for loaded
    /// models.
    pub dual_coef: Vec<f64>,
}

pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    config: SvrConfig,
    bias: f64,
    weights: Vec<f64>,
}

impl SvrModel {
    pub fn width(&self) -> usize {
        self.weights.len()
    }

    pub fn predict(&self, x: &SparseFeatureVector) -> Result<f64> {
        if x.width != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                found: x.width,
            });
        }
        Ok(x.dot_dense(&self.weights) + self.bias)
    }

    pub fn predict_clamped(&self, x: &SparseFeatureVector) -> Result<f64> {
        self.predict(x).map(|p| p.clamp(-1.0, 1.0))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFile {
            version: MODEL_VERSION,
            config: self.config,
            bias: self.bias,
            weights: self.weights.clone(),
        })
        .expect("model serializes")
    }

    pub fn from_json(raw: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(raw)
            .map_err(|e| Error::VocabularyMismatch(format!("bad SVR model file: {e}")))?;
        if file.version != MODEL_VERSION {
            return Err(Error::VocabularyMismatch(format!(
                "unsupported SVR model version {}",
                file.version
            )));
        }
        if !file.bias.is_finite() || file.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("SVR model file"));
        }
        Ok(SvrModel {
            weights: file.weights,
            bias: file.bias,
            config: file.config,
            summary: TrainingSummary::default(),
            dual_coef: Vec::new(),
        })
    }
}

pub fn predict_svr(model: &SvrModel, x: &SparseFeatureVector) -> Result<f64> {
    model.predict(x)
}

/// Primal objective of `model` (at its own bias) on `(x, y)`.
pub fn svr_objective(model: &SvrModel, x: &[SparseFeatureVector], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let mut loss = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let r = model.predict(xi)? - yi;
        loss += (r.abs() - model.config.epsilon).max(0.0);
    }
    let reg = 0.5 * model.weights.iter().map(|w| w * w).sum::<f64>();
    Ok(reg + model.config.c * loss)
}

struct Problem<'a> {
    x: &'a [SparseFeatureVector],
    y: &'a [f64],
    /// Column-major copy of `x`: for each feature, the (row, value) pairs.
    columns: Vec<Vec<(usize, f64)>>,
    sq_norms: Vec<f64>,
    c: f64,
    eps: f64,
}

struct State {
    beta: Vec<f64>,
    w: Vec<f64>,
    /// `y_i - w.x_i`, the gradient of the smooth part of the dual.
    grad: Vec<f64>,
}

const VIOLATION_FLOOR: f64 = 1e-12;

impl Problem<'_> {
    /// Slope of the dual when raising `beta_i`; `None` when at the upper bound.
    fn up(&self, s: &State, i: usize) -> Option<f64> {
        let b = s.beta[i];
        (b < self.c).then(|| if b >= 0.0 { s.grad[i] - self.eps } else { s.grad[i] + self.eps })
    }

    /// Negated slope of the dual when lowering `beta_i`; `None` at the lower
    /// bound.
    fn low(&self, s: &State, i: usize) -> Option<f64> {
        let b = s.beta[i];
        (b > -self.c).then(|| if b <= 0.0 { s.grad[i] + self.eps } else { s.grad[i] - self.eps })
    }

    fn kkt_bracket(&self, s: &State) -> (f64, f64) {
        let n = self.y.len();
        let max_up = (0..n)
            .filter_map(|i| self.up(s, i))
            .fold(f64::NEG_INFINITY, f64::max);
        let min_low = (0..n)
            .filter_map(|i| self.low(s, i))
            .fold(f64::INFINITY, f64::min);
        (max_up, min_low)
    }

    /// Best partner for `i`: returns (up index, down index, violation).
    fn pick_pair(&self, s: &State, i: usize) -> Option<(usize, usize, f64)> {
        let n = self.y.len();
        let mut best: Option<(usize, usize, f64)> = None;
        let mut consider = |up: usize, down: usize, v: f64| {
            if v > VIOLATION_FLOOR && best.is_none_or(|b| v > b.2) {
                best = Some((up, down, v));
            }
        };
        if let Some(ui) = self.up(s, i) {
            let partner = (0..n)
                .filter(|&j| j != i)
                .filter_map(|j| self.low(s, j).map(|l| (j, l)))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((j, lj)) = partner {
                consider(i, j, ui - lj);
            }
        }
        if let Some(li) = self.low(s, i) {
            let partner = (0..n)
                .filter(|&j| j != i)
                .filter_map(|j| self.up(s, j).map(|u| (j, u)))
                .max_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((j, uj)) = partner {
                consider(j, i, uj - li);
            }
        }
        best
    }

    /// Exact maximizer of the dual along `beta_up += t, beta_down -= t`.
    fn step_length(&self, s: &State, up: usize, down: usize) -> f64 {
        let (bu, bd) = (s.beta[up], s.beta[down]);
        let t_max = (self.c - bu).min(bd + self.c);
        if t_max <= 0.0 {
            return 0.0;
        }
        let curvature = (self.sq_norms[up] + self.sq_norms[down]
            - 2.0 * self.x[up].dot(&self.x[down]))
        .max(0.0);
        let mut knots = vec![0.0];
        if bu < 0.0 && -bu < t_max {
            knots.push(-bu);
        }
        if bd > 0.0 && bd < t_max {
            knots.push(bd);
        }
        knots.push(t_max);
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let g_diff = s.grad[up] - s.grad[down];
        for piece in knots.windows(2) {
            let (a, b) = (piece[0], piece[1]);
            let mid = 0.5 * (a + b);
            let s_up = (bu + mid).signum();
            let s_down = (bd - mid).signum();
            let slope0 = g_diff - self.eps * s_up + self.eps * s_down;
            if curvature > 1e-300 {
                let t_star = slope0 / curvature;
                if t_star <= a {
                    return a;
                }
                if t_star < b {
                    return t_star;
                }
            } else if slope0 <= 0.0 {
                return a;
            }
        }
        t_max
    }

    fn apply_step(&self, s: &mut State, up: usize, down: usize, t: f64) {
        let room_up = self.c - s.beta[up];
        let room_down = s.beta[down] + self.c;
        // land exactly on the bound that limited the step
        let t = if t >= room_up.min(room_down) {
            if room_up <= room_down {
                s.beta[down] -= room_up;
                s.beta[up] = self.c;
                room_up
            } else {
                s.beta[up] += room_down;
                s.beta[down] = -self.c;
                room_down
            }
        } else {
            s.beta[up] += t;
            s.beta[down] -= t;
            t
        };
        for (row, sign) in [(up, t), (down, -t)] {
            for &(j, v) in &self.x[row].entries {
                s.w[j] += sign * v;
                for &(k, xkj) in &self.columns[j] {
                    s.grad[k] -= sign * v * xkj;
                }
            }
        }
    }

    fn refresh_gradient(&self, s: &mut State) {
        for (k, g) in s.grad.iter_mut().enumerate() {
            *g = self.y[k] - self.x[k].dot_dense(&s.w);
        }
    }

    fn dual_objective(&self, s: &State) -> f64 {
        let ww: f64 = s.w.iter().map(|v| v * v).sum();
        let by: f64 = s.beta.iter().zip(self.y).map(|(b, y)| b * y).sum();
        let abs: f64 = s.beta.iter().map(|b| b.abs()).sum();
        -0.5 * ww + by - self.eps * abs
    }

    /// The interval of biases minimizing the primal for the current `w`.
    fn optimal_bias_interval(&self, s: &State) -> (f64, f64) {
        let n = self.y.len();
        let mut knots: Vec<f64> = s
            .grad
            .iter()
            .flat_map(|&g| [g - self.eps, g + self.eps])
            .collect();
        knots.sort_by(f64::total_cmp);
        (knots[n - 1], knots[n])
    }

    fn choose_bias(&self, s: &State) -> f64 {
        let (lo, hi) = self.optimal_bias_interval(s);
        let (k_lo, k_hi) = self.kkt_bracket(s);
        let (a, b) = (lo.max(k_lo), hi.min(k_hi));
        if a <= b {
            0.5 * (a + b)
        } else {
            0.5 * (lo + hi)
        }
    }

    fn primal_objective(&self, s: &State, bias: f64) -> f64 {
        let ww: f64 = s.w.iter().map(|v| v * v).sum();
        let loss: f64 = s
            .grad
            .iter()
            .map(|&g| ((bias - g).abs() - self.eps).max(0.0))
            .sum();
        0.5 * ww + self.c * loss
    }
}

/// Trains a linear epsilon-SVR. Deterministic for a fixed `cfg.seed`.
pub fn train_svr(x: &[SparseFeatureVector], y: &[f64], cfg: &SvrConfig) -> Result<SvrModel> {
    cfg.validate()?;
    if x.is_empty() {
        return Err(Error::EmptyDataset("SVR training set"));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let width = x[0].width;
    if let Some(bad) = x.iter().find(|v| v.width != width) {
        return Err(Error::DimensionMismatch {
            expected: width,
            found: bad.width,
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("SVR targets"));
    }
    if x.iter().flat_map(|v| &v.entries).any(|e| !e.1.is_finite()) {
        return Err(Error::NonFinite("SVR features"));
    }

    let n = x.len();
    let mut columns = vec![Vec::new(); width];
    for (row, v) in x.iter().enumerate() {
        for &(j, val) in &v.entries {
            columns[j].push((row, val));
        }
    }
    let problem = Problem {
        x,
        y,
        columns,
        sq_norms: x.iter().map(SparseFeatureVector::squared_norm).collect(),
        c: cfg.c,
        eps: cfg.epsilon,
    };
    let mut state = State {
        beta: vec![0.0; n],
        w: vec![0.0; width],
        grad: y.to_vec(),
    };

    let mut rng = seed::rng(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut summary = TrainingSummary::default();
    for epoch in 1..=cfg.max_iter {
        order.shuffle(&mut rng);
        let mut moved = false;
        for &i in &order {
            if let Some((up, down, _)) = problem.pick_pair(&state, i) {
                let t = problem.step_length(&state, up, down);
                if t > 0.0 {
                    problem.apply_step(&mut state, up, down, t);
                    moved = true;
                }
            }
        }
        problem.refresh_gradient(&mut state);
        let bias = problem.choose_bias(&state);
        let primal = problem.primal_objective(&state, bias);
        let gap = primal - problem.dual_objective(&state);
        summary.iterations = epoch;
        summary.final_objective = primal;
        summary.duality_gap = gap;
        summary.objective_history.push(primal);
        if gap <= cfg.tol * primal.abs().max(1.0) || !moved {
            summary.converged = true;
            break;
        }
    }

    let bias = problem.choose_bias(&state);
    if !bias.is_finite() || state.w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("SVR solution"));
    }
    Ok(SvrModel {
        weights: state.w,
        bias,
        config: *cfg,
        summary,
        dual_coef: state.beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(rows: &[&[f64]]) -> Vec<SparseFeatureVector> {
        rows.iter()
            .map(|r| {
                SparseFeatureVector::new(r.iter().copied().enumerate().collect(), r.len()).unwrap()
            })
            .collect()
    }

    fn cfg(c: f64, epsilon: f64) -> SvrConfig {
        SvrConfig {
            c,
            epsilon,
            tol: 1e-10,
            ..SvrConfig::default()
        }
    }

    #[test]
    fn interpolating_line() {
        let x = dense(&[&[1.0], &[2.0]]);
        let m = train_svr(&x, &[1.0, 2.0], &cfg(10.0, 0.0)).unwrap();
        assert!((m.weights[0] - 1.0).abs() < 1e-3, "{:?}", m.weights);
        assert!(m.bias.abs() < 1e-3, "{}", m.bias);
        // any other line pays at least C*|1 - w| in loss, so 0.5 is optimal
        assert!((m.summary.final_objective - 0.5).abs() < 1e-6);
    }

    #[test]
    fn constant_targets() {
        let x = dense(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0], &[0.5, 2.0]]);
        let m = train_svr(&x, &[0.3; 4], &cfg(1.0, 0.01)).unwrap();
        assert!(m.weights.iter().all(|w| w.abs() < 1e-9));
        assert!((m.bias - 0.3).abs() < 1e-9);
    }

    #[test]
    fn single_sample() {
        let x = dense(&[&[1.0]]);
        let m = train_svr(&x, &[0.7], &SvrConfig::default()).unwrap();
        assert_eq!(m.weights, [0.0]);
        assert!((m.bias - 0.7).abs() < 1e-12);
    }

    #[test]
    fn predict_examples() {
        let model = SvrModel {
            weights: vec![1.0, 2.0],
            bias: 0.5,
            config: SvrConfig::default(),
            summary: TrainingSummary::default(),
            dual_coef: vec![],
        };
        assert_eq!(model.predict(&SparseFeatureVector::zeros(2)).unwrap(), 0.5);
        let x = SparseFeatureVector::new(vec![(0, 1.0), (1, 1.0)], 2).unwrap();
        assert_eq!(predict_svr(&model, &x).unwrap(), 3.5);
        let big = SparseFeatureVector::new(vec![(0, 1.2)], 2).unwrap();
        assert!((model.predict(&big).unwrap() - 1.7).abs() < 1e-12);
        assert_eq!(model.predict_clamped(&big).unwrap(), 1.0);
        assert!(model.predict(&SparseFeatureVector::zeros(3)).is_err());
    }

    #[test]
    fn objective_examples() {
        let zero = |c, epsilon| SvrModel {
            weights: vec![0.0],
            bias: 0.0,
            config: SvrConfig {
                c,
                epsilon,
                ..SvrConfig::default()
            },
            summary: TrainingSummary::default(),
            dual_coef: vec![],
        };
        let x = dense(&[&[1.0], &[2.0]]);
        assert_eq!(svr_objective(&zero(1.0, 0.1), &x, &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(svr_objective(&zero(1.0, 0.0), &x[..1], &[1.0]).unwrap(), 1.0);
        assert!(svr_objective(&zero(1.0, 0.0), &x, &[1.0]).is_err());
    }

    #[test]
    fn input_validation() {
        let x = dense(&[&[1.0], &[2.0]]);
        assert!(matches!(
            train_svr(&x, &[1.0], &SvrConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            train_svr(&x, &[1.0, f64::NAN], &SvrConfig::default()),
            Err(Error::NonFinite(_))
        ));
        let mixed = vec![SparseFeatureVector::zeros(1), SparseFeatureVector::zeros(2)];
        assert!(train_svr(&mixed, &[0.0, 0.0], &SvrConfig::default()).is_err());
        assert!(train_svr(&[], &[], &SvrConfig::default()).is_err());
        assert!(train_svr(&x, &[0.0, 0.0], &cfg(0.0, 0.1)).is_err());
    }

    #[test]
    fn model_json_round_trip() {
        let x = dense(&[&[1.0, 0.5], &[2.0, -1.0], &[0.0, 1.0]]);
        let m = train_svr(&x, &[0.1, 0.5, -0.2], &SvrConfig::default()).unwrap();
        let back = SvrModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back.weights, m.weights);
        assert_eq!(back.bias, m.bias);
        assert_eq!(back.config, m.config);
    }
}
