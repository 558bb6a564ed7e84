//! Test-only oracles, independent of the library code paths they check.

#![allow(dead_code)]

use finsent::features::SparseFeatureVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random dense regression fixture: `n` samples, `d` features, targets from a
/// noisy linear model squashed into [-1, 1].
pub fn svr_fixture(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut r = rng(seed);
    let truth: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
        let clean: f64 = x.iter().zip(&truth).map(|(a, b)| a * b).sum();
        let y = (clean + r.gen_range(-0.3..0.3)).tanh();
        xs.push(x);
        ys.push(y);
    }
    (xs, ys)
}

pub fn to_sparse(rows: &[Vec<f64>]) -> Vec<SparseFeatureVector> {
    rows.iter()
        .map(|r| SparseFeatureVector::new(r.iter().copied().enumerate().collect(), r.len()).unwrap())
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn primal(rows: &[Vec<f64>], y: &[f64], w: &[f64], b: f64, c: f64, eps: f64) -> f64 {
    let loss: f64 = rows
        .iter()
        .zip(y)
        .map(|(x, &yi)| ((dot(w, x) + b - yi).abs() - eps).max(0.0))
        .sum();
    0.5 * dot(w, w) + c * loss
}

pub struct OracleSolution {
    pub w: Vec<f64>,
    pub b: f64,
    /// Width of the set of optimal biases for `w`.
    pub b_interval: (f64, f64),
    pub objective: f64,
    pub dual_objective: f64,
}

/// Euclidean projection onto {z in [0, C]^m : sum_i s_i z_i = 0}, by
/// bisection on the multiplier of the equality constraint.
fn project(v: &[f64], s: &[f64], c: f64) -> Vec<f64> {
    let at = |mu: f64| -> f64 {
        v.iter()
            .zip(s)
            .map(|(&vi, &si)| si * (vi - mu * si).clamp(0.0, c))
            .sum()
    };
    let span = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * span {
            break;
        }
    }
    let mu = 0.5 * (lo + hi);
    v.iter()
        .zip(s)
        .map(|(&vi, &si)| (vi - mu * si).clamp(0.0, c))
        .collect()
}

/// Accelerated projected gradient with adaptive restart on the
/// (alpha, alpha*) form of the SVR dual, followed by a brute-force search of
/// the optimal bias over all loss breakpoints.
pub fn svr_oracle(rows: &[Vec<f64>], y: &[f64], c: f64, eps: f64, iters: usize) -> OracleSolution {
    let n = rows.len();
    let d = rows[0].len();
    let k: Vec<Vec<f64>> = rows
        .iter()
        .map(|a| rows.iter().map(|b| dot(a, b)).collect())
        .collect();
    // largest eigenvalue of K by power iteration
    let mut v = vec![1.0; n];
    let mut lambda = 0.0;
    for _ in 0..2000 {
        let kv: Vec<f64> = k.iter().map(|row| dot(row, &v)).collect();
        let norm = dot(&kv, &kv).sqrt();
        if norm == 0.0 {
            break;
        }
        lambda = norm / dot(&v, &v).sqrt();
        v = kv.iter().map(|x| x / norm).collect();
    }
    let step = 1.0 / (2.0 * lambda * 1.05 + 1e-12);
    let s: Vec<f64> = (0..2 * n).map(|i| if i < n { 1.0 } else { -1.0 }).collect();

    let objective = |z: &[f64]| -> f64 {
        let beta: Vec<f64> = (0..n).map(|i| z[i] - z[n + i]).collect();
        let kb: Vec<f64> = k.iter().map(|row| dot(row, &beta)).collect();
        0.5 * dot(&beta, &kb) + eps * z.iter().sum::<f64>() - dot(y, &beta)
    };
    let gradient = |z: &[f64]| -> Vec<f64> {
        let beta: Vec<f64> = (0..n).map(|i| z[i] - z[n + i]).collect();
        let kb: Vec<f64> = k.iter().map(|row| dot(row, &beta)).collect();
        let mut g = vec![0.0; 2 * n];
        for i in 0..n {
            g[i] = kb[i] + eps - y[i];
            g[n + i] = -kb[i] + eps + y[i];
        }
        g
    };

    let mut z = vec![0.0; 2 * n];
    let mut z_prev = z.clone();
    let mut momentum = 1.0f64;
    let mut f_prev = objective(&z);
    let mut still = 0;
    for _ in 0..iters {
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let coef = (momentum - 1.0) / t_next;
        let look: Vec<f64> = z.iter().zip(&z_prev).map(|(a, b)| a + coef * (a - b)).collect();
        let g = gradient(&look);
        let trial: Vec<f64> = look.iter().zip(&g).map(|(a, gi)| a - step * gi).collect();
        let z_next = project(&trial, &s, c);
        let f_next = objective(&z_next);
        if f_next > f_prev {
            // restart momentum
            momentum = 1.0;
            z_prev = z.clone();
            continue;
        }
        let delta = z_next
            .iter()
            .zip(&z)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        z_prev = std::mem::replace(&mut z, z_next);
        f_prev = f_next;
        momentum = t_next;
        still = if delta == 0.0 { still + 1 } else { 0 };
        if still > 50 {
            break;
        }
    }

    let beta: Vec<f64> = (0..n).map(|i| z[i] - z[n + i]).collect();
    let mut w = vec![0.0; d];
    for (bi, row) in beta.iter().zip(rows) {
        for (wj, xj) in w.iter_mut().zip(row) {
            *wj += bi * xj;
        }
    }
    // optimum of a convex piecewise-linear function sits on a breakpoint
    let mut candidates: Vec<f64> = rows
        .iter()
        .zip(y)
        .flat_map(|(x, &yi)| {
            let r = yi - dot(&w, x);
            [r - eps, r + eps]
        })
        .collect();
    candidates.sort_by(f64::total_cmp);
    let values: Vec<f64> = candidates
        .iter()
        .map(|&b| primal(rows, y, &w, b, c, eps))
        .collect();
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * best.abs().max(1.0);
    let optimal: Vec<f64> = candidates
        .iter()
        .zip(&values)
        .filter(|(_, &v)| v <= best + tol)
        .map(|(&b, _)| b)
        .collect();
    let interval = (optimal[0], *optimal.last().unwrap());
    OracleSolution {
        w,
        b: 0.5 * (interval.0 + interval.1),
        b_interval: interval,
        objective: best,
        dual_objective: -objective(&z),
    }
}

/// Central finite-difference derivative of `f` at `x`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}
