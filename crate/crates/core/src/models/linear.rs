//! Linear classifiers: L2-penalized logistic regression fitted by full-batch
//! gradient descent with backtracking line search, and a per-sample
//! stochastic-gradient log-loss baseline.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gbt::sigmoid;

/// Hyperparameters for penalized logistic regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogisticParams {
    /// L2 penalty on the weights (the bias is not penalized).
    pub l2: f64,
    /// Convergence tolerance on the gradient infinity norm.
    pub tol: f64,
    /// Hard cap on gradient-descent iterations.
    pub max_iters: usize,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self { l2: 1e-4, tol: 1e-8, max_iters: 200_000 }
    }
}

/// Hyperparameters for the stochastic-gradient baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SgdParams {
    /// Constant per-sample learning rate.
    pub learning_rate: f64,
    /// Full passes over the shuffled training set.
    pub epochs: usize,
}

impl Default for SgdParams {
    fn default() -> Self {
        // A deliberately lean online baseline: a handful of passes with a
        // constant step, the classic "plain SGD" reference point.
        Self { learning_rate: 0.02, epochs: 8 }
    }
}

/// A fitted linear decision function `sigmoid(w . x + b)`.
#[derive(Debug, Clone)]
pub struct LinearModel {
    weights: Vec<f64>,
    bias: f64,
}

impl LinearModel {
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.weights.len());
        let z = self.bias + dot(&self.weights, x);
        sigmoid(z)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Numerically stable `ln(1 + exp(z))`.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean log loss plus the L2 weight penalty.
fn objective(values: &[f64], n_cols: usize, labels: &[u8], w: &[f64], b: f64, l2: f64) -> f64 {
    let n = labels.len();
    let mut loss = 0.0;
    for i in 0..n {
        let z = b + dot(w, &values[i * n_cols..(i + 1) * n_cols]);
        loss += softplus(z) - f64::from(labels[i]) * z;
    }
    loss / n as f64 + l2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Maximizes the L2-penalized likelihood by gradient descent with an Armijo
/// backtracking line search, stopping when the gradient infinity norm falls
/// below `params.tol`.
pub fn fit_logistic(
    values: &[f64],
    n_cols: usize,
    labels: &[u8],
    params: &LogisticParams,
) -> LinearModel {
    let n = labels.len();
    let nf = n as f64;
    let mut w = vec![0.0; n_cols];
    let mut b = 0.0;
    let mut grad_w = vec![0.0; n_cols];
    let mut obj = objective(values, n_cols, labels, &w, b, params.l2);
    let mut step = 1.0;

    for _ in 0..params.max_iters {
        grad_w.fill(0.0);
        let mut grad_b = 0.0;
        for i in 0..n {
            let row = &values[i * n_cols..(i + 1) * n_cols];
            let diff = sigmoid(b + dot(&w, row)) - f64::from(labels[i]);
            for (g, &x) in grad_w.iter_mut().zip(row) {
                *g += diff * x;
            }
            grad_b += diff;
        }
        let mut ginf = (grad_b / nf).abs();
        for (g, &wj) in grad_w.iter_mut().zip(&w) {
            *g = *g / nf + 2.0 * params.l2 * wj;
            ginf = ginf.max(g.abs());
        }
        grad_b /= nf;
        if ginf <= params.tol {
            break;
        }
        let gsq = dot(&grad_w, &grad_w) + grad_b * grad_b;
        loop {
            let cand_w: Vec<f64> = w.iter().zip(&grad_w).map(|(wi, gi)| wi - step * gi).collect();
            let cand_b = b - step * grad_b;
            let cand_obj = objective(values, n_cols, labels, &cand_w, cand_b, params.l2);
            if cand_obj <= obj - 0.25 * step * gsq {
                w = cand_w;
                b = cand_b;
                obj = cand_obj;
                step = (step * 2.0).min(1e6);
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                // No descent step improves the objective: numerical optimum.
                return LinearModel { weights: w, bias: b };
            }
        }
    }
    LinearModel { weights: w, bias: b }
}

/// Per-sample stochastic gradient descent on the log loss: a constant
/// learning rate, a fresh shuffle every epoch, and no regularization.
pub fn fit_sgd(
    values: &[f64],
    n_cols: usize,
    labels: &[u8],
    params: &SgdParams,
    rng: &mut ChaCha8Rng,
) -> LinearModel {
    let n = labels.len();
    let mut w = vec![0.0; n_cols];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..params.epochs {
        order.shuffle(rng);
        for &i in &order {
            let row = &values[i * n_cols..(i + 1) * n_cols];
            let diff = sigmoid(b + dot(&w, row)) - f64::from(labels[i]);
            let scale = params.learning_rate * diff;
            for (wj, &x) in w.iter_mut().zip(row) {
                *wj -= scale * x;
            }
            b -= scale;
        }
    }
    LinearModel { weights: w, bias: b }
}
