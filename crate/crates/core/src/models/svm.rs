//! Soft-margin support vector machine with an RBF kernel, trained by
//! sequential minimal optimization (SMO). Scores are raw decision values
//! (signed margins), not calibrated probabilities.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// KKT violation tolerance used by the optimizer.
const KKT_TOL: f64 = 1e-3;
/// Minimum multiplier step treated as progress.
const MIN_STEP: f64 = 1e-7;
/// Consecutive clean sweeps required before the optimizer stops.
const CLEAN_SWEEPS: usize = 3;

/// Hyperparameters for the soft-margin SVM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmParams {
    /// Soft-margin penalty C.
    pub c: f64,
    /// Hard cap on optimizer sweeps over the training set.
    pub max_sweeps: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { c: 1.0, max_sweeps: 200 }
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    (-gamma * squared_distance(a, b)).exp()
}

/// Median pairwise Euclidean distance between rows (even counts average the
/// two middle order statistics). The kernel bandwidth heuristic sets
/// `k(a, b) = exp(-||a-b||^2 / (2 m^2))` with `m` this median.
pub fn median_pairwise_distance(values: &[f64], n_cols: usize) -> f64 {
    let n = values.len() / n_cols;
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let a = &values[i * n_cols..(i + 1) * n_cols];
            let b = &values[j * n_cols..(j + 1) * n_cols];
            dists.push(squared_distance(a, b).sqrt());
        }
    }
    if dists.is_empty() {
        return 0.0;
    }
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        0.5 * (dists[mid - 1] + dists[mid])
    }
}

/// A fitted RBF SVM: support rows, their signed multipliers, and the bias.
#[derive(Debug, Clone)]
pub struct SvmModel {
    support: Vec<f64>,
    n_support: usize,
    coef: Vec<f64>,
    bias: f64,
    gamma: f64,
    n_cols: usize,
}

impl SvmModel {
    /// Trains with simplified SMO: sweep the KKT-violating multipliers,
    /// pairing each with a random partner, until `CLEAN_SWEEPS` consecutive
    /// sweeps change nothing or the sweep cap is reached.
    pub fn fit(
        values: &[f64],
        n_cols: usize,
        labels: &[u8],
        params: &SvmParams,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let n = labels.len();
        let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let median = median_pairwise_distance(values, n_cols);
        let gamma = if median > 0.0 { 1.0 / (2.0 * median * median) } else { 1.0 };

        let row = |i: usize| &values[i * n_cols..(i + 1) * n_cols];
        let mut kern = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let k = rbf(row(i), row(j), gamma);
                kern[i * n + j] = k;
                kern[j * n + i] = k;
            }
        }

        let c = params.c;
        let mut alpha = vec![0.0; n];
        let mut bias = 0.0;
        let decision = |alpha: &[f64], bias: f64, i: usize| -> f64 {
            let mut s = bias;
            for j in 0..n {
                if alpha[j] > 0.0 {
                    s += alpha[j] * y[j] * kern[i * n + j];
                }
            }
            s
        };

        let mut clean = 0;
        let mut sweeps = 0;
        while clean < CLEAN_SWEEPS && sweeps < params.max_sweeps {
            sweeps += 1;
            let mut changed = 0;
            for i in 0..n {
                let e_i = decision(&alpha, bias, i) - y[i];
                let r = y[i] * e_i;
                if !((r < -KKT_TOL && alpha[i] < c) || (r > KKT_TOL && alpha[i] > 0.0)) {
                    continue;
                }
                let mut j = rng.gen_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                let e_j = decision(&alpha, bias, j) - y[j];
                let (ai_old, aj_old) = (alpha[i], alpha[j]);
                let (lo, hi) = if y[i] * y[j] < 0.0 {
                    ((aj_old - ai_old).max(0.0), (c + aj_old - ai_old).min(c))
                } else {
                    ((ai_old + aj_old - c).max(0.0), (ai_old + aj_old).min(c))
                };
                if hi - lo < MIN_STEP {
                    continue;
                }
                let eta = 2.0 * kern[i * n + j] - kern[i * n + i] - kern[j * n + j];
                if eta >= 0.0 {
                    continue;
                }
                let aj = (aj_old - y[j] * (e_i - e_j) / eta).clamp(lo, hi);
                if (aj - aj_old).abs() < MIN_STEP {
                    continue;
                }
                let ai = ai_old + y[i] * y[j] * (aj_old - aj);
                let b1 = bias
                    - e_i
                    - y[i] * (ai - ai_old) * kern[i * n + i]
                    - y[j] * (aj - aj_old) * kern[i * n + j];
                let b2 = bias
                    - e_j
                    - y[i] * (ai - ai_old) * kern[i * n + j]
                    - y[j] * (aj - aj_old) * kern[j * n + j];
                alpha[i] = ai;
                alpha[j] = aj;
                bias = if ai > 0.0 && ai < c {
                    b1
                } else if aj > 0.0 && aj < c {
                    b2
                } else {
                    0.5 * (b1 + b2)
                };
                changed += 1;
            }
            if changed == 0 {
                clean += 1;
            } else {
                clean = 0;
            }
        }

        let mut support = Vec::new();
        let mut coef = Vec::new();
        for i in 0..n {
            if alpha[i] > 0.0 {
                support.extend_from_slice(row(i));
                coef.push(alpha[i] * y[i]);
            }
        }
        let n_support = coef.len();
        Self { support, n_support, coef, bias, gamma, n_cols }
    }

    /// Raw decision value; positive favors the cancer class.
    pub fn decision_value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n_cols);
        let mut s = self.bias;
        for k in 0..self.n_support {
            let sv = &self.support[k * self.n_cols..(k + 1) * self.n_cols];
            s += self.coef[k] * rbf(x, sv, self.gamma);
        }
        s
    }

    /// Number of support vectors retained after training.
    pub fn n_support(&self) -> usize {
        self.n_support
    }
}
