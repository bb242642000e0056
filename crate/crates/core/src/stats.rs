//! Statistical kernels shared by the selection and benchmarking stages:
//! Pearson correlation, binned mutual information, Mann-Whitney AUC, and
//! sample-distribution summaries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("input vectors have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("input vector is constant; correlation is undefined")]
    ConstantInput,
    #[error("labels contain a single class")]
    SingleClass,
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("need at least 2 bins, got {0}")]
    TooFewBins(usize),
}

/// Distribution summary of a set of AUC samples: mean, sample standard
/// deviation, and the 2.5 / 97.5 percentiles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AucSummary {
    pub mean: f64,
    pub std: f64,
    pub p2_5: f64,
    pub p97_5: f64,
    pub samples: Vec<f64>,
}

/// Pearson correlation coefficient of two equal-length vectors.
///
/// Symmetric and invariant under positive affine transforms of either
/// argument. Errors if either vector is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(StatsError::TooFewSamples { need: 2, got: x.len() });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ConstantInput);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Equal-frequency bin assignment with tie-safe edges.
///
/// Edges are order statistics at positions `n*b/bins`; duplicate edges
/// collapse, so equal values always land in the same bin and the result does
/// not depend on row order. Discrete features with k < bins distinct values
/// keep their k natural levels.
pub fn equal_frequency_bins(x: &[f64], bins: usize) -> Vec<usize> {
    let n = x.len();
    let mut sorted: Vec<f64> = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite feature value"));
    let mut edges: Vec<f64> = Vec::with_capacity(bins - 1);
    for b in 1..bins {
        let k = n * b / bins;
        if k == 0 {
            continue;
        }
        let e = sorted[k - 1];
        if edges.last() != Some(&e) && e < sorted[n - 1] {
            edges.push(e);
        }
    }
    x.iter()
        .map(|&v| edges.iter().take_while(|&&e| v > e).count())
        .collect()
}

/// Plug-in mutual information, in bits, between a real feature and a binary
/// label, over equal-frequency bins of the feature. `0 log 0` terms are
/// dropped.
pub fn mutual_information(x: &[f64], y: &[u8], bins: usize) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if bins < 2 {
        return Err(StatsError::TooFewBins(bins));
    }
    if x.is_empty() || y.iter().all(|&l| l == 0) || y.iter().all(|&l| l != 0) {
        return Err(StatsError::SingleClass);
    }
    let cells = equal_frequency_bins(x, bins);
    let n_bins = cells.iter().max().copied().unwrap_or(0) + 1;
    let mut joint = vec![[0usize; 2]; n_bins];
    for (&c, &l) in cells.iter().zip(y) {
        joint[c][usize::from(l != 0)] += 1;
    }
    let n = x.len() as f64;
    let col: [f64; 2] = [
        joint.iter().map(|r| r[0]).sum::<usize>() as f64 / n,
        joint.iter().map(|r| r[1]).sum::<usize>() as f64 / n,
    ];
    let mut mi = 0.0;
    for row in &joint {
        let p_row = (row[0] + row[1]) as f64 / n;
        for (j, &cnt) in row.iter().enumerate() {
            if cnt > 0 {
                let p = cnt as f64 / n;
                mi += p * (p / (p_row * col[j])).log2();
            }
        }
    }
    // Tiny negative values can appear through rounding alone.
    Ok(mi.max(0.0))
}

/// Area under the ROC curve via the Mann-Whitney statistic: the fraction of
/// (positive, negative) pairs ranked correctly, ties counted half. Computed
/// with average ranks in O(n log n); equals the trapezoidal ROC area.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64, StatsError> {
    if scores.len() != labels.len() {
        return Err(StatsError::LengthMismatch { left: scores.len(), right: labels.len() });
    }
    let n_pos = labels.iter().filter(|&&l| l != 0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(StatsError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].partial_cmp(&scores[j]).expect("non-finite score"));
    // Sum of average ranks (1-based) over positives, tie groups share a rank.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] != 0 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let np = n_pos as f64;
    let u = rank_sum_pos - np * (np + 1.0) / 2.0;
    Ok(u / (np * n_neg as f64))
}

/// Percentile by linear interpolation between order statistics (inclusive
/// scheme: rank `(n-1)*q`).
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&q));
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Mean and sample standard deviation (n-1 denominator).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss = xs.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Summarize a sample of AUC values.
pub fn summarize(samples: &[f64]) -> Result<AucSummary, StatsError> {
    if samples.len() < 2 {
        return Err(StatsError::TooFewSamples { need: 2, got: samples.len() });
    }
    debug_assert!(samples.iter().all(|&s| (0.0..=1.0).contains(&s)));
    let (mean, std) = mean_std(samples);
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(AucSummary {
        mean,
        std,
        p2_5: percentile(&sorted, 0.025),
        p97_5: percentile(&sorted, 0.975),
        samples: samples.to_vec(),
    })
}
