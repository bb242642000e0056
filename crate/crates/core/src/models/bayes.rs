//! Gaussian naive Bayes: per-class, per-feature normal densities with a
//! variance floor, combined with class priors into a posterior score.

/// Lower bound applied to every per-class feature variance.
pub const VARIANCE_FLOOR: f64 = 1e-9;

/// Per-class Gaussian feature model with empirical class priors.
#[derive(Debug, Clone)]
pub struct GaussianNb {
    log_prior: [f64; 2],
    means: [Vec<f64>; 2],
    vars: [Vec<f64>; 2],
}

impl GaussianNb {
    /// Fits per-class means and maximum-likelihood variances (divided by the
    /// class count), flooring each variance at [`VARIANCE_FLOOR`].
    pub fn fit(values: &[f64], n_cols: usize, labels: &[u8]) -> Self {
        let n = labels.len();
        let mut counts = [0usize; 2];
        let mut means = [vec![0.0; n_cols], vec![0.0; n_cols]];
        for i in 0..n {
            let c = usize::from(labels[i]);
            counts[c] += 1;
            for j in 0..n_cols {
                means[c][j] += values[i * n_cols + j];
            }
        }
        for c in 0..2 {
            for m in &mut means[c] {
                *m /= counts[c] as f64;
            }
        }
        let mut vars = [vec![0.0; n_cols], vec![0.0; n_cols]];
        for i in 0..n {
            let c = usize::from(labels[i]);
            for j in 0..n_cols {
                let d = values[i * n_cols + j] - means[c][j];
                vars[c][j] += d * d;
            }
        }
        for c in 0..2 {
            for v in &mut vars[c] {
                *v = (*v / counts[c] as f64).max(VARIANCE_FLOOR);
            }
        }
        let log_prior =
            [(counts[0] as f64 / n as f64).ln(), (counts[1] as f64 / n as f64).ln()];
        Self { log_prior, means, vars }
    }

    /// Posterior probability of the cancer class, computed in log space.
    pub fn posterior(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.means[0].len());
        let mut log_joint = [0.0; 2];
        for c in 0..2 {
            let mut s = self.log_prior[c];
            for (j, &xj) in x.iter().enumerate() {
                let v = self.vars[c][j];
                let d = xj - self.means[c][j];
                s -= 0.5 * (std::f64::consts::TAU * v).ln() + d * d / (2.0 * v);
            }
            log_joint[c] = s;
        }
        1.0 / (1.0 + (log_joint[0] - log_joint[1]).exp())
    }
}
