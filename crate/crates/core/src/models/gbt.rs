//! Second-order gradient-boosted decision trees for binary classification,
//! built from scratch: logistic loss, exact greedy splits maximizing the
//! regularized gain, and total-gain feature importances.

/// Regularized split gain for second-order boosting:
///
/// `1/2 * [G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - (G_L+G_R)^2/(H_L+H_R+lambda)] - gamma`
///
/// A split is worth taking only when the gain is strictly positive.
pub fn split_gain(g_l: f64, h_l: f64, g_r: f64, h_r: f64, lambda: f64, gamma: f64) -> f64 {
    let parent = g_l + g_r;
    0.5 * (g_l * g_l / (h_l + lambda) + g_r * g_r / (h_r + lambda)
        - parent * parent / (h_l + h_r + lambda))
        - gamma
}

/// Optimal leaf weight given the leaf's gradient statistics.
pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    -g / (h + lambda)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub gamma: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: 3, learning_rate: 0.1, lambda: 1.0, gamma: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

#[derive(Debug, Clone)]
pub struct Tree {
    pub(crate) nodes: Vec<Node>,
}

impl Tree {
    /// Unscaled leaf weight for one sample (routing: `x[feature] < threshold`
    /// goes left).
    fn eval(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] < *threshold { *left } else { *right };
                }
            }
        }
    }
}

/// A fitted boosted ensemble. Raw scores start from log-odds 0 (p = 0.5) and
/// each tree contributes `learning_rate * leaf_weight`.
#[derive(Debug, Clone)]
pub struct GradientBoostedTrees {
    trees: Vec<Tree>,
    importance: Vec<f64>,
    learning_rate: f64,
    n_features: usize,
}

impl GradientBoostedTrees {
    /// Fit on row-major `values` (`n x n_cols`) against binary labels.
    pub fn fit(values: &[f64], n_cols: usize, labels: &[u8], params: &GbtParams) -> Self {
        let n = labels.len();
        assert!(n > 0 && n_cols > 0, "empty training data");
        assert_eq!(values.len(), n * n_cols, "values shape mismatch");
        assert!(labels.iter().all(|&y| y <= 1), "labels must be 0/1");

        let mut raw = vec![0.0f64; n];
        let mut grad = vec![0.0f64; n];
        let mut hess = vec![0.0f64; n];
        let mut trees = Vec::with_capacity(params.n_trees);
        let mut importance = vec![0.0f64; n_cols];
        let all_rows: Vec<usize> = (0..n).collect();

        for _ in 0..params.n_trees {
            for i in 0..n {
                let p = sigmoid(raw[i]);
                grad[i] = p - f64::from(labels[i]);
                hess[i] = p * (1.0 - p);
            }
            let mut builder = TreeBuilder {
                values,
                n_cols,
                grad: &grad,
                hess: &hess,
                params,
                nodes: Vec::new(),
                importance: &mut importance,
            };
            builder.grow(&all_rows, 0);
            let tree = Tree { nodes: builder.nodes };
            for i in 0..n {
                raw[i] += params.learning_rate * tree.eval(&values[i * n_cols..(i + 1) * n_cols]);
            }
            trees.push(tree);
        }
        Self { trees, importance, learning_rate: params.learning_rate, n_features: n_cols }
    }

    /// Additive raw score (log-odds scale).
    pub fn predict_raw(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n_features);
        self.trees.iter().map(|t| self.learning_rate * t.eval(x)).sum()
    }

    /// P(label = 1).
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.predict_raw(x))
    }

    /// Total gain accumulated per feature over every split of every tree.
    pub fn feature_importance(&self) -> &[f64] {
        &self.importance
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    #[cfg(test)]
    pub(crate) fn tree(&self, t: usize) -> &Tree {
        &self.trees[t]
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

struct TreeBuilder<'a> {
    values: &'a [f64],
    n_cols: usize,
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a GbtParams,
    nodes: Vec<Node>,
    importance: &'a mut [f64],
}

impl TreeBuilder<'_> {
    fn cell(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    /// Grow the subtree over `rows`, returning its node index.
    fn grow(&mut self, rows: &[usize], depth: usize) -> usize {
        let g: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = rows.iter().map(|&i| self.hess[i]).sum();
        if depth >= self.params.max_depth || rows.len() < 2 {
            return self.push_leaf(g, h);
        }
        let Some((feature, threshold, gain)) = self.best_split(rows) else {
            return self.push_leaf(g, h);
        };
        let idx = self.nodes.len();
        self.nodes.push(Node::Split { feature, threshold, left: 0, right: 0 });
        self.importance[feature] += gain;
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| self.cell(i, feature) < threshold);
        let left = self.grow(&left_rows, depth + 1);
        let right = self.grow(&right_rows, depth + 1);
        if let Node::Split { left: l, right: r, .. } = &mut self.nodes[idx] {
            *l = left;
            *r = right;
        }
        idx
    }

    fn push_leaf(&mut self, g: f64, h: f64) -> usize {
        self.nodes.push(Node::Leaf { value: leaf_weight(g, h, self.params.lambda) });
        self.nodes.len() - 1
    }

    /// Best (feature, threshold, gain) over all candidate splits, or `None`
    /// when no split has strictly positive gain. Ties keep the earliest
    /// feature and the lowest threshold, so training is deterministic.
    fn best_split(&self, rows: &[usize]) -> Option<(usize, f64, f64)> {
        let g_total: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let h_total: f64 = rows.iter().map(|&i| self.hess[i]).sum();
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order: Vec<usize> = rows.to_vec();
        for feature in 0..self.n_cols {
            order.sort_by(|&a, &b| {
                self.cell(a, feature)
                    .partial_cmp(&self.cell(b, feature))
                    .expect("non-finite feature value")
            });
            let mut g_left = 0.0;
            let mut h_left = 0.0;
            for k in 0..order.len() - 1 {
                g_left += self.grad[order[k]];
                h_left += self.hess[order[k]];
                let lo = self.cell(order[k], feature);
                let hi = self.cell(order[k + 1], feature);
                if lo == hi {
                    continue;
                }
                let gain = split_gain(
                    g_left,
                    h_left,
                    g_total - g_left,
                    h_total - h_left,
                    self.params.lambda,
                    self.params.gamma,
                );
                if gain > 0.0 && best.map_or(true, |(_, _, bg)| gain > bg) {
                    // Guard against the midpoint rounding down onto `lo`,
                    // which would route `lo` to the wrong side.
                    let mid = 0.5 * (lo + hi);
                    let threshold = if mid > lo { mid } else { hi };
                    best = Some((feature, threshold, gain));
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::auc;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn split_gain_zero_gradients_is_minus_gamma() {
        assert_relative_eq!(split_gain(0.0, 0.7, 0.0, 1.3, 1.0, 0.25), -0.25, epsilon = 1e-12);
    }

    #[test]
    fn split_gain_hand_case() {
        // 1/2 * [4/2 + 4/2 - 0/3] - 0 = 2
        assert_relative_eq!(split_gain(2.0, 1.0, -2.0, 1.0, 1.0, 0.0), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn split_gain_identical_children_unregularized_is_zero() {
        // With lambda = 0 the two halves carry exactly the parent's score.
        for (g, h) in [(0.4, 0.1), (-1.3, 2.0), (2.0, 1.0)] {
            assert_relative_eq!(split_gain(g, h, g, h, 0.0, 0.0), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn split_gain_another_hand_case() {
        // 1/2 * [0.09/1.12 + 0.49/1.2 - 0.16/1.32]
        let expect = 0.5 * (0.09 / 1.12 + 0.49 / 1.2 - 0.16 / 1.32);
        assert_relative_eq!(split_gain(0.3, 0.12, -0.7, 0.2, 1.0, 0.0), expect, epsilon = 1e-15);
    }

    #[test]
    fn single_stump_matches_hand_derivation() {
        // x = [1,2,3,4], y = [0,0,1,1]; from p = 0.5: g = +-0.5, h = 0.25.
        // Best split is 2.5 with gain 1/2 * [1/1.5 + 1/1.5] = 2/3 and
        // leaf weights -G/(H+lambda) = -+ 1/1.5 = -+ 2/3; the child splits
        // have negative gain, so the tree stops at depth 1.
        let values = [1.0, 2.0, 3.0, 4.0];
        let labels = [0, 0, 1, 1];
        let params = GbtParams { n_trees: 1, learning_rate: 1.0, ..GbtParams::default() };
        let model = GradientBoostedTrees::fit(&values, 1, &labels, &params);
        let tree = model.tree(0);
        assert_eq!(tree.nodes.len(), 3, "root plus two leaves");
        match tree.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(feature, 0);
                assert_relative_eq!(threshold, 2.5, epsilon = 1e-12);
            }
            _ => panic!("root must be a split"),
        }
        assert_relative_eq!(model.predict_raw(&[1.0]), -2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(model.predict_raw(&[4.0]), 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(model.feature_importance()[0], 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn depth_one_leaves_are_closed_form() {
        // Perfectly separating binary feature, one tree of depth 1, lr = 1:
        // each leaf must carry -G/(H+lambda) for its side.
        let values = [0.0, 0.0, 0.0, 1.0, 1.0];
        let labels = [0, 0, 0, 1, 1];
        let params =
            GbtParams { n_trees: 1, max_depth: 1, learning_rate: 1.0, ..GbtParams::default() };
        let model = GradientBoostedTrees::fit(&values, 1, &labels, &params);
        // left: 3 healthy, G = 1.5, H = 0.75; right: 2 cancer, G = -1.0, H = 0.5
        assert_relative_eq!(model.predict_raw(&[0.0]), -1.5 / 1.75, epsilon = 1e-12);
        assert_relative_eq!(model.predict_raw(&[1.0]), 1.0 / 1.5, epsilon = 1e-12);
    }

    #[test]
    fn learns_xor_and_ignores_constant_feature() {
        // Asymmetric XOR replica (9 points) over features 0 and 1, plus a
        // constant third feature that can never host a split.
        let mut values = Vec::new();
        let mut labels = Vec::new();
        let pts = [
            ([0.0, 0.0], 0),
            ([0.0, 0.0], 0),
            ([1.0, 1.0], 0),
            ([1.0, 1.0], 0),
            ([0.0, 1.0], 1),
            ([0.0, 1.0], 1),
            ([0.0, 1.0], 1),
            ([1.0, 0.0], 1),
            ([1.0, 0.0], 1),
        ];
        for (xy, y) in pts {
            values.extend_from_slice(&[xy[0], xy[1], 7.0]);
            labels.push(y);
        }
        let params = GbtParams {
            n_trees: 40,
            max_depth: 2,
            learning_rate: 0.5,
            ..GbtParams::default()
        };
        let model = GradientBoostedTrees::fit(&values, 3, &labels, &params);
        let scores: Vec<f64> =
            (0..labels.len()).map(|i| model.predict_proba(&values[i * 3..i * 3 + 3])).collect();
        assert_relative_eq!(auc(&scores, &labels).unwrap(), 1.0, epsilon = 1e-12);
        let imp = model.feature_importance();
        assert!(imp[0] > 0.0 && imp[1] > 0.0);
        assert_eq!(imp[2], 0.0, "constant feature must never split");
    }

    #[test]
    fn prohibitive_gamma_yields_constant_model() {
        let values = [1.0, 2.0, 3.0, 4.0];
        let labels = [0, 0, 1, 1];
        let params = GbtParams { n_trees: 5, gamma: 100.0, ..GbtParams::default() };
        let model = GradientBoostedTrees::fit(&values, 1, &labels, &params);
        let p1 = model.predict_proba(&[1.0]);
        let p4 = model.predict_proba(&[4.0]);
        assert_eq!(p1, p4, "no split can clear gamma, so the model is constant");
        assert!(model.feature_importance().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fit_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 80;
        let mut values = Vec::with_capacity(n * 4);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let x: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
            labels.push(u8::from(x[0] + 0.5 * x[1] * x[2] > 0.0));
            values.extend_from_slice(&x);
        }
        let params = GbtParams::default();
        let a = GradientBoostedTrees::fit(&values, 4, &labels, &params);
        let b = GradientBoostedTrees::fit(&values, 4, &labels, &params);
        for i in 0..n {
            let row = &values[i * 4..(i + 1) * 4];
            assert_eq!(a.predict_raw(row).to_bits(), b.predict_raw(row).to_bits());
        }
        assert_eq!(a.feature_importance(), b.feature_importance());
    }

    #[test]
    fn boosting_reduces_training_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 60;
        let mut values = Vec::with_capacity(n * 2);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let x = rng.gen_range(-1.0..1.0f64);
            let z = rng.gen_range(-1.0..1.0f64);
            labels.push(u8::from(x > 0.1 * z));
            values.extend_from_slice(&[x, z]);
        }
        let log_loss = |model: &GradientBoostedTrees| -> f64 {
            (0..n)
                .map(|i| {
                    let p = model.predict_proba(&values[i * 2..i * 2 + 2]).clamp(1e-12, 1.0 - 1e-12);
                    if labels[i] == 1 { -p.ln() } else { -(1.0 - p).ln() }
                })
                .sum::<f64>()
                / n as f64
        };
        let short = GradientBoostedTrees::fit(
            &values,
            2,
            &labels,
            &GbtParams { n_trees: 5, ..GbtParams::default() },
        );
        let long = GradientBoostedTrees::fit(&values, 2, &labels, &GbtParams::default());
        assert!(log_loss(&long) < log_loss(&short));
        assert!(log_loss(&long) < 0.3);
    }
}
