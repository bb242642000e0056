//! Bagged CART random forest: Gini splits, per-node feature subsampling of
//! floor(sqrt(p)) columns, and mean leaf class fractions as probabilities.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Hyperparameters for the bagged-tree ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestParams {
    /// Number of bootstrap trees.
    pub trees: usize,
    /// Maximum tree depth (a root-only tree has depth 0).
    pub max_depth: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { trees: 200, max_depth: 8 }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Split { feature: usize, threshold: f64, left: Box<Node>, right: Box<Node> },
    Leaf { value: f64 },
}

impl Node {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Node::Leaf { value } => *value,
            Node::Split { feature, threshold, left, right } => {
                if x[*feature] < *threshold {
                    left.eval(x)
                } else {
                    right.eval(x)
                }
            }
        }
    }
}

fn gini(pos: usize, total: usize) -> f64 {
    let p = pos as f64 / total as f64;
    let q = 1.0 - p;
    1.0 - p * p - q * q
}

struct TreeBuilder<'a> {
    values: &'a [f64],
    n_cols: usize,
    labels: &'a [u8],
    max_depth: usize,
    m_features: usize,
}

impl TreeBuilder<'_> {
    fn cell(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    fn grow(&self, rows: &[usize], depth: usize, rng: &mut ChaCha8Rng) -> Node {
        let n = rows.len();
        let n_pos = rows.iter().filter(|&&r| self.labels[r] == 1).count();
        let leaf_value = n_pos as f64 / n as f64;
        if depth >= self.max_depth || n < 2 || n_pos == 0 || n_pos == n {
            return Node::Leaf { value: leaf_value };
        }

        let mut feats = rand::seq::index::sample(rng, self.n_cols, self.m_features).into_vec();
        feats.sort_unstable();

        let parent = gini(n_pos, n);
        let mut best_gain = 0.0;
        let mut best: Option<(usize, f64)> = None;
        let mut col: Vec<(f64, u8)> = Vec::with_capacity(n);
        for &f in &feats {
            col.clear();
            col.extend(rows.iter().map(|&r| (self.cell(r, f), self.labels[r])));
            col.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut pos_left = 0usize;
            for i in 1..n {
                pos_left += usize::from(col[i - 1].1 == 1);
                if col[i].0 == col[i - 1].0 {
                    continue;
                }
                let weighted = (i as f64 * gini(pos_left, i)
                    + (n - i) as f64 * gini(n_pos - pos_left, n - i))
                    / n as f64;
                let gain = parent - weighted;
                if gain > best_gain {
                    best_gain = gain;
                    let lo = col[i - 1].0;
                    let hi = col[i].0;
                    let mid = 0.5 * (lo + hi);
                    best = Some((f, if mid > lo { mid } else { hi }));
                }
            }
        }

        let Some((feature, threshold)) = best else {
            return Node::Leaf { value: leaf_value };
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| self.cell(r, feature) < threshold);
        Node::Split {
            feature,
            threshold,
            left: Box::new(self.grow(&left_rows, depth + 1, rng)),
            right: Box::new(self.grow(&right_rows, depth + 1, rng)),
        }
    }
}

/// A forest of bagged CART trees; scores are mean leaf class-1 fractions.
#[derive(Debug, Clone)]
pub struct RandomForest {
    trees: Vec<Node>,
    n_cols: usize,
}

impl RandomForest {
    /// Fits `params.trees` trees, each on a bootstrap resample of the rows,
    /// sampling floor(sqrt(p)) candidate features (at least one) per node.
    pub fn fit(
        values: &[f64],
        n_cols: usize,
        labels: &[u8],
        params: &ForestParams,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let n = labels.len();
        let m_features = ((n_cols as f64).sqrt().floor() as usize).clamp(1, n_cols);
        let builder = TreeBuilder { values, n_cols, labels, max_depth: params.max_depth, m_features };
        let mut trees = Vec::with_capacity(params.trees);
        for _ in 0..params.trees {
            let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            trees.push(builder.grow(&rows, 0, rng));
        }
        Self { trees, n_cols }
    }

    /// Mean over trees of the leaf class-1 fraction; always in [0, 1].
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n_cols);
        let sum: f64 = self.trees.iter().map(|t| t.eval(x)).sum();
        sum / self.trees.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::stats::auc;

    fn rng() -> ChaCha8Rng {
        stream(7, &[99])
    }

    fn grow_plain(values: &[f64], n_cols: usize, labels: &[u8], m: usize) -> Node {
        let builder =
            TreeBuilder { values, n_cols, labels, max_depth: 8, m_features: m };
        let rows: Vec<usize> = (0..labels.len()).collect();
        builder.grow(&rows, 0, &mut rng())
    }

    #[test]
    fn stump_oracle_split_and_leaves() {
        let values = [0.0, 0.0, 1.0, 1.0];
        let labels = [0, 0, 1, 1];
        let node = grow_plain(&values, 1, &labels, 1);
        match node {
            Node::Split { feature, threshold, left, right } => {
                assert_eq!(feature, 0);
                assert_eq!(threshold, 0.5);
                assert_eq!(matches!(*left, Node::Leaf { value } if value == 0.0), true);
                assert_eq!(matches!(*right, Node::Leaf { value } if value == 1.0), true);
            }
            Node::Leaf { .. } => panic!("expected a split"),
        }
    }

    #[test]
    fn tie_break_prefers_lower_feature_index() {
        // Two identical columns produce identical gains; the split must land
        // on feature 0 because candidates are scanned in index order.
        let values = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let labels = [0, 0, 1, 1];
        let node = grow_plain(&values, 2, &labels, 2);
        match node {
            Node::Split { feature, .. } => assert_eq!(feature, 0),
            Node::Leaf { .. } => panic!("expected a split"),
        }
    }

    #[test]
    fn midpoint_threshold_between_distinct_values() {
        let values = [1.0, 3.0];
        let labels = [0, 1];
        let node = grow_plain(&values, 1, &labels, 1);
        match node {
            Node::Split { threshold, .. } => assert_eq!(threshold, 2.0),
            Node::Leaf { .. } => panic!("expected a split"),
        }
    }

    #[test]
    fn pure_node_becomes_leaf_with_class_fraction() {
        let values = [0.0, 1.0, 2.0];
        let labels = [1, 1, 1];
        let node = grow_plain(&values, 1, &labels, 1);
        assert!(matches!(node, Node::Leaf { value } if value == 1.0));
    }

    #[test]
    fn separable_data_training_auc_is_high() {
        let n = 40;
        let values: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let labels: Vec<u8> = (0..n).map(|i| u8::from(i >= n / 2)).collect();
        let forest = RandomForest::fit(&values, 1, &labels, &ForestParams::default(), &mut rng());
        let scores: Vec<f64> = (0..n).map(|i| forest.predict_proba(&values[i..=i])).collect();
        assert!(auc(&scores, &labels).unwrap() >= 0.99);
    }

    #[test]
    fn deterministic_given_seed() {
        let n = 30;
        let values: Vec<f64> = (0..n * 2).map(|i| ((i * 37) % 17) as f64).collect();
        let labels: Vec<u8> = (0..n).map(|i| u8::from((i * 31) % 5 < 2)).collect();
        let params = ForestParams { trees: 25, max_depth: 4 };
        let a = RandomForest::fit(&values, 2, &labels, &params, &mut rng());
        let b = RandomForest::fit(&values, 2, &labels, &params, &mut rng());
        for i in 0..n {
            let x = &values[i * 2..(i + 1) * 2];
            assert_eq!(a.predict_proba(x).to_bits(), b.predict_proba(x).to_bits());
        }
    }

    #[test]
    fn probabilities_stay_in_unit_interval() {
        let n = 24;
        let values: Vec<f64> = (0..n * 3).map(|i| ((i * 53) % 29) as f64 / 7.0).collect();
        let labels: Vec<u8> = (0..n).map(|i| u8::from(i % 3 == 0)).collect();
        let forest = RandomForest::fit(&values, 3, &labels, &ForestParams::default(), &mut rng());
        for i in 0..n {
            let p = forest.predict_proba(&values[i * 3..(i + 1) * 3]);
            assert!((0.0..=1.0).contains(&p), "probability out of range: {p}");
        }
    }
}
