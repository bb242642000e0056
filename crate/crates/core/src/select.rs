//! Feature selection: SULOV correlation-redundancy elimination, recursive
//! gradient-boosted relevance ranking, and the correlation-threshold sweep
//! that measures how often each feature survives both stages.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::FeatureMatrix;
use crate::models::gbt::{GbtParams, GradientBoostedTrees};
use crate::rng::{stream, tags};
use crate::stats::{self, StatsError};

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("invalid sweep config: {0}")]
    InvalidConfig(String),
    #[error("unknown feature \"{0}\"")]
    UnknownFeature(String),
    #[error("need at least 2 candidate features, got {0}")]
    TooFewCandidates(usize),
    #[error("could not draw a train/test split containing both classes in {attempts} attempts")]
    DegenerateSplit { attempts: usize },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Configuration for [`sweep`] and [`boosted_rank`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Correlation thresholds, strictly increasing, each in (0, 1).
    pub rho_grid: Vec<f64>,
    /// Bins for the mutual-information estimator.
    pub mi_bins: usize,
    /// Trees per boosted ensemble.
    pub boosting_rounds: usize,
    /// Fraction of rows assigned to the train side of each ranking split.
    pub split_fraction: f64,
    /// Ranking repetitions (each with a fresh split).
    pub rounds: usize,
    /// Master RNG seed.
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            rho_grid: default_rho_grid(),
            mi_bins: 10,
            boosting_rounds: 100,
            split_fraction: 0.75,
            rounds: 5,
            seed: 42,
        }
    }
}

/// The 99-point grid 0.01, 0.02, ..., 0.99.
pub fn default_rho_grid() -> Vec<f64> {
    (1..=99).map(|k| f64::from(k) / 100.0).collect()
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), SelectError> {
        if self.rho_grid.is_empty() {
            return Err(SelectError::InvalidConfig("rho_grid is empty".into()));
        }
        for w in self.rho_grid.windows(2) {
            if !(w[0] < w[1]) {
                return Err(SelectError::InvalidConfig(
                    "rho_grid must be strictly increasing".into(),
                ));
            }
        }
        if self.rho_grid.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
            return Err(SelectError::InvalidConfig("every rho must lie in (0, 1)".into()));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(SelectError::InvalidConfig("split_fraction must lie in (0, 1)".into()));
        }
        if self.mi_bins < 2 {
            return Err(SelectError::InvalidConfig("mi_bins must be >= 2".into()));
        }
        if self.boosting_rounds == 0 || self.rounds == 0 {
            return Err(SelectError::InvalidConfig(
                "boosting_rounds and rounds must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Searching for Uncorrelated List Of Variables: drop the lower-MI endpoint
/// of every surviving high-correlation pair.
///
/// Pairs with `|pearson| > rho` form edges; edges are processed in descending
/// correlation order (ties by input column order), and an edge whose
/// endpoints are both still alive kills the endpoint with lower mutual
/// information against the label (ties keep the earlier column). Isolated
/// features always survive. The result preserves input column order and is
/// fully deterministic.
pub fn sulov(
    matrix: &FeatureMatrix,
    rho: f64,
    mi_bins: usize,
) -> Result<Vec<String>, SelectError> {
    let p = matrix.n_cols();
    let columns: Vec<Vec<f64>> = (0..p).map(|j| matrix.column(j)).collect();

    let mi: Vec<f64> = columns
        .iter()
        .map(|c| stats::mutual_information(c, matrix.labels(), mi_bins))
        .collect::<Result<_, _>>()?;

    let mut edges: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            let r = stats::pearson(&columns[i], &columns[j])?.abs();
            if r > rho {
                edges.push((r, i, j));
            }
        }
    }
    edges.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut alive = vec![true; p];
    for &(_, i, j) in &edges {
        if alive[i] && alive[j] {
            // Equal MI keeps the earlier column.
            let victim = if mi[j] < mi[i] { j } else if mi[i] < mi[j] { i } else { j };
            alive[victim] = false;
        }
    }
    Ok(matrix
        .column_names()
        .iter()
        .zip(&alive)
        .filter(|&(_, &a)| a)
        .map(|(name, _)| name.clone())
        .collect())
}

/// A feature with its accumulated total-gain importance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedFeature {
    pub name: String,
    pub importance: f64,
}

/// Rank `candidates` by total-gain importance accumulated over
/// `cfg.rounds` seeded train/test splits; features never used in any split
/// (importance 0) are dropped.
pub fn boosted_rank(
    matrix: &FeatureMatrix,
    candidates: &[String],
    cfg: &SweepConfig,
) -> Result<Vec<RankedFeature>, SelectError> {
    cfg.validate()?;
    if candidates.len() < 2 {
        return Err(SelectError::TooFewCandidates(candidates.len()));
    }
    rank_importances(matrix, candidates, cfg)
}

/// Like [`boosted_rank`] but accepts a single candidate; used by [`sweep`],
/// where a lone SULOV survivor must still be scored rather than rejected.
fn rank_importances(
    matrix: &FeatureMatrix,
    candidates: &[String],
    cfg: &SweepConfig,
) -> Result<Vec<RankedFeature>, SelectError> {
    for name in candidates {
        if matrix.column_index(name).is_none() {
            return Err(SelectError::UnknownFeature(name.clone()));
        }
    }
    let sub = matrix
        .select_columns(candidates)
        .map_err(|_| SelectError::UnknownFeature(candidates.join(",")))?;
    let n = sub.n_rows();
    let train_len = ((n as f64) * cfg.split_fraction).round() as usize;
    let train_len = train_len.clamp(1, n - 1);
    let params = GbtParams { n_trees: cfg.boosting_rounds, ..GbtParams::default() };

    let mut totals = vec![0.0f64; candidates.len()];
    for round in 0..cfg.rounds {
        let train = draw_split(&sub, cfg.seed, round as u64, train_len)?;
        let fold = sub.subset_rows(&train);
        let model = GradientBoostedTrees::fit(fold.values(), fold.n_cols(), fold.labels(), &params);
        for (t, g) in totals.iter_mut().zip(model.feature_importance()) {
            *t += g;
        }
    }
    let mut ranked: Vec<RankedFeature> = candidates
        .iter()
        .zip(&totals)
        .filter(|&(_, &imp)| imp > 0.0)
        .map(|(name, &imp)| RankedFeature { name: name.clone(), importance: imp })
        .collect();
    // Stable sort: importance ties keep input (column) order.
    ranked.sort_by(|a, b| b.importance.partial_cmp(&a.importance).unwrap());
    Ok(ranked)
}

/// Draw the train side of a split; resample with an incremented attempt tag
/// (up to 10 tries) until both train and test contain both classes.
fn draw_split(
    matrix: &FeatureMatrix,
    seed: u64,
    round: u64,
    train_len: usize,
) -> Result<Vec<usize>, SelectError> {
    const MAX_ATTEMPTS: usize = 10;
    let n = matrix.n_rows();
    let labels = matrix.labels();
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = stream(seed, &[tags::RANK, round, attempt as u64]);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let (train, test) = order.split_at(train_len);
        let both = |rows: &[usize]| {
            rows.iter().any(|&i| labels[i] == 0) && rows.iter().any(|&i| labels[i] == 1)
        };
        if both(train) && both(test) {
            return Ok(train.to_vec());
        }
        log::debug!("degenerate ranking split (round {round}, attempt {attempt}); resampling");
    }
    Err(SelectError::DegenerateSplit { attempts: MAX_ATTEMPTS })
}

/// Per-feature selection statistics over the threshold grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelection {
    pub feature: String,
    /// Number of grid points where the feature survived both stages.
    pub frequency: usize,
    /// Smallest selecting threshold, when ever selected.
    pub min_rho: Option<f64>,
    /// Mean of the selecting thresholds.
    pub mean_rho: Option<f64>,
    /// Sample standard deviation of the selecting thresholds (0 when
    /// selected exactly once).
    pub std_rho: Option<f64>,
}

/// Sweep result: one row per input feature, sorted by frequency descending
/// (ties keep input column order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub rho_grid: Vec<f64>,
    pub rows: Vec<FeatureSelection>,
}

impl SelectionReport {
    /// CSV with columns `feature,frequency,min_rho,mean_rho,std_rho`; unset
    /// statistics serialize as empty cells.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("feature,frequency,min_rho,mean_rho,std_rho\n");
        for row in &self.rows {
            let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                row.feature,
                row.frequency,
                cell(row.min_rho),
                cell(row.mean_rho),
                cell(row.std_rho)
            );
        }
        out
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// For each threshold in the grid, run [`sulov`] then boosted ranking, and
/// count a feature as selected when it survives both stages.
///
/// Grid points are evaluated in parallel; each derives its own RNG stream
/// from (seed, grid index), so the report is identical for any worker count.
pub fn sweep(matrix: &FeatureMatrix, cfg: &SweepConfig) -> Result<SelectionReport, SelectError> {
    cfg.validate()?;
    let per_point: Vec<Vec<String>> = cfg
        .rho_grid
        .par_iter()
        .enumerate()
        .map(|(idx, &rho)| -> Result<Vec<String>, SelectError> {
            let kept = sulov(matrix, rho, cfg.mi_bins)?;
            if kept.is_empty() {
                return Ok(Vec::new());
            }
            let mut point_cfg = cfg.clone();
            point_cfg.seed = stream(cfg.seed, &[tags::SWEEP, idx as u64]).gen::<u64>();
            let ranked = rank_importances(matrix, &kept, &point_cfg)?;
            Ok(ranked.into_iter().map(|r| r.name).collect())
        })
        .collect::<Result<_, _>>()?;

    let mut rows: Vec<FeatureSelection> = matrix
        .column_names()
        .iter()
        .map(|name| {
            let rhos: Vec<f64> = cfg
                .rho_grid
                .iter()
                .zip(&per_point)
                .filter(|&(_, selected)| selected.iter().any(|s| s == name))
                .map(|(&rho, _)| rho)
                .collect();
            let (mean_rho, std_rho) = match rhos.len() {
                0 => (None, None),
                1 => (Some(rhos[0]), Some(0.0)),
                _ => {
                    let (m, s) = stats::mean_std(&rhos);
                    (Some(m), Some(s))
                }
            };
            FeatureSelection {
                feature: name.clone(),
                frequency: rhos.len(),
                min_rho: rhos.first().copied(),
                mean_rho,
                std_rho,
            }
        })
        .collect();
    rows.sort_by(|a, b| b.frequency.cmp(&a.frequency));
    Ok(SelectionReport { rho_grid: cfg.rho_grid.clone(), rows })
}
