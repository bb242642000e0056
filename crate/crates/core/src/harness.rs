//! Seeded, stratified Monte Carlo k-fold cross-validation over the model zoo.
//!
//! [`make_folds`] derives every repetition's fold assignment from a
//! counter-based RNG stream of `(seed, repetition)`, so fold structure is
//! identical for every model and independent of scheduling. [`run_benchmark`]
//! fits each requested [`ModelKind`] on each train split, scores the held-out
//! split, and aggregates the AUC samples into a [`BenchmarkReport`].
//! Degenerate folds (single-class test fold or train split) are skipped and
//! recorded; the run aborts if more than 5% of folds degenerate.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::FeatureMatrix;
use crate::models::{
    predict_scores, train_classifier_with, ModelKind, ModelSettings,
};
use crate::rng::{stream, tags};
use crate::stats::{auc, summarize, AucSummary, StatsError};

/// Fraction of degenerate folds tolerated before the run aborts.
const MAX_SKIP_FRACTION: f64 = 0.05;

/// Errors surfaced by fold construction and benchmarking.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid cross-validation plan: {0}")]
    InvalidPlan(String),
    #[error("{skipped} of {total} folds were degenerate (limit is 5%)")]
    TooManyDegenerateFolds { skipped: usize, total: usize },
    #[error("summarizing AUC samples failed: {0}")]
    Stats(#[from] StatsError),
    #[error("report contains no models")]
    EmptyReport,
}

/// A Monte Carlo cross-validation plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvPlan {
    /// Row count of the matrix the plan applies to.
    pub n: usize,
    /// Folds per repetition.
    pub k: usize,
    /// Monte Carlo repetitions.
    pub repetitions: usize,
    /// Keep per-fold class counts within one of proportional.
    pub stratified: bool,
    /// Master seed for fold construction and model training.
    pub seed: u64,
}

impl Default for CvPlan {
    fn default() -> Self {
        Self { n: 0, k: 10, repetitions: 100, stratified: true, seed: 42 }
    }
}

impl CvPlan {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.k < 2 {
            return Err(HarnessError::InvalidPlan("k must be at least 2".into()));
        }
        if self.k > self.n {
            return Err(HarnessError::InvalidPlan(format!(
                "k = {} exceeds the row count n = {}",
                self.k, self.n
            )));
        }
        if self.repetitions == 0 {
            return Err(HarnessError::InvalidPlan("repetitions must be at least 1".into()));
        }
        Ok(())
    }
}

/// Train and test row indices for one fold, both sorted ascending.
pub type FoldSplit = (Vec<usize>, Vec<usize>);

/// Deals shuffled indices into `k` folds, rotated by a random offset so no
/// fold is systematically larger across repetitions.
fn deal(indices: &mut Vec<usize>, k: usize, rng: &mut impl Rng, folds: &mut [Vec<usize>]) {
    indices.shuffle(rng);
    let offset = rng.gen_range(0..k);
    for (i, &row) in indices.iter().enumerate() {
        folds[(i + offset) % k].push(row);
    }
}

/// Builds every repetition's `(train, test)` splits.
///
/// Within a repetition the test folds partition `[0, n)`. When the plan is
/// stratified, each class is dealt separately so per-fold class counts stay
/// within one of proportional. Each repetition draws from its own
/// `(seed, repetition)` RNG stream, so repetition `r` is reproducible in
/// isolation.
pub fn make_folds(plan: &CvPlan, labels: &[u8]) -> Result<Vec<Vec<FoldSplit>>, HarnessError> {
    plan.validate()?;
    if labels.len() != plan.n {
        return Err(HarnessError::InvalidPlan(format!(
            "plan covers n = {} rows but {} labels were supplied",
            plan.n,
            labels.len()
        )));
    }
    let mut repetitions = Vec::with_capacity(plan.repetitions);
    for rep in 0..plan.repetitions {
        let mut rng = stream(plan.seed, &[tags::FOLDS, rep as u64]);
        let mut folds: Vec<Vec<usize>> = vec![Vec::new(); plan.k];
        if plan.stratified {
            for class in [0u8, 1u8] {
                let mut members: Vec<usize> =
                    (0..plan.n).filter(|&i| labels[i] == class).collect();
                deal(&mut members, plan.k, &mut rng, &mut folds);
            }
        } else {
            let mut members: Vec<usize> = (0..plan.n).collect();
            deal(&mut members, plan.k, &mut rng, &mut folds);
        }
        let mut splits = Vec::with_capacity(plan.k);
        for f in 0..plan.k {
            let mut test = folds[f].clone();
            test.sort_unstable();
            let mut train: Vec<usize> =
                folds.iter().enumerate().filter(|(g, _)| *g != f).flat_map(|(_, v)| v.iter().copied()).collect();
            train.sort_unstable();
            splits.push((train, test));
        }
        repetitions.push(splits);
    }
    Ok(repetitions)
}

/// A fold that was skipped because train or test rows held a single class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFold {
    pub repetition: usize,
    pub fold: usize,
    pub reason: String,
}

/// A model kind that failed training; its samples are excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedModel {
    pub kind: ModelKind,
    pub message: String,
}

/// Per-kind results: the AUC distribution over all scored folds, in
/// (repetition, fold) order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelReport {
    pub kind: ModelKind,
    pub summary: AucSummary,
}

/// The full benchmark output. Serialization skips the wall clock so identical
/// `(dataset, config, seed)` runs serialize to identical bytes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub plan: CvPlan,
    pub feature_names: Vec<String>,
    pub dataset_hash: String,
    pub models: Vec<ModelReport>,
    pub skipped_folds: Vec<SkippedFold>,
    pub failed_models: Vec<FailedModel>,
    #[serde(skip, default)]
    pub wall_clock: Duration,
}

impl BenchmarkReport {
    /// Pretty JSON with a trailing newline; excludes the wall clock.
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json_str(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Summary CSV mirroring the comparison table: one ranked row per model.
    pub fn summary_csv(&self) -> Result<String, HarnessError> {
        let ranking = compare_models(self)?;
        let mut out = String::from("rank,model,mean,std,p2_5,p97_5,samples\n");
        for row in ranking {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                row.rank,
                row.kind,
                row.summary.mean,
                row.summary.std,
                row.summary.p2_5,
                row.summary.p97_5,
                row.summary.samples.len()
            ));
        }
        Ok(out)
    }
}

/// One row of the model comparison: rank, kind, and the AUC distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelRanking {
    pub rank: usize,
    pub kind: ModelKind,
    pub summary: AucSummary,
}

/// Ranks models by mean AUC descending; ties broken by lower standard
/// deviation, then canonical kind order.
pub fn compare_models(report: &BenchmarkReport) -> Result<Vec<ModelRanking>, HarnessError> {
    if report.models.is_empty() {
        return Err(HarnessError::EmptyReport);
    }
    let mut rows: Vec<&ModelReport> = report.models.iter().collect();
    rows.sort_by(|a, b| {
        b.summary
            .mean
            .total_cmp(&a.summary.mean)
            .then(a.summary.std.total_cmp(&b.summary.std))
            .then(a.kind.index().cmp(&b.kind.index()))
    });
    Ok(rows
        .into_iter()
        .enumerate()
        .map(|(i, m)| ModelRanking { rank: i + 1, kind: m.kind, summary: m.summary.clone() })
        .collect())
}

fn single_class(labels: &[u8]) -> bool {
    !(labels.contains(&0) && labels.contains(&1))
}

/// Runs the full benchmark: every requested kind on every non-degenerate
/// `(repetition, fold)` split.
///
/// Work units are `(repetition, fold, kind)` tasks executed in parallel; each
/// derives its model seed from `(plan.seed, repetition, fold, kind)`, and
/// results are aggregated in canonical order, so the report is independent of
/// the worker count. Models fit on train rows only; standardizing kinds
/// compute their statistics inside `train_classifier` from the train split.
pub fn run_benchmark(
    matrix: &FeatureMatrix,
    kinds: &[ModelKind],
    plan: &CvPlan,
    settings: &ModelSettings,
) -> Result<BenchmarkReport, HarnessError> {
    let started = Instant::now();
    if kinds.is_empty() {
        return Err(HarnessError::InvalidPlan("no model kinds requested".into()));
    }
    for (i, kind) in kinds.iter().enumerate() {
        if kinds[..i].contains(kind) {
            return Err(HarnessError::InvalidPlan(format!("duplicate model kind {kind}")));
        }
    }
    if plan.n != matrix.n_rows() {
        return Err(HarnessError::InvalidPlan(format!(
            "plan covers n = {} rows but the matrix has {}",
            plan.n,
            matrix.n_rows()
        )));
    }
    let folds = make_folds(plan, matrix.labels())?;

    // Pre-scan fold degeneracy once; the same folds are used by every kind.
    let mut skipped_folds = Vec::new();
    let mut live: Vec<(usize, usize)> = Vec::new();
    for (rep, splits) in folds.iter().enumerate() {
        for (fold, (train, test)) in splits.iter().enumerate() {
            let test_labels: Vec<u8> = test.iter().map(|&i| matrix.labels()[i]).collect();
            let train_labels: Vec<u8> = train.iter().map(|&i| matrix.labels()[i]).collect();
            if single_class(&test_labels) {
                skipped_folds.push(SkippedFold {
                    repetition: rep,
                    fold,
                    reason: "single-class test fold".into(),
                });
            } else if single_class(&train_labels) {
                skipped_folds.push(SkippedFold {
                    repetition: rep,
                    fold,
                    reason: "single-class train split".into(),
                });
            } else {
                live.push((rep, fold));
            }
        }
    }
    let total = plan.repetitions * plan.k;
    if skipped_folds.len() as f64 > MAX_SKIP_FRACTION * total as f64 {
        return Err(HarnessError::TooManyDegenerateFolds {
            skipped: skipped_folds.len(),
            total,
        });
    }

    // Canonical task list: fold-major, kind-minor.
    let tasks: Vec<(usize, usize, ModelKind)> = live
        .iter()
        .flat_map(|&(rep, fold)| kinds.iter().map(move |&kind| (rep, fold, kind)))
        .collect();

    let results: Vec<Result<f64, String>> = tasks
        .par_iter()
        .map(|&(rep, fold, kind)| {
            let (train, test) = &folds[rep][fold];
            let train_matrix = matrix.subset_rows(train);
            let test_matrix = matrix.subset_rows(test);
            let model_seed = stream(
                plan.seed,
                &[tags::MODEL, rep as u64, fold as u64, kind.index()],
            )
            .gen::<u64>();
            let model = train_classifier_with(kind, &train_matrix, model_seed, settings)
                .map_err(|e| e.to_string())?;
            let scores = predict_scores(&model, &test_matrix).map_err(|e| e.to_string())?;
            auc(&scores, test_matrix.labels()).map_err(|e| e.to_string())
        })
        .collect();

    let mut per_kind_samples: Vec<Vec<f64>> = vec![Vec::new(); kinds.len()];
    let mut failed_models: Vec<FailedModel> = Vec::new();
    for ((_, _, kind), result) in tasks.iter().zip(results) {
        let slot = kinds.iter().position(|k| k == kind).unwrap();
        match result {
            Ok(sample) => per_kind_samples[slot].push(sample),
            Err(message) => {
                if !failed_models.iter().any(|f| f.kind == *kind) {
                    failed_models.push(FailedModel { kind: *kind, message });
                }
            }
        }
    }

    let mut models = Vec::new();
    for (slot, kind) in kinds.iter().enumerate() {
        if failed_models.iter().any(|f| f.kind == *kind) {
            continue;
        }
        models.push(ModelReport { kind: *kind, summary: summarize(&per_kind_samples[slot])? });
    }

    Ok(BenchmarkReport {
        plan: plan.clone(),
        feature_names: matrix.column_names().to_vec(),
        dataset_hash: matrix.content_hash(),
        models,
        skipped_folds,
        failed_models,
        wall_clock: started.elapsed(),
    })
}
