//! Core library for a breast-cancer pre-screening benchmark on routine
//! blood markers and anthropometric data.
//!
//! The crate is organized as a pipeline:
//!
//! 1. [`dataset`] loads and validates the clinical CSV, derives the HOMA
//!    insulin-resistance index and BMI indicator flags, and joins per-age and
//!    per-BMI relative-risk tables into a [`dataset::FeatureMatrix`].
//! 2. [`stats`] provides the shared estimators: Pearson correlation, binned
//!    mutual information, and the Mann-Whitney AUC.
//! 3. [`select`] implements correlation-redundancy feature elimination and
//!    gradient-boosted feature ranking, plus the threshold sweep used to pick
//!    a working feature subset.
//! 4. [`nnet`] is a small dense neural-network engine (exact gradients,
//!    Adam/SGD, serialization) used by the deep models.
//! 5. [`models`] exposes the eight benchmark classifiers behind one
//!    train/predict contract.
//! 6. [`harness`] runs seeded, stratified Monte Carlo cross-validation over
//!    the model zoo and aggregates per-fold AUCs into reports.
//!
//! Everything downstream of the RNG seed is deterministic: reports produced
//! with the same seed, dataset, and configuration are byte-identical
//! regardless of thread count.

pub mod dataset;
pub mod harness;
pub mod models;
pub mod nnet;
pub mod rng;
pub mod select;
pub mod stats;

pub use dataset::{
    compute_homa, derive_bmi_flags, describe, join_relative_risks, load_patients, ColumnSchema,
    ColumnSummary, DatasetError, FeatureMatrix, PatientRecord, RiskBand, RiskTable, RiskTableKind,
};
pub use harness::{
    compare_models, make_folds, run_benchmark, BenchmarkReport, CvPlan, FailedModel, FoldSplit,
    HarnessError, ModelRanking, ModelReport, SkippedFold,
};
pub use models::{
    gbt::{split_gain as gbt_split_gain, GbtParams},
    predict_scores, train_classifier, train_classifier_with, Classifier, ModelError, ModelKind,
    ModelSettings,
};
pub use nnet::{adam_step, deep_spec, shallow_spec, train as train_network, Activation, AdamState, LayerSpec, Network, NetworkSpec, NnetError, OptimizerKind, TrainedNetwork};
pub use select::{boosted_rank, default_rho_grid, sulov, sweep, FeatureSelection, RankedFeature, SelectError, SelectionReport, SweepConfig};
pub use stats::{auc, equal_frequency_bins, mutual_information, pearson, AucSummary, StatsError};
