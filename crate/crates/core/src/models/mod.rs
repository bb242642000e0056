//! The eight benchmark classifiers behind a single train/predict contract.
//!
//! [`train_classifier`] fits any [`ModelKind`] on a [`FeatureMatrix`] and
//! returns an immutable [`Classifier`]; [`predict_scores`] maps rows to real
//! scores where higher means more cancer-like. Probabilistic kinds emit
//! probabilities in `[0, 1]`; the SVM emits raw signed margins. Kinds trained
//! by gradient methods standardize features internally with statistics from
//! the training matrix only, so scoring-time rows never influence the fitted
//! state.

pub mod bayes;
pub mod forest;
pub mod gbt;
pub mod linear;
pub mod svm;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::FeatureMatrix;
use crate::nnet::{self, NnetError, TrainedNetwork};
use crate::rng::{stream, tags};
use crate::stats::mean_std;

use bayes::GaussianNb;
use forest::{ForestParams, RandomForest};
use gbt::{GbtParams, GradientBoostedTrees};
use linear::{LinearModel, LogisticParams, SgdParams};
use svm::{SvmModel, SvmParams};

/// The eight benchmark model families, in canonical reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    DeepLearning,
    Svm,
    NeuralNetwork,
    LogisticRegression,
    XgboostLike,
    RandomForest,
    NaiveBayes,
    StochasticGradient,
}

impl ModelKind {
    /// Every kind, in canonical reporting order.
    pub const ALL: [ModelKind; 8] = [
        ModelKind::DeepLearning,
        ModelKind::Svm,
        ModelKind::NeuralNetwork,
        ModelKind::LogisticRegression,
        ModelKind::XgboostLike,
        ModelKind::RandomForest,
        ModelKind::NaiveBayes,
        ModelKind::StochasticGradient,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::DeepLearning => "deep_learning",
            ModelKind::Svm => "svm",
            ModelKind::NeuralNetwork => "neural_network",
            ModelKind::LogisticRegression => "logistic_regression",
            ModelKind::XgboostLike => "xgboost_like",
            ModelKind::RandomForest => "random_forest",
            ModelKind::NaiveBayes => "naive_bayes",
            ModelKind::StochasticGradient => "stochastic_gradient",
        }
    }

    /// Whether scores are probabilities in `[0, 1]` (every kind but the SVM,
    /// whose scores are raw margins).
    pub fn is_probabilistic(self) -> bool {
        !matches!(self, ModelKind::Svm)
    }

    /// Kinds fitted by gradient methods standardize their inputs.
    fn standardizes(self) -> bool {
        matches!(
            self,
            ModelKind::DeepLearning
                | ModelKind::NeuralNetwork
                | ModelKind::Svm
                | ModelKind::LogisticRegression
                | ModelKind::StochasticGradient
        )
    }

    /// Stable index used to derive per-kind RNG streams.
    pub fn index(self) -> u64 {
        Self::ALL.iter().position(|k| *k == self).unwrap() as u64
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|k| k.as_str()).collect();
                format!("unknown model kind {s:?}; expected one of {}", names.join(", "))
            })
    }
}

/// Errors surfaced by training and scoring.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("invalid hyperparameter for {kind}: {message}")]
    InvalidHyperparam { kind: ModelKind, message: String },
    #[error("training loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("feature names do not match the classifier: expected {expected:?}, got {got:?}")]
    FeatureMismatch { expected: Vec<String>, got: Vec<String> },
}

/// Optional overrides applied to both neural-network specs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkOverrides {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
}

/// Per-kind hyperparameters; every field has the published default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSettings {
    pub random_forest: ForestParams,
    pub xgboost_like: GbtParams,
    pub svm: SvmParams,
    pub logistic_regression: LogisticParams,
    pub stochastic_gradient: SgdParams,
    pub network: NetworkOverrides,
}

fn invalid(kind: ModelKind, message: impl Into<String>) -> ModelError {
    ModelError::InvalidHyperparam { kind, message: message.into() }
}

fn validate_settings(kind: ModelKind, settings: &ModelSettings) -> Result<(), ModelError> {
    match kind {
        ModelKind::RandomForest => {
            let p = &settings.random_forest;
            if p.trees == 0 {
                return Err(invalid(kind, "trees must be at least 1"));
            }
            if p.max_depth == 0 {
                return Err(invalid(kind, "max_depth must be at least 1"));
            }
        }
        ModelKind::XgboostLike => {
            let p = &settings.xgboost_like;
            if p.n_trees == 0 {
                return Err(invalid(kind, "n_trees must be at least 1"));
            }
            if p.max_depth == 0 {
                return Err(invalid(kind, "max_depth must be at least 1"));
            }
            if !(p.learning_rate.is_finite() && p.learning_rate > 0.0) {
                return Err(invalid(kind, "learning_rate must be positive and finite"));
            }
            if !(p.lambda.is_finite() && p.lambda >= 0.0) {
                return Err(invalid(kind, "lambda must be non-negative and finite"));
            }
            if !(p.gamma.is_finite() && p.gamma >= 0.0) {
                return Err(invalid(kind, "gamma must be non-negative and finite"));
            }
        }
        ModelKind::Svm => {
            let p = &settings.svm;
            if !(p.c.is_finite() && p.c > 0.0) {
                return Err(invalid(kind, "c must be positive and finite"));
            }
            if p.max_sweeps == 0 {
                return Err(invalid(kind, "max_sweeps must be at least 1"));
            }
        }
        ModelKind::LogisticRegression => {
            let p = &settings.logistic_regression;
            if !(p.l2.is_finite() && p.l2 >= 0.0) {
                return Err(invalid(kind, "l2 must be non-negative and finite"));
            }
            if !(p.tol.is_finite() && p.tol > 0.0) {
                return Err(invalid(kind, "tol must be positive and finite"));
            }
            if p.max_iters == 0 {
                return Err(invalid(kind, "max_iters must be at least 1"));
            }
        }
        ModelKind::StochasticGradient => {
            let p = &settings.stochastic_gradient;
            if !(p.learning_rate.is_finite() && p.learning_rate > 0.0) {
                return Err(invalid(kind, "learning_rate must be positive and finite"));
            }
            if p.epochs == 0 {
                return Err(invalid(kind, "epochs must be at least 1"));
            }
        }
        ModelKind::DeepLearning | ModelKind::NeuralNetwork => {
            let o = &settings.network;
            if o.epochs == Some(0) {
                return Err(invalid(kind, "epochs must be at least 1"));
            }
            if o.batch_size == Some(0) {
                return Err(invalid(kind, "batch_size must be at least 1"));
            }
            if let Some(lr) = o.learning_rate {
                if !(lr.is_finite() && lr > 0.0) {
                    return Err(invalid(kind, "learning_rate must be positive and finite"));
                }
            }
        }
        ModelKind::NaiveBayes => {}
    }
    Ok(())
}

/// Column-wise z-score parameters fitted on training rows only.
#[derive(Debug, Clone)]
struct Scaler {
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl Scaler {
    fn fit(matrix: &FeatureMatrix) -> Self {
        let mut means = Vec::with_capacity(matrix.n_cols());
        let mut stds = Vec::with_capacity(matrix.n_cols());
        for j in 0..matrix.n_cols() {
            let col = matrix.column(j);
            let (mean, std) = mean_std(&col);
            means.push(mean);
            stds.push(if std > 1e-12 { std } else { 1.0 });
        }
        Self { means, stds }
    }

    fn transform_row_into(&self, row: &[f64], out: &mut [f64]) {
        for (j, &x) in row.iter().enumerate() {
            out[j] = (x - self.means[j]) / self.stds[j];
        }
    }

    fn transform_all(&self, matrix: &FeatureMatrix) -> Vec<f64> {
        let n_cols = matrix.n_cols();
        let mut out = vec![0.0; matrix.n_rows() * n_cols];
        for i in 0..matrix.n_rows() {
            self.transform_row_into(matrix.row(i), &mut out[i * n_cols..(i + 1) * n_cols]);
        }
        out
    }
}

#[derive(Debug, Clone)]
enum FittedState {
    Network(TrainedNetwork),
    Gbt(GradientBoostedTrees),
    Forest(RandomForest),
    Svm(SvmModel),
    Linear(LinearModel),
    Bayes(GaussianNb),
}

/// An immutable fitted classifier: the kind, the feature-name order it was
/// trained on, an optional input scaler, and the kind-specific state.
#[derive(Debug, Clone)]
pub struct Classifier {
    kind: ModelKind,
    feature_names: Vec<String>,
    scaler: Option<Scaler>,
    state: FittedState,
}

impl Classifier {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Column order required by [`predict_scores`].
    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }
}

fn map_nnet_error(err: NnetError, kind: ModelKind) -> ModelError {
    match err {
        NnetError::SingleClass => ModelError::SingleClass,
        NnetError::NonFiniteLoss { epoch } => ModelError::NonFiniteLoss { epoch },
        other => invalid(kind, other.to_string()),
    }
}

/// Trains `kind` on `matrix` with default hyperparameters.
pub fn train_classifier(
    kind: ModelKind,
    matrix: &FeatureMatrix,
    seed: u64,
) -> Result<Classifier, ModelError> {
    train_classifier_with(kind, matrix, seed, &ModelSettings::default())
}

/// Trains `kind` on `matrix` with explicit hyperparameters. Deterministic
/// given `(kind, data, seed)`.
pub fn train_classifier_with(
    kind: ModelKind,
    matrix: &FeatureMatrix,
    seed: u64,
    settings: &ModelSettings,
) -> Result<Classifier, ModelError> {
    validate_settings(kind, settings)?;
    let labels = matrix.labels();
    if !(labels.contains(&0) && labels.contains(&1)) {
        return Err(ModelError::SingleClass);
    }

    let scaler = kind.standardizes().then(|| Scaler::fit(matrix));
    let owned_values;
    let values: &[f64] = match &scaler {
        Some(s) => {
            owned_values = s.transform_all(matrix);
            &owned_values
        }
        None => matrix.values(),
    };
    let n_cols = matrix.n_cols();
    let mut rng = stream(seed, &[tags::MODEL, kind.index()]);

    let state = match kind {
        ModelKind::DeepLearning | ModelKind::NeuralNetwork => {
            let mut spec = if kind == ModelKind::DeepLearning {
                nnet::deep_spec(n_cols, seed)
            } else {
                nnet::shallow_spec(n_cols, seed)
            };
            if let Some(epochs) = settings.network.epochs {
                spec.epochs = epochs;
            }
            if let Some(batch) = settings.network.batch_size {
                spec.batch_size = batch;
            }
            if let Some(lr) = settings.network.learning_rate {
                spec.learning_rate = lr;
            }
            let std_matrix = FeatureMatrix::new(
                matrix.column_names().to_vec(),
                values.to_vec(),
                labels.to_vec(),
            )
            .expect("standardized copy of a valid matrix is well-formed");
            let trained =
                nnet::train(&spec, &std_matrix).map_err(|e| map_nnet_error(e, kind))?;
            FittedState::Network(trained)
        }
        ModelKind::Svm => {
            FittedState::Svm(SvmModel::fit(values, n_cols, labels, &settings.svm, &mut rng))
        }
        ModelKind::LogisticRegression => FittedState::Linear(linear::fit_logistic(
            values,
            n_cols,
            labels,
            &settings.logistic_regression,
        )),
        ModelKind::XgboostLike => FittedState::Gbt(GradientBoostedTrees::fit(
            values,
            n_cols,
            labels,
            &settings.xgboost_like,
        )),
        ModelKind::RandomForest => FittedState::Forest(RandomForest::fit(
            values,
            n_cols,
            labels,
            &settings.random_forest,
            &mut rng,
        )),
        ModelKind::NaiveBayes => FittedState::Bayes(GaussianNb::fit(values, n_cols, labels)),
        ModelKind::StochasticGradient => FittedState::Linear(linear::fit_sgd(
            values,
            n_cols,
            labels,
            &settings.stochastic_gradient,
            &mut rng,
        )),
    };

    Ok(Classifier { kind, feature_names: matrix.column_names().to_vec(), scaler, state })
}

/// Scores every row of `matrix`: higher means more cancer-like. The matrix
/// must present exactly the feature names (and order) seen at fit time.
pub fn predict_scores(model: &Classifier, matrix: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
    if matrix.column_names() != model.feature_names.as_slice() {
        return Err(ModelError::FeatureMismatch {
            expected: model.feature_names.clone(),
            got: matrix.column_names().to_vec(),
        });
    }
    let n_cols = matrix.n_cols();
    let mut buf = vec![0.0; n_cols];
    let mut scores = Vec::with_capacity(matrix.n_rows());
    for i in 0..matrix.n_rows() {
        let raw = matrix.row(i);
        let x: &[f64] = match &model.scaler {
            Some(s) => {
                s.transform_row_into(raw, &mut buf);
                &buf
            }
            None => raw,
        };
        let score = match &model.state {
            FittedState::Network(net) => {
                let out = net.predict(x).map_err(|e| map_nnet_error(e, model.kind))?;
                out[0]
            }
            FittedState::Gbt(gbt) => gbt.predict_proba(x),
            FittedState::Forest(forest) => forest.predict_proba(x),
            FittedState::Svm(svm) => svm.decision_value(x),
            FittedState::Linear(linear) => linear.predict_proba(x),
            FittedState::Bayes(bayes) => bayes.posterior(x),
        };
        scores.push(score);
    }
    Ok(scores)
}
