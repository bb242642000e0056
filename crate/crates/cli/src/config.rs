//! The experiment configuration file: one TOML document that drives every
//! subcommand. Unknown keys are rejected, and the whole structure round-trips
//! through serialization losslessly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use prescreen_core::dataset::ColumnSchema;
use prescreen_core::harness::CvPlan;
use prescreen_core::models::{ModelKind, ModelSettings};
use prescreen_core::select::SweepConfig;

use crate::error::CliError;

/// Everything a run needs: input paths, schema mapping, sweep and
/// cross-validation settings, per-kind hyperparameters, and the output
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Clinical dataset CSV.
    pub dataset: PathBuf,
    /// Age-banded relative-risk table CSV.
    pub age_risk_table: PathBuf,
    /// BMI-banded relative-risk table CSV.
    pub bmi_risk_table: PathBuf,
    /// Directory that receives every artifact.
    pub output_dir: PathBuf,
    /// Explicit feature list for benchmarking; empty means "derive from the
    /// selection sweep".
    pub features: Vec<String>,
    /// Model kinds benchmarked by `bench`.
    pub model_kinds: Vec<ModelKind>,
    /// A feature is "selected" when its sweep frequency reaches this fraction
    /// of the grid.
    pub selection_cutoff: f64,
    /// CSV header mapping.
    pub schema: ColumnSchema,
    /// Selection sweep settings.
    pub sweep: SweepConfig,
    /// Cross-validation plan; `n` is derived from the dataset and must stay 0.
    pub cv: CvPlan,
    /// Per-kind hyperparameters.
    pub models: ModelSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("data/coimbra.csv"),
            age_risk_table: PathBuf::from("data/rr_age_gbd.csv"),
            bmi_risk_table: PathBuf::from("data/rr_bmi_liu.csv"),
            output_dir: PathBuf::from("out"),
            features: Vec::new(),
            model_kinds: ModelKind::ALL.to_vec(),
            selection_cutoff: 0.5,
            schema: ColumnSchema::default(),
            sweep: SweepConfig::default(),
            cv: CvPlan { n: 0, ..CvPlan::default() },
            models: ModelSettings::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates a config file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let config: ExperimentConfig = toml::from_str(&text).map_err(|e| {
            CliError::Config(format!("invalid config {}: {e}", path.display()))
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Checks invariants that do not require reading the data files.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.cv.n != 0 {
            return Err(CliError::Config(
                "cv.n is derived from the dataset; leave it unset".into(),
            ));
        }
        if !(self.selection_cutoff > 0.0 && self.selection_cutoff <= 1.0) {
            return Err(CliError::Config(format!(
                "selection_cutoff must be in (0, 1], got {}",
                self.selection_cutoff
            )));
        }
        if self.model_kinds.is_empty() {
            return Err(CliError::Config("model_kinds must not be empty".into()));
        }
        for (i, kind) in self.model_kinds.iter().enumerate() {
            if self.model_kinds[..i].contains(kind) {
                return Err(CliError::Config(format!("duplicate model kind {kind}")));
            }
        }
        self.sweep
            .validate()
            .map_err(|e| CliError::Config(format!("invalid sweep settings: {e}")))?;
        Ok(())
    }

    /// Checks that every referenced input path exists.
    pub fn validate_paths(&self) -> Result<(), CliError> {
        for (label, path) in [
            ("dataset", &self.dataset),
            ("age_risk_table", &self.age_risk_table),
            ("bmi_risk_table", &self.bmi_risk_table),
        ] {
            if !path.exists() {
                return Err(CliError::Config(format!(
                    "{label} file not found: {}",
                    path.display()
                )));
            }
        }
        Ok(())
    }

}

/// Parses a `start:stop:step` correlation grid, inclusive of `stop` up to a
/// half-step rounding slack.
pub fn parse_rho_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Config(format!(
            "rho grid must be start:stop:step, got {text:?}"
        )));
    }
    let parse = |s: &str, what: &str| {
        s.parse::<f64>().map_err(|_| {
            CliError::Config(format!("rho grid {what} is not a number: {s:?}"))
        })
    };
    let start = parse(parts[0], "start")?;
    let stop = parse(parts[1], "stop")?;
    let step = parse(parts[2], "step")?;
    if !(start > 0.0 && stop < 1.0 && start <= stop) {
        return Err(CliError::Config(format!(
            "rho grid bounds must satisfy 0 < start <= stop < 1, got {start}:{stop}"
        )));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(CliError::Config(format!("rho grid step must be positive, got {step}")));
    }
    let mut grid = Vec::new();
    let mut i = 0usize;
    loop {
        let value = start + step * i as f64;
        if value > stop + step * 0.5 {
            break;
        }
        grid.push(value.min(stop));
        i += 1;
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_losslessly() {
        let config = ExperimentConfig::default();
        let text = toml::to_string_pretty(&config).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<ExperimentConfig>("selektion_cutoff = 0.5\n").unwrap_err();
        assert!(err.to_string().contains("selektion_cutoff"));
        assert!(toml::from_str::<ExperimentConfig>("[sweep]\nrho_gird = [0.5]\n").is_err());
    }

    #[test]
    fn partial_configs_inherit_defaults() {
        let config: ExperimentConfig =
            toml::from_str("dataset = \"other.csv\"\n[cv]\nk = 5\n").unwrap();
        assert_eq!(config.dataset, PathBuf::from("other.csv"));
        assert_eq!(config.cv.k, 5);
        assert_eq!(config.cv.repetitions, 100);
        assert_eq!(config.model_kinds.len(), 8);
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut config = ExperimentConfig::default();
        config.selection_cutoff = 0.0;
        assert!(config.validate().is_err());
        let mut config = ExperimentConfig::default();
        config.cv.n = 10;
        assert!(config.validate().is_err());
        let mut config = ExperimentConfig::default();
        config.model_kinds = vec![ModelKind::Svm, ModelKind::Svm];
        assert!(config.validate().is_err());
    }

    #[test]
    fn rho_grid_parses_inclusive_ranges() {
        let grid = parse_rho_grid("0.1:0.5:0.1").unwrap();
        assert_eq!(grid.len(), 5);
        assert!((grid[0] - 0.1).abs() < 1e-12);
        assert!((grid[4] - 0.5).abs() < 1e-12);
        let single = parse_rho_grid("0.5:0.5:0.01").unwrap();
        assert_eq!(single, vec![0.5]);
        let default_like = parse_rho_grid("0.01:0.99:0.01").unwrap();
        assert_eq!(default_like.len(), 99);
    }

    #[test]
    fn rho_grid_rejects_malformed_input() {
        for bad in ["", "0.1:0.9", "0.1:0.9:0", "a:b:c", "0:0.9:0.1", "0.5:1.0:0.1", "0.9:0.1:0.1"] {
            assert!(parse_rho_grid(bad).is_err(), "accepted {bad:?}");
        }
    }
}
