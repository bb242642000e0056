//! The four subcommands: describe, select, bench, and report.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;

use prescreen_core::dataset::{
    describe, join_relative_risks, load_patients, FeatureMatrix, RiskTable, RiskTableKind,
};
use prescreen_core::harness::{compare_models, run_benchmark, BenchmarkReport, ModelRanking};
use prescreen_core::select::{sweep, SelectionReport};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::figure;

/// Loads the dataset, derives the computed columns, and joins both risk
/// tables into the full feature matrix.
pub fn load_matrix(config: &ExperimentConfig) -> Result<FeatureMatrix, CliError> {
    config.validate_paths()?;
    let records = load_patients(&config.dataset, &config.schema)?;
    let age_table = RiskTable::load(&config.age_risk_table, RiskTableKind::AgeBased)?;
    let bmi_table = RiskTable::load(&config.bmi_risk_table, RiskTableKind::BmiBased)?;
    let matrix = join_relative_risks(&records, &age_table, &bmi_table)?;
    info!(
        "loaded {} rows x {} features from {}",
        matrix.n_rows(),
        matrix.n_cols(),
        config.dataset.display()
    );
    Ok(matrix)
}

fn write_artifact(dir: &Path, name: &str, bytes: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| {
        CliError::Config(format!("cannot create output directory {}: {e}", dir.display()))
    })?;
    let path = dir.join(name);
    fs::write(&path, bytes)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    info!("wrote {}", path.display());
    Ok(path)
}

/// `describe`: Table-1-style summary of the feature columns.
pub fn cmd_describe(config: &ExperimentConfig, columns: &[String]) -> Result<(), CliError> {
    let matrix = load_matrix(config)?;
    let mut rows = describe(&matrix)?;
    if !columns.is_empty() {
        for name in columns {
            if !rows.iter().any(|r| &r.name == name) {
                return Err(CliError::Config(format!("unknown column {name:?}")));
            }
        }
        rows.retain(|r| columns.contains(&r.name));
    }

    let mut csv = String::from("feature,mean,std,min,max\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{},{},{}\n", r.name, r.mean, r.std, r.min, r.max));
    }
    write_artifact(&config.output_dir, "describe.csv", &csv)?;

    let name_width = rows.iter().map(|r| r.name.len()).max().unwrap_or(7).max(7);
    println!("{:<name_width$}  {:>9}  {:>9}  {:>9}  {:>9}", "feature", "mean", "std", "min", "max");
    for r in &rows {
        println!(
            "{:<name_width$}  {:>9.2}  {:>9.2}  {:>9}  {:>9}",
            r.name, r.mean, r.std, r.min, r.max
        );
    }
    Ok(())
}

fn run_sweep(config: &ExperimentConfig, matrix: &FeatureMatrix) -> Result<SelectionReport, CliError> {
    Ok(sweep(matrix, &config.sweep)?)
}

/// Features whose sweep frequency reaches the configured fraction of the grid.
fn selected_features(config: &ExperimentConfig, report: &SelectionReport) -> Vec<String> {
    let cutoff = (config.selection_cutoff * report.rho_grid.len() as f64).ceil() as usize;
    report
        .rows
        .iter()
        .filter(|row| row.frequency >= cutoff.max(1))
        .map(|row| row.feature.clone())
        .collect()
}

/// `select`: run the threshold sweep, write the report, print the selection.
pub fn cmd_select(config: &ExperimentConfig) -> Result<(), CliError> {
    let matrix = load_matrix(config)?;
    let report = run_sweep(config, &matrix)?;
    write_artifact(&config.output_dir, "selection.csv", &report.to_csv_string())?;
    write_artifact(&config.output_dir, "selection.json", &report.to_json_string())?;

    let cutoff = (config.selection_cutoff * report.rho_grid.len() as f64).ceil() as usize;
    let selected = selected_features(config, &report);
    println!(
        "selected features (frequency >= {} of {}): {}",
        cutoff.max(1),
        report.rho_grid.len(),
        if selected.is_empty() { "none".to_string() } else { selected.join(", ") }
    );
    println!();
    println!("{:<16}  {:>9}  {:>8}  {:>8}  {:>8}", "feature", "frequency", "min_rho", "mean_rho", "std_rho");
    for row in &report.rows {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"));
        println!(
            "{:<16}  {:>9}  {:>8}  {:>8}  {:>8}",
            row.feature,
            row.frequency,
            fmt(row.min_rho),
            fmt(row.mean_rho),
            fmt(row.std_rho)
        );
    }
    Ok(())
}

fn print_ranking(ranking: &[ModelRanking]) {
    println!(
        "{:<5} {:<20}  {:>8}  {:>8}  {:>8}  {:>8}  {:>7}",
        "rank", "model", "mean", "std", "p2.5", "p97.5", "samples"
    );
    for row in ranking {
        println!(
            "{:<5} {:<20}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}  {:>7}",
            row.rank,
            row.kind,
            row.summary.mean,
            row.summary.std,
            row.summary.p2_5,
            row.summary.p97_5,
            row.summary.samples.len()
        );
    }
}

/// `bench`: cross-validate the configured kinds on the selected features and
/// write the summary CSV, full-sample JSON, and box-plot SVG.
pub fn cmd_bench(config: &ExperimentConfig) -> Result<(), CliError> {
    let matrix = load_matrix(config)?;

    let feature_names: Vec<String> = if config.features.is_empty() {
        let report = run_sweep(config, &matrix)?;
        let selected = selected_features(config, &report);
        if selected.is_empty() {
            return Err(CliError::Degenerate(
                "the selection sweep selected no features; pass an explicit feature list".into(),
            ));
        }
        info!("benchmarking sweep-selected features: {}", selected.join(", "));
        selected
    } else {
        config.features.clone()
    };
    let bench_matrix = matrix.select_columns(&feature_names)?;

    let mut plan = config.cv.clone();
    plan.n = bench_matrix.n_rows();
    let report = run_benchmark(&bench_matrix, &config.model_kinds, &plan, &config.models)?;

    write_artifact(&config.output_dir, "bench_summary.csv", &report.summary_csv()?)?;
    write_artifact(&config.output_dir, "bench_full.json", &report.to_json_string())?;
    write_artifact(&config.output_dir, "bench_boxplot.svg", &figure::box_plot(&report))?;

    println!("features: {}", feature_names.join(", "));
    if !report.skipped_folds.is_empty() {
        println!("skipped {} degenerate folds", report.skipped_folds.len());
    }
    print_ranking(&compare_models(&report)?);

    if !report.failed_models.is_empty() {
        let failures: Vec<String> = report
            .failed_models
            .iter()
            .map(|f| format!("{}: {}", f.kind, f.message))
            .collect();
        return Err(CliError::Training(format!(
            "training failed for {} (partial results written)",
            failures.join("; ")
        )));
    }
    Ok(())
}

/// `report`: merge one or more benchmark reports that share a dataset hash
/// into a single ranked table.
pub fn cmd_report(output_dir: &Path, inputs: &[PathBuf]) -> Result<(), CliError> {
    if inputs.is_empty() {
        return Err(CliError::Config("no report files given".into()));
    }
    let mut reports = Vec::with_capacity(inputs.len());
    for path in inputs {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let report = BenchmarkReport::from_json_str(&text)
            .map_err(|e| CliError::Config(format!("invalid report {}: {e}", path.display())))?;
        reports.push((path, report));
    }
    let (first_path, first) = &reports[0];
    for (path, report) in &reports[1..] {
        if report.dataset_hash != first.dataset_hash {
            return Err(CliError::MergeConflict(format!(
                "dataset hash mismatch: {} has {} but {} has {}",
                first_path.display(),
                first.dataset_hash,
                path.display(),
                report.dataset_hash
            )));
        }
    }

    let mut merged = first.clone();
    merged.models = Vec::new();
    merged.skipped_folds = Vec::new();
    merged.failed_models = Vec::new();
    for (path, report) in &reports {
        for model in &report.models {
            if merged.models.iter().any(|m| m.kind == model.kind) {
                return Err(CliError::MergeConflict(format!(
                    "model {} appears in more than one report (second copy in {})",
                    model.kind,
                    path.display()
                )));
            }
            merged.models.push(model.clone());
        }
        merged.skipped_folds.extend(report.skipped_folds.iter().cloned());
        merged.failed_models.extend(report.failed_models.iter().cloned());
    }

    let ranking = compare_models(&merged)?;
    write_artifact(output_dir, "report_merged.csv", &merged.summary_csv()?)?;
    print_ranking(&ranking);
    Ok(())
}
