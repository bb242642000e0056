//! Command-line entry point for the pre-screening benchmark pipeline.
//!
//! Subcommands: `describe` (dataset summary), `select` (correlation-threshold
//! feature-selection sweep), `bench` (Monte Carlo cross-validation of the
//! model zoo, with a box-plot figure), and `report` (merge benchmark
//! reports). Every command honors `--seed`; identical invocations produce
//! byte-identical artifacts regardless of `--workers`.
//!
//! Exit codes: 0 success, 2 config or input error, 3 degenerate data,
//! 4 training failure, 5 merge conflict. Set `PRESCREEN_LOG=info` (or any
//! `env_logger` filter) for progress logging on stderr.

mod commands;
mod config;
mod error;
mod figure;

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use prescreen_core::models::ModelKind;

use config::{parse_rho_grid, ExperimentConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "prescreen", version, about = "Blood-marker pre-screening benchmark")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Experiment config file (default: ./prescreen.toml when present).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override (applies to selection and cross-validation).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: machine parallelism). Output bytes do not
    /// depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Summarize feature columns (mean, std, min, max).
    Describe {
        /// Restrict the summary to these columns.
        #[arg(long, value_delimiter = ',')]
        columns: Vec<String>,
    },
    /// Run the correlation-threshold selection sweep.
    Select {
        /// Correlation grid as start:stop:step (e.g. 0.01:0.99:0.01).
        #[arg(long)]
        rho_grid: Option<String>,
    },
    /// Cross-validate the model zoo on the selected features.
    Bench {
        /// Comma-separated model kinds (default: all eight).
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
        /// Folds per repetition.
        #[arg(long)]
        k: Option<usize>,
        /// Monte Carlo repetitions.
        #[arg(long)]
        repetitions: Option<usize>,
        /// Correlation grid for the implicit selection sweep.
        #[arg(long)]
        rho_grid: Option<String>,
    },
    /// Merge benchmark reports that share a dataset hash.
    Report {
        /// Full-sample JSON report files.
        inputs: Vec<PathBuf>,
    },
}

fn load_config(common: &CommonArgs) -> Result<ExperimentConfig, CliError> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let default_path = Path::new("prescreen.toml");
            if default_path.exists() {
                ExperimentConfig::load(default_path)?
            } else {
                ExperimentConfig::default()
            }
        }
    };
    if let Some(seed) = common.seed {
        config.sweep.seed = seed;
        config.cv.seed = seed;
    }
    if let Some(out) = &common.out {
        config.output_dir = out.clone();
    }
    Ok(config)
}

fn parse_models(names: &[String]) -> Result<Vec<ModelKind>, CliError> {
    names
        .iter()
        .map(|name| ModelKind::from_str(name).map_err(CliError::Config))
        .collect()
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Describe { columns } => {
            let config = load_config(&cli.common)?;
            commands::cmd_describe(&config, columns)
        }
        Command::Select { rho_grid } => {
            let mut config = load_config(&cli.common)?;
            if let Some(text) = rho_grid {
                config.sweep.rho_grid = parse_rho_grid(text)?;
            }
            config.validate()?;
            commands::cmd_select(&config)
        }
        Command::Bench { models, k, repetitions, rho_grid } => {
            let mut config = load_config(&cli.common)?;
            if let Some(text) = rho_grid {
                config.sweep.rho_grid = parse_rho_grid(text)?;
            }
            if !models.is_empty() {
                config.model_kinds = parse_models(models)?;
            }
            if let Some(k) = k {
                config.cv.k = *k;
            }
            if let Some(repetitions) = repetitions {
                config.cv.repetitions = *repetitions;
            }
            config.validate()?;
            commands::cmd_bench(&config)
        }
        Command::Report { inputs } => {
            let out = cli
                .common
                .out
                .clone()
                .unwrap_or_else(|| load_config(&cli.common).map(|c| c.output_dir).unwrap_or_else(|_| PathBuf::from("out")));
            commands::cmd_report(&out, inputs)
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("PRESCREEN_LOG")).init();
    let cli = Cli::parse();
    if let Some(workers) = cli.common.workers {
        if let Err(e) =
            rayon::ThreadPoolBuilder::new().num_threads(workers).build_global()
        {
            eprintln!("error: cannot configure {workers} workers: {e}");
            std::process::exit(2);
        }
    }
    match run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
