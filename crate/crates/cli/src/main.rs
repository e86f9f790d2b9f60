use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use dqgp_cli::{cmd_classify, cmd_eval, cmd_predict, cmd_synth, cmd_train, CliError, RunConfig};

/// Pose-trajectory modeling pipeline: generate a synthetic dataset, train
/// per-condition motion models, classify streaming trajectories, predict
/// the remaining motion, and gate the results.
#[derive(Parser)]
#[command(name = "dqgp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline output directory (fixed file names inside).
    #[arg(long)]
    out: PathBuf,
    /// Flat TOML config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override any config key, e.g. --set repetitions=5.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic trajectory dataset.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Split the dataset and fit one model per condition.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Stream every held-out trajectory through the classifier.
    Classify {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate post-nomination velocity predictions and rollouts.
    Predict {
        #[command(flatten)]
        common: Common,
        /// Predict with true labels from step 0 instead of classification
        /// outcomes.
        #[arg(long)]
        oracle_labels: bool,
    },
    /// Merge reports, check thresholds, and write summary.json.
    Eval {
        #[command(flatten)]
        common: Common,
    },
}

fn run() -> Result<bool, CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Synth { common } => {
            let config = resolve(&common)?;
            cmd_synth(&config, &common.out)?;
            Ok(true)
        }
        Command::Train { common } => {
            let config = resolve(&common)?;
            cmd_train(&config, &common.out)?;
            Ok(true)
        }
        Command::Classify { common } => {
            let config = resolve(&common)?;
            cmd_classify(&config, &common.out)?;
            Ok(true)
        }
        Command::Predict { common, oracle_labels } => {
            let mut config = resolve(&common)?;
            if oracle_labels {
                config.oracle_labels = true;
            }
            cmd_predict(&config, &common.out)?;
            Ok(true)
        }
        Command::Eval { common } => {
            let config = resolve(&common)?;
            cmd_eval(&config, &common.out)
        }
    }
}

fn resolve(common: &Common) -> Result<RunConfig, CliError> {
    RunConfig::resolve(common.config.as_deref(), &common.sets, common.seed)
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(2)
        }
    }
}
