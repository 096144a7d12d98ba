//! `deepsad` command-line interface.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Preset;

#[derive(Debug, Parser)]
#[command(
    name = "deepsad",
    version,
    about = "Deep semi-supervised anomaly detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pre-train an autoencoder and write it to a model file.
    Pretrain(PretrainArgs),
    /// Train a detector and write it to a model file.
    Train(TrainArgs),
    /// Score rows with a stored model; reports AUC when labels are present.
    Score(ScoreArgs),
    /// Run a scenario grid and append result records.
    Scenario(ScenarioArgs),
    /// Tabular benchmark: stratified splits, several seeds, summary table.
    BenchmarkOdds(OddsArgs),
    /// Dense grid scores on 2-D toy data for plotting.
    DemoToy(ToyArgs),
    /// Summary table from a record file.
    Report(ReportArgs),
}

/// Hyperparameters shared by every command that trains something. Values are
/// layered: preset, then config file, then flags.
#[derive(Debug, Clone, Default, Args)]
pub struct SettingsArgs {
    /// Hyperparameter preset (default: full).
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Line-oriented config file with sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Network widths, e.g. 32-16-8 (last entry is the representation size).
    #[arg(long)]
    pub widths: Option<String>,
    #[arg(long)]
    pub no_batch_norm: bool,
    /// Total epochs for training and pre-training, split 1:2 between phases.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Total pre-training epochs, split 1:2 between phases.
    #[arg(long)]
    pub pretrain_epochs: Option<usize>,
    #[arg(long)]
    pub search_epochs: Option<usize>,
    #[arg(long)]
    pub finetune_epochs: Option<usize>,
    #[arg(long)]
    pub search_lr: Option<f64>,
    #[arg(long)]
    pub finetune_lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Weight decay λ.
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub clip_grad_norm: Option<f64>,
    /// Skip autoencoder pre-training for hypersphere methods.
    #[arg(long)]
    pub no_pretraining: bool,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub inverse_eps: Option<f64>,
    /// minmax, standardize or none.
    #[arg(long)]
    pub preprocessing: Option<String>,
    #[arg(long)]
    pub iforest_trees: Option<usize>,
    #[arg(long)]
    pub iforest_subsample: Option<usize>,
    #[arg(long)]
    pub kde_folds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    /// Training rows (CSV).
    #[arg(long)]
    pub data: PathBuf,
    /// Extra labeled rows (CSV with a `label` column); labels are ignored.
    #[arg(long)]
    pub labeled: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub settings: SettingsArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Unlabeled training rows (CSV). A `label` column is ignored.
    #[arg(long)]
    pub data: PathBuf,
    /// Labeled rows (CSV with `label` = +1 normal / -1 anomaly).
    #[arg(long)]
    pub labeled: Option<PathBuf>,
    /// deep-sad[:eta=..], one-class, soft-boundary[:nu=..], supervised, ae, kde, iforest.
    #[arg(long, default_value = "deep-sad")]
    pub method: String,
    /// Autoencoder model file to initialize the encoder from.
    #[arg(long)]
    pub pretrained: Option<PathBuf>,
    #[arg(long)]
    pub rep_dim: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub settings: SettingsArgs,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Score file (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Grid file. Dataset names resolve to `<name>_train.csv` and
    /// `<name>_test.csv` relative to the grid file.
    #[arg(long)]
    pub grid: PathBuf,
    /// Record file; existing records are kept and their cells skipped.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Summary grouping, comma-separated.
    #[arg(long, default_value = "method,gamma_l")]
    pub group_by: String,
    #[command(flatten)]
    pub settings: SettingsArgs,
}

#[derive(Debug, Args)]
pub struct OddsArgs {
    /// Labeled tabular datasets (CSV with a `label` column); named by file stem.
    #[arg(long, num_args = 1.., required = true)]
    pub data: Vec<PathBuf>,
    #[arg(long, default_value = "deep-sad")]
    pub methods: String,
    /// Seeds as a list and/or ranges, e.g. `0-9` or `0,3,5-7`.
    #[arg(long, default_value = "0-9")]
    pub seeds: String,
    /// Record file (overwritten).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary table file (default: standard output only).
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[command(flatten)]
    pub settings: SettingsArgs,
}

#[derive(Debug, Args)]
pub struct ToyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Grid points per axis.
    #[arg(long, default_value_t = 50)]
    pub resolution: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long, default_value = "method,gamma_l")]
    pub group_by: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Pretrain(a) => commands::pretrain(a),
        Command::Train(a) => commands::train(a),
        Command::Score(a) => commands::score(a),
        Command::Scenario(a) => commands::scenario(a),
        Command::BenchmarkOdds(a) => commands::benchmark_odds(a),
        Command::DemoToy(a) => commands::demo_toy(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
