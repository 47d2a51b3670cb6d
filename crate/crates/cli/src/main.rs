//! `cann` command-line interface.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "cann", version, about = "Correlation-aided neural network experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Encode a CSV file and export the numeric dataset as JSON.
    Encode(EncodeArgs),
    /// Measure feature/class correlations and write an importance file.
    Importance(ImportanceArgs),
    /// Train one network and write the model plus a per-epoch log.
    Train(TrainArgs),
    /// Run repeated paired trials of the plain and correlation-aided nets.
    Bench(BenchArgs),
    /// Test accuracy against training-set fraction for both methods.
    Curve(CurveArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// CSV data file.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON schema declaring column types and the class column.
    #[arg(long)]
    pub schema: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Full,
    Train,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Plain,
    Cann,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NetArgs {
    /// Learning rate.
    #[arg(long = "learning-rate", default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    /// Hidden layer widths, comma separated; defaults to max(4, ceil((K + C) / 2)).
    #[arg(long, value_delimiter = ',')]
    pub hidden: Vec<usize>,
    /// Base seed; every other seed is derived from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Initial weights are uniform in [-init-range, init-range].
    #[arg(long = "init-range", default_value_t = 0.5)]
    pub init_range: f64,
    /// Blend weight of the data error against the correlation error.
    #[arg(long, default_value_t = cann::cann::DEFAULT_BLEND)]
    pub p: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EncodeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ImportanceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// Measure on every row, or on the training rows of a seeded split.
    #[arg(long, value_enum, default_value_t = Scope::Full)]
    pub scope: Scope,
    /// Split seed, required with `--scope train`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Split fraction, required with `--scope train`.
    #[arg(long = "train-fraction")]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Cann)]
    pub method: MethodArg,
    /// Importance file; required for `--method cann` unless `--p 1`.
    #[arg(long)]
    pub importance: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub net: NetArgs,
    /// Train on a seeded split instead of every row.
    #[arg(long = "train-fraction")]
    pub train_fraction: Option<f64>,
    /// Model output; the log goes to `<out>.log.csv` unless `--log` is given.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// Fixed importance file; otherwise correlations are measured per `--importance-scope`.
    #[arg(long)]
    pub importance: Option<PathBuf>,
    #[arg(long = "importance-scope", value_enum, default_value_t = Scope::Train)]
    pub importance_scope: Scope,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Training fraction of each split.
    #[arg(long, default_value_t = 0.5)]
    pub fraction: f64,
    /// Also run the plain baseline on the top chi-squared features.
    #[arg(long = "keep-fraction")]
    pub keep_fraction: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub net: NetArgs,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
    /// Overwrite an output directory holding a different run.
    #[arg(long)]
    #[serde(skip)]
    pub force: bool,
    /// Parallel trials; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    #[serde(skip)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CurveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub importance: Option<PathBuf>,
    #[arg(long = "importance-scope", value_enum, default_value_t = Scope::Train)]
    pub importance_scope: Scope,
    /// Increasing training fractions, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub fractions: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub net: NetArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    #[serde(skip)]
    pub jobs: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Encode(a) => commands::encode(&a),
        Command::Importance(a) => commands::importance(&a),
        Command::Train(a) => commands::train(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::Curve(a) => commands::curve(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Exits with a clap usage error (status 2).
pub(crate) fn usage_error(message: impl std::fmt::Display) -> ! {
    use clap::CommandFactory;
    Cli::command()
        .error(clap::error::ErrorKind::MissingRequiredArgument, message)
        .exit()
}
