//! `sliceforge`: generate traffic, train the slice predictor, run scenarios and
//! report on the results.
//!
//! Exit codes: 0 success, 2 input or configuration error, 3 data error,
//! 4 model/scenario incompatibility.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            code: 3,
            message: message.into(),
        }
    }

    pub fn compatibility(message: impl Into<String>) -> Self {
        CliError {
            code: 4,
            message: message.into(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "sliceforge",
    version,
    about = "Network-slice admission simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic request stream in the dataset CSV format.
    GenTraffic(GenTrafficArgs),
    /// Train the slice predictor and print its held-out report.
    Train(TrainArgs),
    /// Train per-slice load forecasters from a samples file.
    TrainForecaster(TrainForecasterArgs),
    /// Run a scenario (preset name or TOML file).
    Simulate(SimulateArgs),
    /// Compute classification metrics from a truth,predicted CSV.
    Evaluate(EvaluateArgs),
    /// Export one series from a samples file for plotting.
    Report(ReportArgs),
}

#[derive(Args)]
pub struct GenTrafficArgs {
    /// Scenario or traffic TOML file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in scenario whose traffic to generate.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Override the number of requests.
    #[arg(long)]
    pub total: Option<u64>,
    #[arg(long, env = "SLICEFORGE_SEED")]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Fraction of each class used for training.
    #[arg(long, default_value_t = 0.65)]
    pub split: f64,
    #[arg(long, env = "SLICEFORGE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    /// Replace the first hidden layer with a 1-D convolution of this many channels.
    #[arg(long)]
    pub conv_channels: Option<usize>,
    #[arg(long, default_value_t = 5, requires = "conv_channels")]
    pub conv_kernel: usize,
    /// Flip this fraction of training-split labels; the held-out split stays clean.
    #[arg(long, default_value_t = 0.0)]
    pub label_noise: f64,
    /// Take encoding bounds from this scenario file instead of the defaults.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args)]
pub struct TrainForecasterArgs {
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 12)]
    pub window: usize,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, env = "SLICEFORGE_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Preset name or scenario file.
    #[arg(long)]
    pub scenario: String,
    /// `oracle` or a predictor checkpoint; defaults to the scenario's setting.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Override the traffic seed.
    #[arg(long, env = "SLICEFORGE_SEED")]
    pub seed: Option<u64>,
    /// Multiply the request count (e.g. 0.1 for a tenth).
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub json: bool,
    /// Also show the micro-averaged score.
    #[arg(long)]
    pub micro: bool,
}

#[derive(Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub samples: PathBuf,
    /// active-users, utilization or counters.
    #[arg(long, default_value = "active-users")]
    pub kind: String,
    /// Drop rows before this many hours.
    #[arg(long, default_value_t = 1.0)]
    pub skip_warmup: f64,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenTraffic(a) => commands::gen_traffic(a),
        Command::Train(a) => commands::train(a),
        Command::TrainForecaster(a) => commands::train_forecaster(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
