//! `eslab`: train, evaluate and benchmark radio-card switching xApps.
//!
//! Exit codes: 0 success, 2 usage or configuration problem, 3 numeric failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eslab_core::harness::config::Preset;
use eslab_core::oracle::OracleMode;
use eslab_core::policies::PolicyKind;

#[derive(Parser, Debug)]
#[command(name = "eslab", version, about = "Energy-saving lab for O-RAN radio-card switching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one DQN xApp and write model.json, train_log.csv and meta.json.
    Train(TrainArgs),
    /// Greedy evaluation of a checkpoint on fresh layouts.
    Eval(EvalArgs),
    /// Run every policy to its fixed point on shared layouts.
    Bench(BenchArgs),
    /// Exhaustive maximum switch-off search on random layouts.
    Oracle(OracleArgs),
    /// Reward and loss moving averages from a training log.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// es1 (RSS + positions) or es2 (RSS only).
    #[arg(long)]
    pub xapp: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = "desk")]
    pub preset: Preset,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub episodes: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub csv: PathBuf,
    /// Defaults to the resolved config in meta.json next to the model.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub policies: Option<Vec<PolicyKind>>,
    #[arg(long, value_delimiter = ',')]
    pub ue_counts: Option<Vec<usize>>,
    #[arg(long)]
    pub sims: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Adds the exhaustive ASSOC optimum per layout.
    #[arg(long)]
    pub oracle: bool,
    /// Holds `es1_k{K}/model.json` and `es2_k{K}/model.json`.
    #[arg(long, default_value = "models")]
    pub models: PathBuf,
    #[arg(long, default_value = "desk")]
    pub preset: Preset,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub layouts: usize,
    #[arg(long, default_value = "assoc")]
    pub mode: OracleMode,
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    #[arg(long)]
    pub train_log: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub window: usize,
    #[arg(long)]
    pub svg: PathBuf,
}

fn init_threads() -> Result<(), commands::CliError> {
    let Ok(raw) = std::env::var("ES_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| commands::CliError::Usage(format!("ES_LAB_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n.max(1))
        .build_global()
        .map_err(|e| commands::CliError::Usage(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::Oracle(a) => commands::oracle(&a),
        Command::Plot(a) => commands::plot(&a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
