mod commands;
mod manifest;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

#[derive(Debug, Parser)]
#[command(name = "leasefair", version, about = "Rent-reduction decision support pipeline")]
pub struct Cli {
    /// Feature schema JSON. The shipped 25-feature schema when omitted.
    #[arg(long, global = true, env = "LEASEFAIR_SCHEMA")]
    pub schema: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct ForestArgs {
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long, default_value_t = 10)]
    pub min_split: usize,
}

#[derive(Debug, Clone, Args)]
pub struct MlpArgs {
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Duplicates {
    LastWins,
    FirstWins,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DirectionArg {
    Up,
    Down,
    Either,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample constraint-valid cases.
    GenCases {
        #[arg(long, default_value_t = 600)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one deed text per case into a directory.
    RenderDocs {
        #[arg(long)]
        cases: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Join a label CSV (`case_id,ordered,reduction_pct`) onto cases.
    IngestLabels {
        #[arg(long)]
        cases: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, value_enum, default_value_t = Duplicates::LastWins)]
        duplicates: Duplicates,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label cases with a synthetic oracle, optionally answering only some.
    OracleLabel {
        #[arg(long)]
        cases: PathBuf,
        /// Oracle JSON. The three-feature oracle when omitted.
        #[arg(long)]
        oracle: Option<PathBuf>,
        /// How many cases receive an answer; all when omitted.
        #[arg(long)]
        answered: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the simulated answers as a label CSV.
        #[arg(long)]
        labels_out: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the forest and write a model bundle.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        forest: ForestArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        background: usize,
        /// Attach a k-fold CV report for the forest.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate all six model families.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        forest: ForestArgs,
        #[command(flatten)]
        mlp: MlpArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Drop features whose mean |SHAP| falls below the threshold.
    Prune {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value_t = 1e-5)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Explain cases and emit a plot payload.
    Explain {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        cases: PathBuf,
        #[arg(long)]
        case_id: Option<String>,
        /// waterfall, force, beeswarm, dependence or decision.
        #[arg(long, default_value = "waterfall")]
        plot: String,
        /// Feature for dependence plots.
        #[arg(long)]
        feature: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Single-feature counterfactuals over the top-k features.
    Counterfactual {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        cases: PathBuf,
        #[arg(long)]
        case_id: Option<String>,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 0.10)]
        delta: f64,
        #[arg(long, value_enum, default_value_t = DirectionArg::Either)]
        direction: DirectionArg,
        #[arg(long, default_value_t = 101)]
        grid_points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, env = "LEASEFAIR_BUNDLE")]
        bundle: PathBuf,
        #[arg(long, env = "LEASEFAIR_ADDR", default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 0.10)]
        delta: f64,
        #[arg(long, default_value_t = 101)]
        grid_points: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "code": commands::error_code(&e), "message": format!("{e:#}") });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
