//! `signalflow`: simulate signalized networks, compare signal models, run
//! the error-bound experiments and optimize splits.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use signalflow_core::network::{Engine, SignalModel};

#[derive(Parser, Debug)]
#[command(name = "signalflow", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    config: RunConfig,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Run one scenario and write a CSV per link.
    Simulate,
    /// Run both signal models and report the count gap per signalized approach.
    Compare {
        /// Restrict the report to one approach link.
        #[arg(long)]
        link: Option<String>,
    },
    /// Count gap against cycle length (`--cycles`, default 60,30,15).
    Convergence {
        #[arg(long)]
        link: Option<String>,
    },
    /// Supply jumps behind a congested signalized exit.
    Jumps {
        /// Link lengths; with `--cycles` the grid is their product. Defaults
        /// to the reference grid of four cases.
        #[arg(long, value_delimiter = ',')]
        lengths: Option<Vec<f64>>,
    },
    /// Three-approach merge with a downstream bottleneck, for each cycle.
    Transient {
        #[arg(long, default_value_t = 1.0 / 3.0)]
        exit_capacity: f64,
    },
    /// Solve the split optimization and write the solution as JSON.
    Optimize(MilpArgs),
    /// Write the split optimization model in LP format.
    ExportLp(MilpArgs),
}

#[derive(Args, Debug, Clone)]
pub struct MilpArgs {
    /// Length of a split decision interval (s); defaults to the horizon.
    #[arg(long)]
    pub decision_interval: Option<f64>,
    /// Restrict continuum splits to these first-phase shares.
    #[arg(long, value_delimiter = ',')]
    pub split_set: Option<Vec<f64>>,
    /// Drop the rows holding every link's supply at capacity.
    #[arg(long)]
    pub allow_spillback: bool,
    #[arg(long, default_value_t = 200_000)]
    pub max_nodes: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Onoff,
    Continuum,
}

impl From<ModelArg> for SignalModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Onoff => SignalModel::OnOff,
            ModelArg::Continuum => SignalModel::Continuum,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineArg {
    Laxhopf,
    Ltm,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Laxhopf => Engine::LaxHopf,
            EngineArg::Ltm => Engine::Ltm,
        }
    }
}

/// Options shared by every subcommand. Unset overrides leave the scenario
/// file's values in place.
#[derive(Args, Debug, Clone, Serialize)]
pub struct RunConfig {
    /// Scenario JSON file.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub model: Option<ModelArg>,
    #[arg(long, global = true, value_enum)]
    pub engine: Option<EngineArg>,
    /// Time step (s).
    #[arg(long, global = true)]
    pub step: Option<f64>,
    /// Cycle lengths (s), comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub cycles: Option<Vec<f64>>,
    /// First-phase split of two-phase signals.
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    /// Signal offset (s).
    #[arg(long, global = true)]
    pub offset: Option<f64>,
    /// Simulated horizon (s).
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Recorded with the outputs; every command is deterministic.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

/// One failed assertion, reported in `failures.json`.
#[derive(Debug, Serialize)]
pub struct Failure {
    pub check: String,
    pub detail: String,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SIGNALFLOW_LOG", "warn")).init();
    let cli = Cli::parse();
    match commands::run(&cli.command, &cli.config) {
        Ok(failures) if failures.is_empty() => ExitCode::SUCCESS,
        Ok(failures) => {
            let text = serde_json::to_string_pretty(&failures).expect("failures serialize");
            eprintln!("{text}");
            let _ = std::fs::write(cli.config.out.join("failures.json"), text + "\n");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
