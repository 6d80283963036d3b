mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lookahead_core::engine_probe::PlayoutMode;
use lookahead_core::experiments::{Algorithm, OutputFormat};
use lookahead_core::Heuristic;

/// Bad flags, config keys or parameter values; exits with status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "lookahead", version, about = "Critical win-loss game trees, lookahead search and pathology experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Flat key=value configuration file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads [default: number of cores].
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Directory for output files [default: out].
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Export the top plies of a generated tree as a DOT graph.
    GenTree(GenTreeArgs),
    /// Expected fraction of +1 nodes by depth, and its limits.
    Density(DensityArgs),
    /// Run one UCT or alpha-beta search on one generated tree.
    Search(SearchArgs),
    /// Sweep a parameter grid and report decision accuracy by budget.
    Experiment(ExperimentArgs),
    /// Check the prefix value tree leaf-sum identity and the naive planner.
    PvCheck(PvCheckArgs),
    /// Breadth-first exploration bound, with an optional verification run.
    Theorem(TheoremArgs),
    /// Measure critical rates and evaluation histograms with a UCI engine.
    Probe(ProbeArgs),
    /// Scripted UCI engine on standard input and output.
    #[command(hide = true)]
    MockEngine(MockEngineArgs),
}

#[derive(Debug, Args)]
pub struct TreeArgs {
    /// Critical rate in [0, 1].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Branching factor.
    #[arg(long)]
    pub b: Option<u32>,
    /// Maximum game depth.
    #[arg(long)]
    pub d_max: Option<u32>,
}

#[derive(Debug, Args)]
pub struct GenTreeArgs {
    #[command(flatten)]
    pub tree: TreeArgs,
    /// Plies to export.
    #[arg(long)]
    pub depth: Option<u32>,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    /// Critical rate in [0, 1].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Branching factor.
    #[arg(long)]
    pub b: Option<u32>,
    /// Print only the density at this depth.
    #[arg(long)]
    pub n: Option<u32>,
    /// Deepest row of the table.
    #[arg(long)]
    pub depth: Option<u32>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub tree: TreeArgs,
    /// uct or alphabeta.
    #[arg(long)]
    pub algo: Option<Algorithm>,
    /// perfect, gaussian[:sigma], hist:<name|file>, l1 or linf.
    #[arg(long)]
    pub heuristic: Option<Heuristic>,
    /// UCT exploration constant.
    #[arg(long)]
    pub c: Option<f64>,
    /// UCT iterations.
    #[arg(long)]
    pub budget: Option<u64>,
    /// Alpha-beta search depth.
    #[arg(long)]
    pub depth: Option<u32>,
    /// Write a per-iteration trace.csv (UCT only).
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// uct, alphabeta or random.
    #[arg(long)]
    pub algo: Option<Algorithm>,
    /// Critical rates.
    #[arg(long, value_delimiter = ',')]
    pub gamma: Option<Vec<f64>>,
    /// Branching factors.
    #[arg(long, value_delimiter = ',')]
    pub b: Option<Vec<u32>>,
    /// Exploration constants (UCT only).
    #[arg(long, value_delimiter = ',')]
    pub c: Option<Vec<f64>>,
    /// Heuristics.
    #[arg(long, value_delimiter = ',')]
    pub heuristic: Option<Vec<Heuristic>>,
    /// Ascending budgets; search depths for alphabeta.
    #[arg(long, value_delimiter = ',')]
    pub budgets: Option<Vec<u64>>,
    /// Maximum game depth.
    #[arg(long)]
    pub d_max: Option<u32>,
    /// Trees per cell.
    #[arg(long)]
    pub trees: Option<u32>,
    /// Output formats: csv, svg.
    #[arg(long, value_delimiter = ',')]
    pub format: Option<Vec<OutputFormat>>,
}

#[derive(Debug, Args)]
pub struct PvCheckArgs {
    /// Branching factor.
    #[arg(long)]
    pub b: Option<u32>,
    /// fixed:<k> or uniform:<max>.
    #[arg(long)]
    pub cost: Option<commands::CostArg>,
    /// Deepest leaf-sum depth checked.
    #[arg(long)]
    pub depth: Option<u32>,
    /// Trees checked for the leaf-sum identity.
    #[arg(long)]
    pub seeds: Option<u32>,
    /// Planner instances.
    #[arg(long)]
    pub instances: Option<u32>,
    /// Random playouts per root child.
    #[arg(long)]
    pub playouts: Option<u32>,
    /// Planner tree depth.
    #[arg(long)]
    pub d_max: Option<u32>,
}

#[derive(Debug, Args)]
pub struct TheoremArgs {
    /// Iteration budget; without it a table of budgets is printed.
    #[arg(long = "N", value_name = "N")]
    pub n: Option<u64>,
    /// Run UCT at the bound and check breadth-first growth.
    #[arg(long)]
    pub verify: bool,
    /// Branching factors for the verification run.
    #[arg(long, value_delimiter = ',')]
    pub b: Option<Vec<u32>>,
    /// Trees per branching factor.
    #[arg(long)]
    pub trees: Option<u32>,
    /// Maximum game depth.
    #[arg(long)]
    pub d_max: Option<u32>,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    /// sample, gamma, histogram or all.
    #[arg(long)]
    pub task: Option<commands::ProbeTask>,
    /// Engine executable [default: stockfish].
    #[arg(long, value_name = "PATH")]
    pub engine: Option<PathBuf>,
    /// Argument passed to the engine; repeatable.
    #[arg(long = "engine-arg", value_name = "ARG", allow_hyphen_values = true)]
    pub engine_args: Vec<String>,
    /// Use an in-process scripted engine instead of --engine.
    #[arg(long, value_name = "SCRIPT", conflicts_with = "replay")]
    pub mock: Option<PathBuf>,
    /// Replay a recorded transcript instead of running an engine.
    #[arg(long, value_name = "TRANSCRIPT")]
    pub replay: Option<PathBuf>,
    /// Probe these positions, one per line, instead of sampling.
    #[arg(long, value_name = "FILE")]
    pub positions: Option<PathBuf>,
    /// Sample positions to draw.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Random plies per sampled walk.
    #[arg(long)]
    pub plies: Option<u32>,
    /// light or heavy playouts.
    #[arg(long)]
    pub mode: Option<PlayoutMode>,
    /// Depth of the parent search.
    #[arg(long)]
    pub deep_depth: Option<u32>,
    /// Depth of each child search.
    #[arg(long)]
    pub child_depth: Option<u32>,
    /// Depth of heavy playout searches.
    #[arg(long)]
    pub heavy_depth: Option<u32>,
    /// Lines considered by heavy playouts.
    #[arg(long)]
    pub multipv: Option<u32>,
    /// Histogram bins.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Centipawn scale of the logistic mapping to [0, 1].
    #[arg(long)]
    pub cp_scale: Option<f64>,
    /// Per-reply timeout in milliseconds.
    #[arg(long)]
    pub timeout_ms: Option<u64>,
    /// Engine option override NAME=VALUE; repeatable.
    #[arg(long = "option", value_name = "NAME=VALUE")]
    pub options: Vec<String>,
    /// Write the full protocol transcript.
    #[arg(long)]
    pub transcript: bool,
}

#[derive(Debug, Args)]
pub struct MockEngineArgs {
    /// Script file; without one the engine answers synthetically.
    #[arg(long, value_name = "FILE")]
    pub script: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", error_chain(&e));
            ExitCode::from(exit_status(&e))
        }
    }
}

/// Causes joined by `: `, skipping causes a message already ends with.
fn error_chain(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.ends_with(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn exit_status(e: &anyhow::Error) -> u8 {
    use lookahead_core::Error;
    if e.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match e.downcast_ref::<Error>() {
        Some(Error::Io { .. } | Error::Probe(_)) => 2,
        Some(_) => 1,
        None => 2,
    }
}
