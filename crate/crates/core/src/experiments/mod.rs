//! Grid sweeps measuring decision accuracy against search effort.
//!
//! A cell fixes every factor (critical rate, branching factor, exploration
//! constant, heuristic, algorithm). For each of `M` trees the cell records
//! whether the root decision at each budget is optimal. Accuracy `δ_i` is
//! the optimal fraction at budget `i` and the pathology index is
//! `δ_i / δ_baseline`, where the baseline is the first budget.

mod emit;
mod report;

use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use emit::{csv_string, emit_results, manifest_string, svg_string, OutputFormat, CSV_HEADER};
pub use report::{binomial_se, difference_se, pathology_report, CellSummary, PathologyReport};

use crate::error::{Error, Result};
use crate::heuristics::Heuristic;
use crate::rng;
use crate::search_minimax::{alphabeta, MinimaxConfig};
use crate::search_uct::{UctConfig, UctSearch};
use crate::tree_model::{node_meta, GameParams, NodePath};

pub const DEFAULT_BUDGETS: [u64; 5] = [10, 100, 1_000, 10_000, 100_000];
pub const DEFAULT_TREES: u32 = 500;
pub const DEFAULT_MAX_DEPTH: u32 = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Algorithm {
    Uct,
    /// Budgets are search depths.
    AlphaBeta,
    /// Uniformly random root decisions; a wiring control.
    Random,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Uct => "uct",
            Algorithm::AlphaBeta => "alphabeta",
            Algorithm::Random => "random",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Algorithm::Uct => 1,
            Algorithm::AlphaBeta => 2,
            Algorithm::Random => 3,
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "uct" => Ok(Algorithm::Uct),
            "alphabeta" | "ab" => Ok(Algorithm::AlphaBeta),
            "random" => Ok(Algorithm::Random),
            other => Err(Error::InvalidParams(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GridSpec {
    pub gammas: Vec<f64>,
    pub branching: Vec<u32>,
    pub explorations: Vec<f64>,
    pub heuristics: Vec<Heuristic>,
    pub budgets: Vec<u64>,
    pub max_depth: u32,
    pub trees: u32,
    pub master_seed: u64,
    pub algorithm: Algorithm,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            gammas: vec![0.9, 1.0],
            branching: vec![2, 5, 10],
            explorations: vec![0.1, 0.5, 1.0, 2.0, 5.0],
            heuristics: vec![
                Heuristic::bundled("chess_p10_light").expect("bundled"),
                Heuristic::bundled("chess_p10_heavy").expect("bundled"),
            ],
            budgets: DEFAULT_BUDGETS.to_vec(),
            max_depth: DEFAULT_MAX_DEPTH,
            trees: DEFAULT_TREES,
            master_seed: 0,
            algorithm: Algorithm::Uct,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        if self.trees < 1 {
            return bad("trees per cell must be at least 1");
        }
        if self.budgets.is_empty() {
            return bad("at least one budget is required");
        }
        if self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return bad("budgets must be strictly ascending");
        }
        if self.algorithm == Algorithm::Uct && self.budgets[0] != 10 {
            return bad("the first UCT budget must be 10 (the pathology-index baseline)");
        }
        if self.algorithm == Algorithm::AlphaBeta && self.budgets[0] < 1 {
            return bad("search depths must be at least 1");
        }
        if self.gammas.is_empty() || self.branching.is_empty() || self.heuristics.is_empty() {
            return bad("every factor needs at least one level");
        }
        if self.algorithm == Algorithm::Uct && self.explorations.is_empty() {
            return bad("UCT grids need at least one exploration constant");
        }
        for &g in &self.gammas {
            for &b in &self.branching {
                GameParams::new(b, g, self.max_depth, 0)?;
            }
        }
        Ok(())
    }

    /// Cells in a fixed order: γ, then b, then heuristic, then c.
    pub fn cells(&self) -> Vec<Cell> {
        let explorations: Vec<Option<f64>> = match self.algorithm {
            Algorithm::Uct => self.explorations.iter().copied().map(Some).collect(),
            _ => vec![None],
        };
        let mut cells = Vec::new();
        for &gamma in &self.gammas {
            for &branching in &self.branching {
                for heuristic in &self.heuristics {
                    for &exploration in &explorations {
                        cells.push(Cell {
                            gamma,
                            branching,
                            exploration,
                            heuristic: heuristic.clone(),
                            algorithm: self.algorithm,
                            max_depth: self.max_depth,
                            budgets: self.budgets.clone(),
                            trees: self.trees,
                            master_seed: self.master_seed,
                        });
                    }
                }
            }
        }
        cells
    }
}

/// One grid point.
#[derive(Clone, Debug)]
pub struct Cell {
    pub gamma: f64,
    pub branching: u32,
    /// Only meaningful for UCT.
    pub exploration: Option<f64>,
    pub heuristic: Heuristic,
    pub algorithm: Algorithm,
    pub max_depth: u32,
    pub budgets: Vec<u64>,
    pub trees: u32,
    pub master_seed: u64,
}

impl Cell {
    /// Seed of tree `t`. It depends only on the game factors, so every
    /// search configuration in a sweep faces the same games.
    pub fn tree_seed(&self, t: u32) -> u64 {
        rng::derive_seed(&[
            self.master_seed,
            self.gamma.to_bits(),
            u64::from(self.branching),
            u64::from(self.max_depth),
            u64::from(t),
        ])
    }

    /// Seed for the search randomness on tree `t`; depends on the full cell.
    pub fn search_seed(&self, t: u32) -> u64 {
        let label_hash = self
            .heuristic
            .label()
            .bytes()
            .fold(0u64, |h, b| rng::mix64(h ^ u64::from(b)));
        rng::derive_seed(&[
            self.tree_seed(t),
            self.exploration.map_or(u64::MAX, f64::to_bits),
            label_hash,
            self.algorithm.tag(),
        ])
    }

    pub fn game(&self, t: u32) -> Result<GameParams> {
        GameParams::new(self.branching, self.gamma, self.max_depth, self.tree_seed(t))
    }
}

/// Chooses a root action for each budget.
pub trait Decider: Sync {
    fn decide(&self, cell: &Cell, params: &GameParams, search_seed: u64) -> Result<Vec<u32>>;
}

/// The decider implied by the cell's algorithm.
pub struct CellDecider;

impl Decider for CellDecider {
    fn decide(&self, cell: &Cell, params: &GameParams, search_seed: u64) -> Result<Vec<u32>> {
        match cell.algorithm {
            Algorithm::Uct => {
                let budget = *cell.budgets.last().expect("validated");
                let config = UctConfig::new(cell.exploration.unwrap_or(1.0), budget, cell.heuristic.clone(), search_seed)
                    .with_checkpoints(cell.budgets.clone());
                let result = UctSearch::new(params, &config)?.run();
                Ok(result.checkpoints.iter().map(|c| c.action).collect())
            }
            Algorithm::AlphaBeta => cell
                .budgets
                .iter()
                .map(|&depth| {
                    let cfg = MinimaxConfig {
                        depth: depth as u32,
                        heuristic: cell.heuristic.clone(),
                        seed: search_seed,
                    };
                    alphabeta(params, &NodePath::root(), &cfg).map(|o| o.best_action)
                })
                .collect(),
            Algorithm::Random => {
                let mut r = rng::stream_rng(search_seed);
                Ok(cell
                    .budgets
                    .iter()
                    .map(|_| r.random_range(0..params.branching()))
                    .collect())
            }
        }
    }
}

/// Per-tree outcomes of one cell.
#[derive(Clone, Debug)]
pub struct CellRecords {
    pub cell: Cell,
    /// `correct[t][i]`: decision on tree `t` at budget `i` was optimal.
    pub correct: Vec<Vec<bool>>,
    /// Sum of per-tree compute times.
    pub compute_time: Duration,
}

fn run_tree(cell: &Cell, t: u32, decider: &dyn Decider) -> Result<(Vec<bool>, Duration)> {
    let start = Instant::now();
    let params = cell.game(t)?;
    let optimal = node_meta(&params, &NodePath::root())?.optimal_moves;
    let actions = decider.decide(cell, &params, cell.search_seed(t))?;
    let correct = actions.iter().map(|a| optimal.contains(a)).collect();
    Ok((correct, start.elapsed()))
}

pub fn run_cell(cell: &Cell) -> Result<CellRecords> {
    run_cell_with(cell, &CellDecider)
}

pub fn run_cell_with(cell: &Cell, decider: &dyn Decider) -> Result<CellRecords> {
    let outcomes = (0..cell.trees)
        .map(|t| run_tree(cell, t, decider))
        .collect::<Result<Vec<_>>>()?;
    Ok(collect_cell(cell.clone(), outcomes))
}

fn collect_cell(cell: Cell, outcomes: Vec<(Vec<bool>, Duration)>) -> CellRecords {
    let compute_time = outcomes.iter().map(|(_, d)| *d).sum();
    CellRecords {
        cell,
        correct: outcomes.into_iter().map(|(c, _)| c).collect(),
        compute_time,
    }
}

/// Runs every cell with (cell, tree) tasks spread over `workers` threads.
/// Results are reduced by index, so they do not depend on scheduling.
pub fn run_grid(spec: &GridSpec, workers: usize) -> Result<Vec<CellRecords>> {
    run_cells(&spec.cells(), workers, &CellDecider, spec)
}

pub fn run_cells(cells: &[Cell], workers: usize, decider: &dyn Decider, spec: &GridSpec) -> Result<Vec<CellRecords>> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParams(format!("worker pool: {e}")))?;
    let tasks: Vec<(usize, u32)> = cells
        .iter()
        .enumerate()
        .flat_map(|(i, c)| (0..c.trees).map(move |t| (i, t)))
        .collect();
    let outcomes = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(i, t)| run_tree(&cells[i], t, decider))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut outcomes = outcomes.into_iter();
    Ok(cells
        .iter()
        .map(|cell| {
            let chunk: Vec<_> = outcomes.by_ref().take(cell.trees as usize).collect();
            collect_cell(cell.clone(), chunk)
        })
        .collect())
}

/// Smallest exploration constant that forces UCT with budget `n` to grow
/// its tree breadth-first: `sqrt(n^3 / (2 ln n))`.
pub fn theorem_c_bound(n: u64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParams(format!("budget must be at least 2, got {n}")));
    }
    let n = n as f64;
    Ok((n.powi(3) / (2.0 * n.ln())).sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct TheoremReport {
    pub budget: u64,
    pub exploration: f64,
    pub branching: u32,
    pub trees: u32,
    /// Fraction of runs whose final tree passed the breadth-first check.
    pub breadth_first_rate: f64,
    pub max_sibling_gap: u64,
    pub accuracy: f64,
    pub se: f64,
}

/// UCT at the breadth-first exploration bound with perfect evaluations on
/// `γ = 1` games.
pub fn theorem_experiment(
    branching: u32,
    budget: u64,
    trees: u32,
    max_depth: u32,
    master_seed: u64,
    workers: usize,
) -> Result<TheoremReport> {
    let exploration = theorem_c_bound(budget)?;
    let cell = Cell {
        gamma: 1.0,
        branching,
        exploration: Some(exploration),
        heuristic: Heuristic::Perfect,
        algorithm: Algorithm::Uct,
        max_depth,
        budgets: vec![budget],
        trees,
        master_seed,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParams(format!("worker pool: {e}")))?;
    let runs = pool.install(|| {
        (0..trees)
            .into_par_iter()
            .map(|t| -> Result<(bool, u64, bool)> {
                let params = cell.game(t)?;
                let optimal = node_meta(&params, &NodePath::root())?.optimal_moves;
                let config = UctConfig::new(exploration, budget, Heuristic::Perfect, cell.search_seed(t))
                    .with_checkpoints(vec![budget]);
                let result = UctSearch::new(&params, &config)?.run();
                let action = result.final_action().expect("one checkpoint");
                Ok((
                    result.breadth_first.holds,
                    result.breadth_first.max_sibling_gap,
                    optimal.contains(&action),
                ))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let m = f64::from(trees);
    let accuracy = runs.iter().filter(|r| r.2).count() as f64 / m;
    Ok(TheoremReport {
        budget,
        exploration,
        branching,
        trees,
        breadth_first_rate: runs.iter().filter(|r| r.0).count() as f64 / m,
        max_sibling_gap: runs.iter().map(|r| r.1).max().unwrap_or(0),
        accuracy,
        se: binomial_se(accuracy, trees),
    })
}
