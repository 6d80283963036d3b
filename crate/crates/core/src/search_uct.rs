//! UCT over a lazily generated critical win-loss tree.
//!
//! Rewards live on the `[0, 1]` scale from Max's point of view. Min nodes
//! select with `1 - Q̄`, which is the negamax transformation on this scale.
//! Each iteration descends by UCB1, adds at most one node, evaluates it
//! (true utility at terminals, the heuristic elsewhere) and backs the reward
//! up as a running mean.

use std::io::{self, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heuristics::{EvalContext, Heuristic};
use crate::rng;
use crate::tree_model::{GameParams, NodeCursor, NodePath, Player};

const UNTRACKED: u32 = u32::MAX;

/// UCB1 priority of a child.
///
/// Unvisited children score `+inf`. Otherwise the value term (`q` for Max,
/// `1 - q` for Min) plus `c * sqrt(ln(n_parent) / n_child)`.
pub fn ucb_score(q_child: f64, n_child: u64, n_parent: u64, c: f64, perspective: Player) -> f64 {
    if n_child == 0 {
        return f64::INFINITY;
    }
    let value = match perspective {
        Player::Max => q_child,
        Player::Min => 1.0 - q_child,
    };
    value + c * ((n_parent as f64).ln() / n_child as f64).sqrt()
}

/// Running-mean backup: returns `(n Q̄ + R) / (n + 1)`.
#[inline]
pub fn backup_mean(mean: f64, visits: u64, reward: f64) -> f64 {
    (visits as f64 * mean + reward) / (visits as f64 + 1.0)
}

#[derive(Clone, Debug)]
pub struct UctConfig {
    pub exploration: f64,
    pub budget: u64,
    /// Ascending iteration counts at which the root decision is recorded.
    pub checkpoints: Vec<u64>,
    pub heuristic: Heuristic,
    pub seed: u64,
}

impl UctConfig {
    /// Config with checkpoints at every power of ten up to `budget`, plus
    /// `budget` itself.
    pub fn new(exploration: f64, budget: u64, heuristic: Heuristic, seed: u64) -> UctConfig {
        UctConfig {
            exploration,
            budget,
            checkpoints: default_checkpoints(budget),
            heuristic,
            seed,
        }
    }

    pub fn with_checkpoints(mut self, checkpoints: Vec<u64>) -> UctConfig {
        self.checkpoints = checkpoints;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget < 1 {
            return Err(Error::InvalidParams("budget must be at least 1".into()));
        }
        if !self.exploration.is_finite() || self.exploration < 0.0 {
            return Err(Error::InvalidParams(format!(
                "exploration constant must be finite and non-negative, got {}",
                self.exploration
            )));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParams("checkpoints must be strictly ascending".into()));
        }
        if let Some(&bad) = self.checkpoints.iter().find(|&&c| c < 1 || c > self.budget) {
            return Err(Error::InvalidParams(format!(
                "checkpoint {bad} outside [1, {}]",
                self.budget
            )));
        }
        Ok(())
    }
}

pub fn default_checkpoints(budget: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut c = 10;
    while c <= budget {
        out.push(c);
        c *= 10;
    }
    if out.last() != Some(&budget) {
        out.push(budget);
    }
    out
}

#[derive(Clone, Debug)]
struct Node {
    cursor: NodeCursor,
    visits: u64,
    mean: f64,
    /// Offset of this node's child slots, or `UNTRACKED` before the first
    /// descent through it.
    children: u32,
}

/// Search tree keyed implicitly by path. Node 0 is the root.
#[derive(Clone, Debug)]
pub struct SearchTree {
    branching: u32,
    max_depth: u32,
    nodes: Vec<Node>,
    slots: Vec<u32>,
}

/// Visit count and mean of one child; `mean` is `None` for untracked nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChildStats {
    pub visits: u64,
    pub mean: Option<f64>,
}

impl SearchTree {
    fn new(params: &GameParams) -> SearchTree {
        SearchTree {
            branching: params.branching(),
            max_depth: params.max_depth(),
            nodes: Vec::new(),
            slots: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn add(&mut self, cursor: NodeCursor) -> u32 {
        self.nodes.push(Node {
            cursor,
            visits: 0,
            mean: 0.0,
            children: UNTRACKED,
        });
        (self.nodes.len() - 1) as u32
    }

    fn child_slot(&self, node: u32, index: u32) -> u32 {
        match self.nodes[node as usize].children {
            UNTRACKED => UNTRACKED,
            offset => self.slots[(offset + index) as usize],
        }
    }

    fn ensure_slots(&mut self, node: u32) -> u32 {
        let n = &mut self.nodes[node as usize];
        if n.children == UNTRACKED {
            n.children = self.slots.len() as u32;
            self.slots.extend(std::iter::repeat_n(UNTRACKED, self.branching as usize));
        }
        self.nodes[node as usize].children
    }

    fn lookup(&self, path: &NodePath) -> Option<u32> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut id = 0;
        for &i in path.indices() {
            id = self.child_slot(id, i);
            if id == UNTRACKED {
                return None;
            }
        }
        Some(id)
    }

    /// `(n, Q̄)` of a tracked node.
    pub fn stats(&self, path: &NodePath) -> Option<(u64, f64)> {
        self.lookup(path).map(|id| {
            let n = &self.nodes[id as usize];
            (n.visits, n.mean)
        })
    }

    pub fn children(&self, path: &NodePath) -> Option<Vec<ChildStats>> {
        self.lookup(path).map(|id| self.child_stats(id))
    }

    fn child_stats(&self, id: u32) -> Vec<ChildStats> {
        (0..self.branching)
            .map(|i| match self.child_slot(id, i) {
                UNTRACKED => ChildStats { visits: 0, mean: None },
                c => {
                    let n = &self.nodes[c as usize];
                    ChildStats {
                        visits: n.visits,
                        mean: Some(n.mean),
                    }
                }
            })
            .collect()
    }

    /// Number of tracked nodes at each depth.
    pub fn depth_histogram(&self) -> Vec<u64> {
        let mut hist = Vec::new();
        for n in &self.nodes {
            let d = n.cursor.depth() as usize;
            if hist.len() <= d {
                hist.resize(d + 1, 0);
            }
            hist[d] += 1;
        }
        hist
    }

    /// `n(s) = 1 + Σ n(child)` at every tracked non-terminal node that has
    /// been visited.
    pub fn visits_conserved(&self) -> bool {
        self.nodes.iter().enumerate().all(|(id, n)| {
            if n.cursor.depth() >= self.max_depth || n.visits == 0 {
                return true;
            }
            let children: u64 = self.child_stats(id as u32).iter().map(|c| c.visits).sum();
            n.visits == 1 + children
        })
    }

    pub fn means_in_unit_interval(&self) -> bool {
        self.nodes.iter().all(|n| (0.0..=1.0).contains(&n.mean))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreadthFirstReport {
    pub holds: bool,
    pub max_sibling_gap: u64,
}

/// Whether every expanded node kept its children's visit counts within one
/// of each other. Untracked children count as zero visits.
pub fn breadth_first_check(tree: &SearchTree) -> BreadthFirstReport {
    let mut gap = 0;
    for (id, node) in tree.nodes.iter().enumerate() {
        if node.children == UNTRACKED {
            continue;
        }
        let stats = tree.child_stats(id as u32);
        let max = stats.iter().map(|c| c.visits).max().unwrap_or(0);
        let min = stats.iter().map(|c| c.visits).min().unwrap_or(0);
        gap = gap.max(max - min);
    }
    BreadthFirstReport {
        holds: gap <= 1,
        max_sibling_gap: gap,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub iteration: u64,
    pub action: u32,
    pub root_children: Vec<ChildStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub checkpoints: Vec<CheckpointRecord>,
    pub iterations: u64,
    pub tree_size: usize,
    pub depth_histogram: Vec<u64>,
    pub breadth_first: BreadthFirstReport,
}

impl SearchResult {
    /// Decision after the full budget.
    pub fn final_action(&self) -> Option<u32> {
        self.checkpoints.last().map(|c| c.action)
    }
}

/// A resumable UCT run; `uct_search` drives one to completion.
pub struct UctSearch<'a> {
    params: &'a GameParams,
    config: &'a UctConfig,
    tree: SearchTree,
    rng: ChaCha8Rng,
    iterations: u64,
    walk: Vec<u32>,
    actions: Vec<u32>,
}

impl<'a> UctSearch<'a> {
    pub fn new(params: &'a GameParams, config: &'a UctConfig) -> Result<Self> {
        config.validate()?;
        Ok(UctSearch {
            params,
            config,
            tree: SearchTree::new(params),
            rng: rng::stream_rng(config.seed),
            iterations: 0,
            walk: Vec::new(),
            actions: Vec::new(),
        })
    }

    pub fn tree(&self) -> &SearchTree {
        &self.tree
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    fn evaluate(&mut self, cursor: NodeCursor) -> f64 {
        if cursor.is_terminal(self.params) {
            return cursor.value().reward();
        }
        let ctx = EvalContext {
            value: cursor.value(),
            player: cursor.player(),
            depth: cursor.depth(),
            params: self.params,
        };
        self.config.heuristic.evaluate(&ctx, &mut self.rng)
    }

    fn select_child(&mut self, id: u32) -> u32 {
        let node = &self.tree.nodes[id as usize];
        let perspective = node.cursor.player();
        let parent_visits = node.visits;
        let mut best = f64::NEG_INFINITY;
        let mut chosen = 0;
        let mut ties = 0u32;
        for i in 0..self.tree.branching {
            let score = match self.tree.child_slot(id, i) {
                UNTRACKED => f64::INFINITY,
                c => {
                    let child = &self.tree.nodes[c as usize];
                    ucb_score(child.mean, child.visits, parent_visits, self.config.exploration, perspective)
                }
            };
            if score > best {
                best = score;
                chosen = i;
                ties = 1;
            } else if score == best {
                ties += 1;
                if self.rng.random_range(0..ties) == 0 {
                    chosen = i;
                }
            }
        }
        chosen
    }

    /// Runs one select / evaluate / backpropagate cycle and returns the reward.
    pub fn step(&mut self) -> f64 {
        self.walk.clear();
        self.actions.clear();
        let reward = if self.tree.is_empty() {
            let root = NodeCursor::root(self.params);
            self.tree.add(root);
            self.walk.push(0);
            self.evaluate(root)
        } else {
            let mut id = 0u32;
            self.walk.push(id);
            loop {
                let cursor = self.tree.nodes[id as usize].cursor;
                if cursor.is_terminal(self.params) {
                    break cursor.value().reward();
                }
                let action = self.select_child(id);
                self.actions.push(action);
                let offset = self.tree.ensure_slots(id);
                let slot = (offset + action) as usize;
                if self.tree.slots[slot] == UNTRACKED {
                    let child = cursor.child(self.params, action);
                    let new_id = self.tree.add(child);
                    self.tree.slots[slot] = new_id;
                    self.walk.push(new_id);
                    break self.evaluate(child);
                }
                id = self.tree.slots[slot];
                self.walk.push(id);
            }
        };
        for &id in &self.walk {
            let node = &mut self.tree.nodes[id as usize];
            node.mean = backup_mean(node.mean, node.visits, reward);
            node.visits += 1;
        }
        self.iterations += 1;
        reward
    }

    /// Root action with the highest mean among tracked children, ties
    /// uniform; uniform over all actions when no child is tracked yet.
    pub fn root_decision(&mut self) -> u32 {
        let stats = self.tree.child_stats(0);
        let means: Vec<f64> = stats.iter().map(|c| c.mean.unwrap_or(f64::NAN)).collect();
        match crate::argmax_uniform(&means, &mut self.rng) {
            Some(a) => a as u32,
            None => self.rng.random_range(0..self.tree.branching),
        }
    }

    fn record(&mut self) -> CheckpointRecord {
        CheckpointRecord {
            iteration: self.iterations,
            action: self.root_decision(),
            root_children: self.tree.child_stats(0),
        }
    }

    pub fn run(self) -> SearchResult {
        self.run_traced(None).expect("no trace sink, no io errors")
    }

    /// Runs to the budget, optionally writing `iteration,path,reward` rows.
    pub fn run_traced(mut self, mut trace: Option<&mut dyn Write>) -> io::Result<SearchResult> {
        if let Some(w) = trace.as_deref_mut() {
            writeln!(w, "iteration,path,reward")?;
        }
        let mut checkpoints = Vec::with_capacity(self.config.checkpoints.len());
        let mut next = 0;
        while self.iterations < self.config.budget {
            let reward = self.step();
            if let Some(w) = trace.as_deref_mut() {
                let path = NodePath::from(self.actions.clone());
                writeln!(w, "{},{},{}", self.iterations, path, reward)?;
            }
            if self.config.checkpoints.get(next) == Some(&self.iterations) {
                checkpoints.push(self.record());
                next += 1;
            }
        }
        Ok(SearchResult {
            checkpoints,
            iterations: self.iterations,
            tree_size: self.tree.len(),
            depth_histogram: self.tree.depth_histogram(),
            breadth_first: breadth_first_check(&self.tree),
        })
    }
}

pub fn uct_search(params: &GameParams, config: &UctConfig) -> Result<SearchResult> {
    Ok(UctSearch::new(params, config)?.run())
}
