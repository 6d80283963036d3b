//! Critical win-loss game trees.
//!
//! A tree is never materialized. Every node is identified by its path from
//! the root and its value is recomputed on demand from stateless draws keyed
//! by `(seed, path)`. Max moves at even depths, the root is a Max choice node
//! with value `+1`, and a node is terminal exactly when its depth equals the
//! maximum depth.
//!
//! Growth rule at a node `s` with value `v(s)`:
//!
//! * forced node (Max at `-1`, Min at `+1`): every child copies `v(s)`;
//! * choice node: one child, drawn uniformly, copies `v(s)`; every other
//!   child independently takes `-v(s)` with probability `γ` (the critical
//!   rate) and `v(s)` otherwise.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Largest number of nodes any brute-force enumeration may touch.
pub const ENUMERATION_CAP: u64 = 1_000_000;

/// True game-theoretic value of a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Value {
    Plus,
    Minus,
}

impl Value {
    pub fn sign(self) -> i8 {
        match self {
            Value::Plus => 1,
            Value::Minus => -1,
        }
    }

    pub fn negate(self) -> Value {
        match self {
            Value::Plus => Value::Minus,
            Value::Minus => Value::Plus,
        }
    }

    /// Utility on the `[0, 1]` reward scale, from Max's point of view.
    pub fn reward(self) -> f64 {
        match self {
            Value::Plus => 1.0,
            Value::Minus => 0.0,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Value::Plus => "+1",
            Value::Minus => "-1",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    Max,
    Min,
}

impl Player {
    pub fn at_depth(depth: usize) -> Player {
        if depth.is_multiple_of(2) {
            Player::Max
        } else {
            Player::Min
        }
    }

    pub fn other(self) -> Player {
        match self {
            Player::Max => Player::Min,
            Player::Min => Player::Max,
        }
    }

    /// The value this player is trying to reach.
    pub fn favorable(self) -> Value {
        match self {
            Player::Max => Value::Plus,
            Player::Min => Value::Minus,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Choice,
    Forced,
}

impl NodeKind {
    pub fn of(value: Value, player: Player) -> NodeKind {
        if value == player.favorable() {
            NodeKind::Choice
        } else {
            NodeKind::Forced
        }
    }
}

/// Everything that defines one synthetic game instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    branching_factor: u32,
    critical_rate: f64,
    max_depth: u32,
    seed: u64,
}

impl GameParams {
    pub fn new(branching_factor: u32, critical_rate: f64, max_depth: u32, seed: u64) -> Result<Self> {
        if branching_factor < 2 {
            return Err(Error::InvalidParams(format!(
                "branching factor must be at least 2, got {branching_factor}"
            )));
        }
        if !(0.0..=1.0).contains(&critical_rate) {
            return Err(Error::InvalidParams(format!(
                "critical rate must lie in [0, 1], got {critical_rate}"
            )));
        }
        if max_depth < 1 {
            return Err(Error::InvalidParams("maximum depth must be at least 1".into()));
        }
        Ok(GameParams {
            branching_factor,
            critical_rate,
            max_depth,
            seed,
        })
    }

    pub fn branching(&self) -> u32 {
        self.branching_factor
    }

    pub fn critical_rate(&self) -> f64 {
        self.critical_rate
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> GameParams {
        GameParams { seed, ..self.clone() }
    }

    /// Expected fraction of children sharing the value of a choice node:
    /// `k = 1 - γ + γ/b`.
    pub fn density_ratio(&self) -> f64 {
        density_ratio(self.critical_rate, self.branching_factor)
    }

    /// Checks a path against the branching factor and maximum depth.
    pub fn validate_path(&self, path: &NodePath) -> Result<()> {
        if path.depth() > self.max_depth as usize {
            return Err(Error::PathTooDeep {
                depth: path.depth(),
                max_depth: self.max_depth,
            });
        }
        if let Some(&index) = path.indices().iter().find(|&&i| i >= self.branching_factor) {
            return Err(Error::ChildOutOfRange {
                index,
                branching: self.branching_factor,
            });
        }
        Ok(())
    }
}

pub fn density_ratio(critical_rate: f64, branching: u32) -> f64 {
    1.0 - critical_rate + critical_rate / f64::from(branching)
}

/// Sequence of child indices from the root. The empty path is the root.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodePath(Vec<u32>);

impl NodePath {
    pub fn root() -> NodePath {
        NodePath(Vec::new())
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn indices(&self) -> &[u32] {
        &self.0
    }

    pub fn player(&self) -> Player {
        Player::at_depth(self.depth())
    }

    pub fn child(&self, index: u32) -> NodePath {
        let mut indices = self.0.clone();
        indices.push(index);
        NodePath(indices)
    }

    pub fn push(&mut self, index: u32) {
        self.0.push(index);
    }

    pub fn pop(&mut self) -> Option<u32> {
        self.0.pop()
    }
}

impl From<Vec<u32>> for NodePath {
    fn from(indices: Vec<u32>) -> Self {
        NodePath(indices)
    }
}

/// Root renders as `r`, other nodes as slash-separated indices.
impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("r");
        }
        for (i, index) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_char('/')?;
            }
            write!(f, "{index}")?;
        }
        Ok(())
    }
}

impl FromStr for NodePath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "r" {
            return Ok(NodePath::root());
        }
        s.split('/')
            .map(|part| {
                part.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::InvalidParams(format!("bad path component `{part}`")))
            })
            .collect::<Result<Vec<_>>>()
            .map(NodePath)
    }
}

/// Incremental walker over the lazily generated tree.
///
/// Holding a cursor lets searches step to a child in O(1) instead of
/// re-walking the whole path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeCursor {
    key: u64,
    value: Value,
    depth: u32,
}

impl NodeCursor {
    pub fn root(params: &GameParams) -> NodeCursor {
        NodeCursor {
            key: rng::root_key(params.seed),
            value: Value::Plus,
            depth: 0,
        }
    }

    /// Walks `path` from the root. The path must already be validated.
    pub fn at(params: &GameParams, path: &NodePath) -> NodeCursor {
        path.indices()
            .iter()
            .fold(NodeCursor::root(params), |cursor, &i| cursor.child(params, i))
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn value(&self) -> Value {
        self.value
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn player(&self) -> Player {
        Player::at_depth(self.depth as usize)
    }

    pub fn kind(&self) -> NodeKind {
        NodeKind::of(self.value, self.player())
    }

    pub fn is_terminal(&self, params: &GameParams) -> bool {
        self.depth >= params.max_depth
    }

    /// Index of the child designated as the optimal move at a choice node.
    pub fn designated_child(&self, params: &GameParams) -> u32 {
        rng::below(rng::draw(self.key, rng::TAG_DESIGNATED, 0), params.branching_factor)
    }

    /// Whether non-designated child `index` of a choice node flips value.
    pub fn child_flips(&self, params: &GameParams, index: u32) -> bool {
        rng::unit_f64(rng::draw(self.key, rng::TAG_FLIP, u64::from(index))) < params.critical_rate
    }

    pub fn child_value(&self, params: &GameParams, index: u32) -> Value {
        debug_assert!(index < params.branching_factor);
        match self.kind() {
            NodeKind::Forced => self.value,
            NodeKind::Choice => {
                if index != self.designated_child(params) && self.child_flips(params, index) {
                    self.value.negate()
                } else {
                    self.value
                }
            }
        }
    }

    pub fn child(&self, params: &GameParams, index: u32) -> NodeCursor {
        NodeCursor {
            key: rng::child_key(self.key, index),
            value: self.child_value(params, index),
            depth: self.depth + 1,
        }
    }
}

/// Full description of one node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub value: Value,
    pub kind: NodeKind,
    pub player: Player,
    pub terminal: bool,
    /// Children whose value equals the value the player on move wants. At a
    /// forced node every child qualifies. Empty at terminal nodes.
    pub optimal_moves: Vec<u32>,
}

pub fn node_value(params: &GameParams, path: &NodePath) -> Result<Value> {
    params.validate_path(path)?;
    Ok(NodeCursor::at(params, path).value())
}

pub fn node_meta(params: &GameParams, path: &NodePath) -> Result<NodeInfo> {
    params.validate_path(path)?;
    Ok(cursor_meta(params, &NodeCursor::at(params, path)))
}

pub(crate) fn cursor_meta(params: &GameParams, cursor: &NodeCursor) -> NodeInfo {
    let player = cursor.player();
    let kind = cursor.kind();
    let terminal = cursor.is_terminal(params);
    let optimal_moves = if terminal {
        Vec::new()
    } else {
        match kind {
            NodeKind::Forced => (0..params.branching_factor).collect(),
            NodeKind::Choice => (0..params.branching_factor)
                .filter(|&i| cursor.child_value(params, i) == player.favorable())
                .collect(),
        }
    };
    NodeInfo {
        value: cursor.value(),
        kind,
        player,
        terminal,
        optimal_moves,
    }
}

/// One step of the density recurrence below a level where `player` moves.
#[inline]
fn density_step(density: f64, k: f64, player: Player) -> f64 {
    match player {
        Player::Max => density * k,
        Player::Min => density * k + 1.0 - k,
    }
}

/// Expected fraction of `+1` nodes at depth `n` of the tree, iterated from
/// `f_0 = 1` with `f_{n+1} = f_n k` below Max levels and
/// `f_{n+1} = f_n k + 1 - k` below Min levels.
pub fn plus_density(params: &GameParams, n: u32) -> Result<f64> {
    if n > params.max_depth {
        return Err(Error::DepthOutOfRange {
            depth: n,
            max: params.max_depth,
        });
    }
    Ok(subtree_density(params.density_ratio(), Value::Plus, Player::Max, n))
}

/// Expected fraction of `+1` nodes `remaining` plies below a node with the
/// given value and player on move.
pub fn subtree_plus_density(value: Value, player: Player, remaining: u32, params: &GameParams) -> Result<f64> {
    if remaining > params.max_depth {
        return Err(Error::DepthOutOfRange {
            depth: remaining,
            max: params.max_depth,
        });
    }
    Ok(subtree_density(params.density_ratio(), value, player, remaining))
}

pub(crate) fn subtree_density(k: f64, value: Value, player: Player, remaining: u32) -> f64 {
    let mut density = value.reward();
    let mut mover = player;
    for _ in 0..remaining {
        density = density_step(density, k, mover);
        mover = mover.other();
    }
    density
}

/// The closed form `k^{2d} + (1 - k^{2d+2}) / (1 + k)` that is commonly quoted
/// for even depths.
///
/// It does not agree with the recurrence at finite depth (for `γ = 1, b = 2,
/// d = 1` it gives `0.875` where the recurrence and brute-force enumeration
/// both give `0.75`); the two only meet in the limit. Kept for comparison
/// tables, never used for evaluation.
pub fn closed_form_even_density(k: f64, d: u32) -> f64 {
    let k2d = k.powi(2 * d as i32);
    k2d + (1.0 - k2d * k * k) / (1.0 + k)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityLimits {
    pub even: f64,
    pub odd: f64,
    /// Set when `γ = 0`: every node is `+1` and the limits collapse to 1.
    pub degenerate: bool,
}

/// Limits of the even- and odd-depth densities: `1/(1+k)` and `k/(1+k)`.
pub fn density_limits(params: &GameParams) -> DensityLimits {
    if params.critical_rate == 0.0 {
        return DensityLimits {
            even: 1.0,
            odd: 1.0,
            degenerate: true,
        };
    }
    let k = params.density_ratio();
    DensityLimits {
        even: 1.0 / (1.0 + k),
        odd: k / (1.0 + k),
        degenerate: false,
    }
}

pub(crate) fn check_enumeration(branching: u32, depth: u32) -> Result<()> {
    let nodes = u128::from(branching).checked_pow(depth).unwrap_or(u128::MAX);
    if nodes > u128::from(ENUMERATION_CAP) {
        return Err(Error::EnumerationCap {
            nodes,
            cap: ENUMERATION_CAP,
        });
    }
    Ok(())
}

/// Graph description of the top `depth_cap` plies in DOT syntax.
pub fn export_tree(params: &GameParams, depth_cap: u32) -> Result<String> {
    check_enumeration(params.branching_factor, depth_cap)?;
    if depth_cap > params.max_depth {
        return Err(Error::DepthOutOfRange {
            depth: depth_cap,
            max: params.max_depth,
        });
    }

    let mut nodes = String::new();
    let mut edges = String::new();
    let mut frontier = vec![(NodePath::root(), NodeCursor::root(params))];
    for depth in 0..=depth_cap {
        let mut next = Vec::new();
        for (path, cursor) in &frontier {
            writeln!(nodes, "  \"{path}\" [label=\"{}\"]", cursor.value()).unwrap();
            if depth == depth_cap {
                continue;
            }
            for i in 0..params.branching_factor {
                let child = path.child(i);
                writeln!(edges, "  \"{path}\" -> \"{child}\"").unwrap();
                next.push((child, cursor.child(params, i)));
            }
        }
        frontier = next;
    }
    Ok(format!("digraph {{\n{nodes}{edges}}}\n"))
}
