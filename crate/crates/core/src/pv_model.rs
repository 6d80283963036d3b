//! Prefix value trees: integer minimax values grown top-down.
//!
//! At every node one child, drawn uniformly, keeps the parent's value; the
//! other children are worse for the player on move by a cost `k`
//! (`m - k` below Max, `m + k` below Min). The root is a Max node with
//! value 1, so it always has exactly one optimal child.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::tree_model::{check_enumeration, NodePath, Player};

/// How the cost of a sub-optimal move is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PvCost {
    Fixed(u32),
    /// Drawn uniformly from `1..=max`, once per sibling group.
    Uniform { max: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvParams {
    branching_factor: u32,
    cost: PvCost,
    max_depth: u32,
    seed: u64,
}

impl PvParams {
    pub fn new(branching_factor: u32, cost: PvCost, max_depth: u32, seed: u64) -> Result<Self> {
        if branching_factor < 2 {
            return Err(Error::InvalidParams("branching factor must be at least 2".into()));
        }
        let min_cost = match cost {
            PvCost::Fixed(k) => k,
            PvCost::Uniform { max } => max,
        };
        if min_cost < 1 {
            return Err(Error::InvalidParams("cost constant must be at least 1".into()));
        }
        if max_depth < 1 {
            return Err(Error::InvalidParams("maximum depth must be at least 1".into()));
        }
        Ok(PvParams {
            branching_factor,
            cost,
            max_depth,
            seed,
        })
    }

    pub fn branching(&self) -> u32 {
        self.branching_factor
    }

    pub fn cost(&self) -> PvCost {
        self.cost
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> PvParams {
        PvParams { seed, ..self.clone() }
    }

    fn validate_path(&self, path: &NodePath) -> Result<()> {
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

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PvCursor {
    key: u64,
    value: i64,
    depth: u32,
}

impl PvCursor {
    pub fn root(params: &PvParams) -> PvCursor {
        PvCursor {
            key: rng::root_key(params.seed),
            value: 1,
            depth: 0,
        }
    }

    pub fn at(params: &PvParams, path: &NodePath) -> PvCursor {
        path.indices()
            .iter()
            .fold(PvCursor::root(params), |c, &i| c.child(params, i))
    }

    pub fn value(&self) -> i64 {
        self.value
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn designated_child(&self, params: &PvParams) -> u32 {
        rng::below(rng::draw(self.key, rng::TAG_DESIGNATED, 0), params.branching_factor)
    }

    /// Cost shared by all sub-optimal children of this node.
    pub fn group_cost(&self, params: &PvParams) -> i64 {
        match params.cost {
            PvCost::Fixed(k) => i64::from(k),
            PvCost::Uniform { max } => 1 + i64::from(rng::below(rng::draw(self.key, rng::TAG_COST, 0), max)),
        }
    }

    pub fn child(&self, params: &PvParams, index: u32) -> PvCursor {
        let value = if index == self.designated_child(params) {
            self.value
        } else {
            match Player::at_depth(self.depth as usize) {
                Player::Max => self.value - self.group_cost(params),
                Player::Min => self.value + self.group_cost(params),
            }
        };
        PvCursor {
            key: rng::child_key(self.key, index),
            value,
            depth: self.depth + 1,
        }
    }
}

pub fn pv_value(params: &PvParams, path: &NodePath) -> Result<i64> {
    params.validate_path(path)?;
    Ok(PvCursor::at(params, path).value())
}

/// Exact sum of the values of all depth-`d` descendants of `path`.
pub fn pv_leaf_sum(params: &PvParams, path: &NodePath, d: u32) -> Result<i64> {
    params.validate_path(path)?;
    check_enumeration(params.branching_factor, d)?;
    if path.depth() + d as usize > params.max_depth as usize {
        return Err(Error::DepthOutOfRange {
            depth: d,
            max: params.max_depth - path.depth() as u32,
        });
    }
    let mut level = vec![PvCursor::at(params, path)];
    for _ in 0..d {
        level = level
            .iter()
            .flat_map(|c| (0..params.branching_factor).map(move |i| c.child(params, i)))
            .collect();
    }
    Ok(level.iter().map(PvCursor::value).sum())
}

/// One-ply lookahead: score each root child by the mean leaf value of
/// `playouts_per_child` uniformly random walks to maximum depth and return
/// the best child, ties broken uniformly.
pub fn pv_naive_plan(params: &PvParams, playouts_per_child: u32, rng_seed: u64) -> usize {
    let mut rng = rng::stream_rng(rng_seed);
    let root = PvCursor::root(params);
    let estimates: Vec<f64> = (0..params.branching_factor)
        .map(|a| {
            let child = root.child(params, a);
            let total: i64 = (0..playouts_per_child.max(1))
                .map(|_| {
                    let mut node = child;
                    while node.depth < params.max_depth {
                        node = node.child(params, rng.random_range(0..params.branching_factor));
                    }
                    node.value
                })
                .sum();
            total as f64 / f64::from(playouts_per_child.max(1))
        })
        .collect();
    crate::argmax_uniform(&estimates, &mut rng).expect("at least two root children")
}

/// The optimal root action of a prefix value tree.
pub fn pv_optimal_root_action(params: &PvParams) -> u32 {
    PvCursor::root(params).designated_child(params)
}
