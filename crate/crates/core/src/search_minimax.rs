//! Depth-limited minimax with alpha-beta pruning, and an unpruned reference.
//!
//! Frontier nodes draw their heuristic noise from a generator keyed by the
//! node itself, so the pruned and unpruned searches see identical frontier
//! values no matter which nodes pruning skips.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::heuristics::{EvalContext, Heuristic};
use crate::rng;
use crate::tree_model::{check_enumeration, GameParams, NodeCursor, NodePath, Player};

#[derive(Clone, Debug)]
pub struct MinimaxConfig {
    pub depth: u32,
    pub heuristic: Heuristic,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MinimaxOutcome {
    pub value: f64,
    /// Best move at the searched node; ties go to the lowest index.
    pub best_action: u32,
    /// Frontier and terminal evaluations performed.
    pub frontier_evals: u64,
}

struct Searcher<'a> {
    params: &'a GameParams,
    cfg: &'a MinimaxConfig,
    evals: u64,
}

impl Searcher<'_> {
    fn evaluate(&mut self, node: &NodeCursor) -> f64 {
        self.evals += 1;
        if node.is_terminal(self.params) {
            return node.value().reward();
        }
        let ctx = EvalContext {
            value: node.value(),
            player: node.player(),
            depth: node.depth(),
            params: self.params,
        };
        let mut stream = rng::stream_rng(rng::draw(node.key(), rng::TAG_EVAL, self.cfg.seed));
        self.cfg.heuristic.evaluate(&ctx, &mut stream)
    }

    fn alphabeta(&mut self, node: &NodeCursor, depth_left: u32, mut alpha: f64, mut beta: f64) -> f64 {
        if depth_left == 0 || node.is_terminal(self.params) {
            return self.evaluate(node);
        }
        let b = self.params.branching();
        match node.player() {
            Player::Max => {
                let mut best = f64::NEG_INFINITY;
                for i in 0..b {
                    let v = self.alphabeta(&node.child(self.params, i), depth_left - 1, alpha, beta);
                    best = best.max(v);
                    alpha = alpha.max(best);
                    if alpha >= beta {
                        break;
                    }
                }
                best
            }
            Player::Min => {
                let mut best = f64::INFINITY;
                for i in 0..b {
                    let v = self.alphabeta(&node.child(self.params, i), depth_left - 1, alpha, beta);
                    best = best.min(v);
                    beta = beta.min(best);
                    if alpha >= beta {
                        break;
                    }
                }
                best
            }
        }
    }

    fn minimax(&mut self, node: &NodeCursor, depth_left: u32) -> f64 {
        if depth_left == 0 || node.is_terminal(self.params) {
            return self.evaluate(node);
        }
        let values = (0..self.params.branching()).map(|i| self.minimax(&node.child(self.params, i), depth_left - 1));
        let values: Vec<f64> = values.collect();
        match node.player() {
            Player::Max => values.into_iter().fold(f64::NEG_INFINITY, f64::max),
            Player::Min => values.into_iter().fold(f64::INFINITY, f64::min),
        }
    }
}

fn improves(player: Player, candidate: f64, best: f64) -> bool {
    match player {
        Player::Max => candidate > best,
        Player::Min => candidate < best,
    }
}

fn check_root(params: &GameParams, path: &NodePath, cfg: &MinimaxConfig) -> Result<NodeCursor> {
    params.validate_path(path)?;
    if cfg.depth < 1 {
        return Err(Error::InvalidParams("search depth must be at least 1".into()));
    }
    if path.depth() as u32 + 1 > params.max_depth() {
        return Err(Error::InvalidParams(format!(
            "node at depth {} has no moves (maximum depth {})",
            path.depth(),
            params.max_depth()
        )));
    }
    Ok(NodeCursor::at(params, path))
}

/// Fail-soft alpha-beta to relative depth `cfg.depth`.
pub fn alphabeta(params: &GameParams, path: &NodePath, cfg: &MinimaxConfig) -> Result<MinimaxOutcome> {
    let root = check_root(params, path, cfg)?;
    let mut s = Searcher { params, cfg, evals: 0 };
    let player = root.player();
    let (mut alpha, mut beta) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut best = match player {
        Player::Max => f64::NEG_INFINITY,
        Player::Min => f64::INFINITY,
    };
    let mut best_action = 0;
    for i in 0..params.branching() {
        let v = s.alphabeta(&root.child(params, i), cfg.depth - 1, alpha, beta);
        if improves(player, v, best) {
            best = v;
            best_action = i;
        }
        match player {
            Player::Max => alpha = alpha.max(best),
            Player::Min => beta = beta.min(best),
        }
    }
    Ok(MinimaxOutcome {
        value: best,
        best_action,
        frontier_evals: s.evals,
    })
}

/// Exhaustive minimax with the same frontier evaluation as [`alphabeta`].
pub fn minimax_reference(params: &GameParams, path: &NodePath, cfg: &MinimaxConfig) -> Result<MinimaxOutcome> {
    let root = check_root(params, path, cfg)?;
    check_enumeration(params.branching(), cfg.depth)?;
    let mut s = Searcher { params, cfg, evals: 0 };
    let player = root.player();
    let mut best = match player {
        Player::Max => f64::NEG_INFINITY,
        Player::Min => f64::INFINITY,
    };
    let mut best_action = 0;
    for i in 0..params.branching() {
        let v = s.minimax(&root.child(params, i), cfg.depth - 1);
        if improves(player, v, best) {
            best = v;
            best_action = i;
        }
    }
    Ok(MinimaxOutcome {
        value: best,
        best_action,
        frontier_evals: s.evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree_model::{node_meta, Value};

    fn cfg(depth: u32, heuristic: Heuristic) -> MinimaxConfig {
        MinimaxConfig {
            depth,
            heuristic,
            seed: 17,
        }
    }

    #[test]
    fn one_ply_perfect_finds_winner() {
        for seed in 0..100 {
            let p = GameParams::new(2, 1.0, 10, seed).unwrap();
            let out = alphabeta(&p, &NodePath::root(), &cfg(1, Heuristic::Perfect)).unwrap();
            let info = node_meta(&p, &NodePath::root()).unwrap();
            assert_eq!(info.optimal_moves, vec![out.best_action]);
            assert_eq!(out.value, 1.0);
        }
    }

    #[test]
    fn flat_game_is_always_won() {
        for d in 1..6 {
            let p = GameParams::new(3, 0.0, 10, d as u64).unwrap();
            let out = alphabeta(&p, &NodePath::root(), &cfg(d, Heuristic::Perfect)).unwrap();
            assert_eq!(out.value, 1.0);
        }
    }

    #[test]
    fn one_ply_reference_is_max_of_children() {
        let p = GameParams::new(2, 0.6, 10, 5).unwrap();
        let c = cfg(1, Heuristic::gaussian(0.3).unwrap());
        let reference = minimax_reference(&p, &NodePath::root(), &c).unwrap();
        assert_eq!(reference.frontier_evals, 2);
        let root = NodeCursor::root(&p);
        let mut s = Searcher { params: &p, cfg: &c, evals: 0 };
        let a = s.evaluate(&root.child(&p, 0));
        let b = s.evaluate(&root.child(&p, 1));
        assert_eq!(reference.value, a.max(b));
    }

    #[test]
    fn full_depth_perfect_search_recovers_value() {
        for seed in 0..30 {
            let p = GameParams::new(2, 0.8, 7, seed).unwrap();
            for path in [vec![0], vec![1, 0], vec![1, 1, 0]] {
                let path = NodePath::from(path);
                let remaining = 7 - path.depth() as u32;
                let out = minimax_reference(&p, &path, &cfg(remaining, Heuristic::Perfect)).unwrap();
                let v = node_meta(&p, &path).unwrap().value;
                assert_eq!(out.value == 1.0, v == Value::Plus);
            }
        }
    }

    #[test]
    fn rejects_terminal_roots_and_zero_depth() {
        let p = GameParams::new(2, 0.5, 2, 0).unwrap();
        assert!(alphabeta(&p, &NodePath::from(vec![0, 0]), &cfg(1, Heuristic::Perfect)).is_err());
        assert!(alphabeta(&p, &NodePath::root(), &cfg(0, Heuristic::Perfect)).is_err());
        assert!(minimax_reference(&p, &NodePath::root(), &cfg(0, Heuristic::Perfect)).is_err());
    }
}
