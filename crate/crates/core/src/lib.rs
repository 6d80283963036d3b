//! Synthetic critical win-loss game trees and the searches that run on them.
//!
//! Trees are generated lazily and deterministically from a seed, so trees of
//! depth 50 or more never need to be materialized. On top of the generator
//! sit UCT and alpha-beta searches, heuristic evaluators, a grid-sweep
//! harness measuring decision accuracy against search effort, a prefix value
//! tree model, and a UCI client for measuring real chess positions.

pub mod engine_probe;
pub mod error;
pub mod experiments;
pub mod heuristics;
pub mod pv_model;
pub mod rng;
pub mod search_minimax;
pub mod search_uct;
pub mod tree_model;

use rand::Rng;

pub use error::{Error, Result};
pub use heuristics::{Heuristic, HistogramPdf};
pub use tree_model::{GameParams, NodePath, Player, Value};

/// Index of the largest value, ties broken uniformly. NaN entries are
/// skipped; `None` when every entry is NaN.
pub fn argmax_uniform<R: Rng + ?Sized>(values: &[f64], rng: &mut R) -> Option<usize> {
    let mut best = None;
    let mut best_value = f64::NEG_INFINITY;
    let mut ties = 0u32;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        if best.is_none() || v > best_value {
            best = Some(i);
            best_value = v;
            ties = 1;
        } else if v == best_value {
            ties += 1;
            if rng.random_range(0..ties) == 0 {
                best = Some(i);
            }
        }
    }
    best
}
