use serde::Serialize;

use super::{Algorithm, CellRecords};
use crate::error::{Error, Result};

/// Binomial standard error `sqrt(p (1 - p) / m)`.
pub fn binomial_se(p: f64, m: u32) -> f64 {
    (p * (1.0 - p) / f64::from(m)).sqrt()
}

/// Standard error of the difference of two independent proportions.
pub fn difference_se(se_a: f64, se_b: f64) -> f64 {
    se_a.hypot(se_b)
}

#[derive(Clone, Debug, Serialize)]
pub struct CellSummary {
    pub gamma: f64,
    pub branching: u32,
    pub exploration: Option<f64>,
    pub heuristic: String,
    pub algorithm: Algorithm,
    pub budgets: Vec<u64>,
    pub delta: Vec<f64>,
    pub se: Vec<f64>,
    /// `None` for every budget when the baseline accuracy is zero.
    pub pathology: Vec<Option<f64>>,
    pub trees: u32,
    pub wall_time_secs: f64,
}

impl CellSummary {
    /// Some budget's accuracy fell below the baseline.
    pub fn pathological(&self) -> bool {
        self.pathology.iter().any(|p| p.is_some_and(|p| p < 1.0))
    }

    pub fn baseline_undefined(&self) -> bool {
        self.pathology.iter().all(Option::is_none)
    }

    pub fn budget_index(&self, budget: u64) -> Option<usize> {
        self.budgets.iter().position(|&b| b == budget)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PathologyReport {
    pub cells: Vec<CellSummary>,
}

pub fn pathology_report(records: &[CellRecords]) -> Result<PathologyReport> {
    let cells = records
        .iter()
        .map(|rec| {
            let cell = &rec.cell;
            if cell.budgets.is_empty() {
                return Err(Error::InvalidParams("cell has no budgets".into()));
            }
            let m = rec.correct.len() as u32;
            if m == 0 {
                return Err(Error::InvalidParams("cell has no trees".into()));
            }
            let delta: Vec<f64> = (0..cell.budgets.len())
                .map(|i| rec.correct.iter().filter(|row| row[i]).count() as f64 / f64::from(m))
                .collect();
            let se = delta.iter().map(|&d| binomial_se(d, m)).collect();
            let baseline = delta[0];
            let pathology = delta
                .iter()
                .enumerate()
                .map(|(i, &d)| match (baseline > 0.0, i) {
                    (false, _) => None,
                    (true, 0) => Some(1.0),
                    (true, _) => Some(d / baseline),
                })
                .collect();
            Ok(CellSummary {
                gamma: cell.gamma,
                branching: cell.branching,
                exploration: cell.exploration,
                heuristic: cell.heuristic.label(),
                algorithm: cell.algorithm,
                budgets: cell.budgets.clone(),
                delta,
                se,
                pathology,
                trees: m,
                wall_time_secs: rec.compute_time.as_secs_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathologyReport { cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Cell;
    use crate::heuristics::Heuristic;
    use std::time::Duration;

    fn records(budgets: Vec<u64>, rows: Vec<Vec<bool>>) -> CellRecords {
        CellRecords {
            cell: Cell {
                gamma: 1.0,
                branching: 2,
                exploration: Some(1.0),
                heuristic: Heuristic::Perfect,
                algorithm: Algorithm::Uct,
                max_depth: 10,
                budgets,
                trees: rows.len() as u32,
                master_seed: 0,
            },
            correct: rows,
            compute_time: Duration::ZERO,
        }
    }

    #[test]
    fn index_is_ratio_to_baseline() {
        // 4 of 5 right at the baseline, 3 of 5 at the last budget
        let rows = vec![
            vec![true, true],
            vec![true, true],
            vec![true, true],
            vec![true, false],
            vec![false, false],
        ];
        let r = pathology_report(&[records(vec![10, 1000], rows)]).unwrap();
        let c = &r.cells[0];
        assert_eq!(c.delta, vec![0.8, 0.6]);
        assert_eq!(c.pathology[0], Some(1.0));
        assert!((c.pathology[1].unwrap() - 0.75).abs() < 1e-12);
        assert!(c.pathological());
    }

    #[test]
    fn constant_accuracy_gives_unit_index() {
        let rows = vec![vec![true, true, true], vec![false, false, false]];
        let r = pathology_report(&[records(vec![10, 100, 1000], rows)]).unwrap();
        assert!(r.cells[0].pathology.iter().all(|p| *p == Some(1.0)));
        assert!(!r.cells[0].pathological());
    }

    #[test]
    fn zero_baseline_is_flagged() {
        let rows = vec![vec![false, true], vec![false, true]];
        let r = pathology_report(&[records(vec![10, 100], rows)]).unwrap();
        assert!(r.cells[0].baseline_undefined());
    }

    #[test]
    fn standard_errors() {
        assert!((binomial_se(0.5, 100) - 0.05).abs() < 1e-12);
        assert_eq!(binomial_se(1.0, 10), 0.0);
        assert!((difference_se(0.03, 0.04) - 0.05).abs() < 1e-12);
    }
}
