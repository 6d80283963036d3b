use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Algorithm, GridSpec, PathologyReport};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "gamma,b,c,heuristic,algo,budget,delta,se,pathology_index";

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];
const PANEL_W: f64 = 340.0;
const PANEL_H: f64 = 250.0;
const MARGIN: f64 = 44.0;
const COLUMNS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Svg,
}

impl std::fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Svg => "svg",
        })
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(OutputFormat::Csv),
            "svg" => Ok(OutputFormat::Svg),
            other => Err(Error::InvalidParams(format!("unknown output format `{other}`"))),
        }
    }
}

fn check_nonempty(report: &PathologyReport) -> Result<()> {
    if report.cells.is_empty() {
        return Err(Error::InvalidParams("report has no cells".into()));
    }
    if report.cells.iter().any(|c| c.budgets.is_empty()) {
        return Err(Error::InvalidParams("report has a cell without budgets".into()));
    }
    Ok(())
}

fn na_or<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

pub fn csv_string(report: &PathologyReport) -> Result<String> {
    check_nonempty(report)?;
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for cell in &report.cells {
        for (i, budget) in cell.budgets.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{},{:.6},{:.6},{}",
                cell.gamma,
                cell.branching,
                na_or(cell.exploration),
                cell.heuristic,
                cell.algorithm.name(),
                budget,
                cell.delta[i],
                cell.se[i],
                na_or(cell.pathology[i].map(|p| format!("{p:.6}"))),
            )
            .expect("writing to a String");
        }
    }
    Ok(out)
}

fn x_coord(algorithm: Algorithm, budget: u64) -> f64 {
    match algorithm {
        Algorithm::AlphaBeta => budget as f64,
        _ => (budget as f64).log10(),
    }
}

/// Pathology index against effort, one panel per (γ, b, heuristic) and one
/// polyline per exploration constant.
pub fn svg_string(report: &PathologyReport) -> Result<String> {
    check_nonempty(report)?;
    let mut panels: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, cell) in report.cells.iter().enumerate() {
        let title = format!(
            "γ={} b={} {} {}",
            cell.gamma,
            cell.branching,
            cell.heuristic,
            cell.algorithm.name()
        );
        match panels.iter_mut().find(|(t, _)| *t == title) {
            Some((_, members)) => members.push(i),
            None => panels.push((title, vec![i])),
        }
    }
    let mut series_labels: Vec<String> = Vec::new();
    for cell in &report.cells {
        let label = na_or(cell.exploration);
        if !series_labels.contains(&label) {
            series_labels.push(label);
        }
    }

    let rows = panels.len().div_ceil(COLUMNS);
    let cols = panels.len().min(COLUMNS);
    let legend_h = 24.0;
    let width = cols as f64 * PANEL_W;
    let height = rows as f64 * PANEL_H + legend_h;
    let mut svg = String::new();
    let w = &mut svg;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (s, label) in series_labels.iter().enumerate() {
        let x = 10.0 + s as f64 * 90.0;
        let color = PALETTE[s % PALETTE.len()];
        let _ = writeln!(
            w,
            r#"<line x1="{x}" y1="12" x2="{}" y2="12" stroke="{color}" stroke-width="2"/><text x="{}" y="16">c={label}</text>"#,
            x + 20.0,
            x + 24.0
        );
    }

    for (p, (title, members)) in panels.iter().enumerate() {
        let ox = (p % COLUMNS) as f64 * PANEL_W;
        let oy = legend_h + (p / COLUMNS) as f64 * PANEL_H;
        let algorithm = report.cells[members[0]].algorithm;
        let xs: Vec<f64> = members
            .iter()
            .flat_map(|&i| report.cells[i].budgets.iter().map(move |&b| x_coord(algorithm, b)))
            .collect();
        let (x_lo, x_hi) = bounds(xs.into_iter());
        let ys = members
            .iter()
            .flat_map(|&i| report.cells[i].pathology.iter().flatten().copied())
            .chain(std::iter::once(1.0));
        let (y_lo, y_hi) = bounds(ys);
        let pad = ((y_hi - y_lo) * 0.1).max(0.05);
        let (y_lo, y_hi) = (y_lo - pad, y_hi + pad);
        let plot_w = PANEL_W - 2.0 * MARGIN;
        let plot_h = PANEL_H - 2.0 * MARGIN;
        let sx = |x: f64| ox + MARGIN + (x - x_lo) / (x_hi - x_lo).max(1e-9) * plot_w;
        let sy = |y: f64| oy + PANEL_H - MARGIN - (y - y_lo) / (y_hi - y_lo) * plot_h;

        let _ = writeln!(
            w,
            r##"<rect x="{}" y="{}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#999"/>"##,
            ox + MARGIN,
            oy + MARGIN
        );
        let _ = writeln!(
            w,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            ox + PANEL_W / 2.0,
            oy + MARGIN - 10.0,
            escape(title)
        );
        let _ = writeln!(
            w,
            r##"<line x1="{}" y1="{y1:.2}" x2="{}" y2="{y1:.2}" stroke="#bbb" stroke-dasharray="4 3"/>"##,
            ox + MARGIN,
            ox + MARGIN + plot_w,
            y1 = sy(1.0)
        );
        let x_label = match algorithm {
            Algorithm::AlphaBeta => "search depth",
            _ => "log10(budget)",
        };
        let _ = writeln!(
            w,
            r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
            ox + PANEL_W / 2.0,
            oy + PANEL_H - 10.0
        );
        for (value, anchor_y) in [(y_lo, sy(y_lo)), (y_hi, sy(y_hi))] {
            let _ = writeln!(
                w,
                r#"<text x="{}" y="{:.2}" text-anchor="end">{value:.2}</text>"#,
                ox + MARGIN - 4.0,
                anchor_y + 4.0
            );
        }
        for (value, anchor_x) in [(x_lo, sx(x_lo)), (x_hi, sx(x_hi))] {
            let _ = writeln!(
                w,
                r#"<text x="{anchor_x:.2}" y="{}" text-anchor="middle">{value}</text>"#,
                oy + PANEL_H - MARGIN + 14.0
            );
        }
        for &i in members {
            let cell = &report.cells[i];
            let s = series_labels
                .iter()
                .position(|l| *l == na_or(cell.exploration))
                .expect("label collected above");
            let points: Vec<String> = cell
                .budgets
                .iter()
                .zip(&cell.pathology)
                .filter_map(|(&b, p)| p.map(|p| format!("{:.2},{:.2}", sx(x_coord(algorithm, b)), sy(p))))
                .collect();
            if points.is_empty() {
                continue;
            }
            let _ = writeln!(
                w,
                r#"<polyline fill="none" stroke="{}" stroke-width="2" points="{}"/>"#,
                PALETTE[s % PALETTE.len()],
                points.join(" ")
            );
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Run manifest in the flat `key=value` configuration format.
pub fn manifest_string(spec: &GridSpec, workers: usize) -> String {
    let heuristics: Vec<String> = spec.heuristics.iter().map(|h| h.to_string()).collect();
    let mut out = String::new();
    let _ = writeln!(out, "# lookahead-core {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "algo={}", spec.algorithm.name());
    let _ = writeln!(out, "gamma={}", join(&spec.gammas));
    let _ = writeln!(out, "b={}", join(&spec.branching));
    let _ = writeln!(out, "c={}", join(&spec.explorations));
    let _ = writeln!(out, "heuristic={}", heuristics.join(","));
    let _ = writeln!(out, "budgets={}", join(&spec.budgets));
    let _ = writeln!(out, "d_max={}", spec.max_depth);
    let _ = writeln!(out, "trees={}", spec.trees);
    let _ = writeln!(out, "seed={}", spec.master_seed);
    let _ = writeln!(out, "workers={workers}");
    out
}

fn write(path: PathBuf, contents: &str) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes `results.csv` and/or `pathology.svg` under `out_dir`.
pub fn emit_results(report: &PathologyReport, formats: &[OutputFormat], out_dir: &Path) -> Result<Vec<PathBuf>> {
    check_nonempty(report)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    formats
        .iter()
        .map(|f| match f {
            OutputFormat::Csv => write(out_dir.join("results.csv"), &csv_string(report)?),
            OutputFormat::Svg => write(out_dir.join("pathology.svg"), &svg_string(report)?),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::CellSummary;
    use super::*;

    fn summary(exploration: Option<f64>, budgets: Vec<u64>) -> CellSummary {
        let n = budgets.len();
        CellSummary {
            gamma: 1.0,
            branching: 2,
            exploration,
            heuristic: "perfect".into(),
            algorithm: Algorithm::Uct,
            budgets,
            delta: vec![0.5; n],
            se: vec![0.05; n],
            pathology: vec![Some(1.0); n],
            trees: 100,
            wall_time_secs: 0.0,
        }
    }

    #[test]
    fn one_cell_five_budgets() {
        let report = PathologyReport {
            cells: vec![summary(Some(1.0), vec![10, 100, 1000, 10000, 100000])],
        };
        let csv = csv_string(&report).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "1,2,1,perfect,uct,10,0.500000,0.050000,1.000000");
    }

    #[test]
    fn empty_reports_are_rejected() {
        assert!(csv_string(&PathologyReport { cells: vec![] }).is_err());
        let report = PathologyReport {
            cells: vec![summary(Some(1.0), vec![])],
        };
        assert!(csv_string(&report).is_err());
        assert!(svg_string(&report).is_err());
    }

    #[test]
    fn svg_has_a_polyline_per_exploration_constant() {
        let report = PathologyReport {
            cells: vec![summary(Some(0.5), vec![10, 100]), summary(Some(2.0), vec![10, 100])],
        };
        let svg = svg_string(&report).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.starts_with("<svg"));
    }

    #[test]
    fn unwritable_directory() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        fs::write(&file, "x").unwrap();
        let report = PathologyReport {
            cells: vec![summary(None, vec![10])],
        };
        assert!(emit_results(&report, &[OutputFormat::Csv], &file.join("sub")).is_err());
    }
}
