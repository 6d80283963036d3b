use std::fmt::{self, Write as _};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use lookahead_core::engine_probe::{
    build_eval_histograms, empirical_gamma, records_csv, sample_positions, EngineSession, MockEngine, MockScript,
    Position, ProbeConfig, ReplayTransport, Transcript, Transport, DEFAULT_CP_SCALE, DEFAULT_TIMEOUT,
};
use lookahead_core::experiments::{
    emit_results, pathology_report, run_grid, theorem_c_bound, theorem_experiment, Algorithm, GridSpec,
    DEFAULT_BUDGETS,
};
use lookahead_core::pv_model::{pv_leaf_sum, pv_naive_plan, pv_optimal_root_action, PvCost, PvCursor, PvParams};
use lookahead_core::rng::derive_seed;
use lookahead_core::search_minimax::{alphabeta, MinimaxConfig};
use lookahead_core::search_uct::{UctConfig, UctSearch};
use lookahead_core::tree_model::{closed_form_even_density, density_limits, export_tree, node_meta, plus_density};
use lookahead_core::{GameParams, Heuristic, NodePath};
use serde_json::json;

use crate::config::Settings;
use crate::{
    Cli, Command, DensityArgs, ExperimentArgs, GenTreeArgs, MockEngineArgs, ProbeArgs, PvCheckArgs, SearchArgs,
    TheoremArgs, TreeArgs, UsageError,
};

/// Global settings shared by every subcommand.
struct Run {
    settings: Settings,
    seed: u64,
    workers: usize,
    out_dir: PathBuf,
    command: &'static str,
}

impl Run {
    fn start(cli_global: &crate::Global, command: &'static str) -> anyhow::Result<Run> {
        let mut settings = Settings::load(cli_global.config.as_deref())?;
        let seed = settings.get("seed", cli_global.seed, 0)?;
        let cores = std::thread::available_parallelism().map_or(1, usize::from);
        let workers = settings.get("workers", cli_global.workers, cores)?;
        if workers == 0 {
            bail!(UsageError("workers must be at least 1".into()));
        }
        let out_dir = settings.get(
            "out_dir",
            cli_global.out_dir.as_ref().map(|p| p.display().to_string()),
            "out".to_string(),
        )?;
        Ok(Run {
            settings,
            seed,
            workers,
            out_dir: PathBuf::from(out_dir),
            command,
        })
    }

    /// Rejects leftover config keys and writes the manifest.
    fn resolved(&self) -> anyhow::Result<()> {
        self.settings.finish()?;
        self.write("manifest.txt", &self.settings.manifest(self.command))?;
        Ok(())
    }

    fn write(&self, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir).with_context(|| format!("creating {}", self.out_dir.display()))?;
        let path = self.out_dir.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    fn tree(&mut self, args: &TreeArgs) -> anyhow::Result<GameParams> {
        let gamma = self.settings.get("gamma", args.gamma, 1.0)?;
        let b = self.settings.get("b", args.b, 2)?;
        let d_max = self.settings.get("d_max", args.d_max, 50)?;
        Ok(GameParams::new(b, gamma, d_max, self.seed)?)
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::GenTree(args) => gen_tree(Run::start(&cli.global, "gen-tree")?, &args),
        Command::Density(args) => density(Run::start(&cli.global, "density")?, &args),
        Command::Search(args) => search(Run::start(&cli.global, "search")?, args),
        Command::Experiment(args) => experiment(Run::start(&cli.global, "experiment")?, args),
        Command::PvCheck(args) => pv_check(Run::start(&cli.global, "pv-check")?, args),
        Command::Theorem(args) => theorem(Run::start(&cli.global, "theorem")?, args),
        Command::Probe(args) => probe(Run::start(&cli.global, "probe")?, args),
        Command::MockEngine(args) => mock_engine(&args),
    }
}

fn gen_tree(mut run: Run, args: &GenTreeArgs) -> anyhow::Result<()> {
    let params = run.tree(&args.tree)?;
    let depth = run.settings.get("depth", args.depth, 4)?;
    run.resolved()?;
    let dot = export_tree(&params, depth)?;
    let path = run.write("tree.dot", &dot)?;
    let root = node_meta(&params, &NodePath::root())?;
    println!("root value {}, optimal moves {:?}", root.value, root.optimal_moves);
    println!("wrote {}", path.display());
    Ok(())
}

fn density(mut run: Run, args: &DensityArgs) -> anyhow::Result<()> {
    let gamma = run.settings.get("gamma", args.gamma, 1.0)?;
    let b = run.settings.get("b", args.b, 2)?;
    let n = run.settings.get_opt("n", args.n)?;
    let depth = run.settings.get("depth", args.depth, 12)?;
    run.resolved()?;
    let params = GameParams::new(b, gamma, depth.max(n.unwrap_or(0)), run.seed)?;
    let k = params.density_ratio();
    let mut csv = String::from("n,plus_density,closed_form\n");
    for row in 0..=depth.max(n.unwrap_or(0)) {
        let closed = if row % 2 == 0 {
            closed_form_even_density(k, row / 2).to_string()
        } else {
            "NA".to_string()
        };
        let _ = writeln!(csv, "{row},{},{closed}", plus_density(&params, row)?);
    }
    run.write("density.csv", &csv)?;
    if let Some(n) = n {
        println!("{}", plus_density(&params, n)?);
        return Ok(());
    }
    println!("{:>4}  {:>10}  {:>10}", "n", "density", "closed");
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let fmt = |s: &str| s.parse::<f64>().map_or_else(|_| s.to_string(), |v| format!("{v:.6}"));
        println!("{:>4}  {:>10}  {:>10}", f[0], fmt(f[1]), fmt(f[2]));
    }
    let limits = density_limits(&params);
    println!("k = {k:.6}; even limit {:.6}, odd limit {:.6}", limits.even, limits.odd);
    Ok(())
}

fn search(mut run: Run, args: SearchArgs) -> anyhow::Result<()> {
    let params = run.tree(&args.tree)?;
    let algo = run.settings.get("algo", args.algo, Algorithm::Uct)?;
    let heuristic = run.settings.get("heuristic", args.heuristic, default_heuristic())?;
    let search_seed = derive_seed(&[run.seed, 0x5EA7C4]);
    let root = node_meta(&params, &NodePath::root())?;
    let (action, result) = match algo {
        Algorithm::Uct => {
            let c = run.settings.get("c", args.c, 1.0)?;
            let budget = run.settings.get("budget", args.budget, 1000)?;
            let trace = run.settings.get("trace", args.trace.then_some(true), false)?;
            run.resolved()?;
            let config = UctConfig::new(c, budget, heuristic.clone(), search_seed);
            let search = UctSearch::new(&params, &config)?;
            let result = if trace {
                let path = run.out_dir.join("trace.csv");
                let mut w = BufWriter::new(File::create(&path).with_context(|| format!("writing {}", path.display()))?);
                let result = search.run_traced(Some(&mut w))?;
                w.flush()?;
                result
            } else {
                search.run()
            };
            println!(
                "uct: {} iterations, {} tree nodes, breadth-first {}",
                result.iterations, result.tree_size, result.breadth_first.holds
            );
            (result.final_action(), serde_json::to_value(&result)?)
        }
        Algorithm::AlphaBeta => {
            let depth = run.settings.get("depth", args.depth, 4)?;
            run.resolved()?;
            let cfg = MinimaxConfig {
                depth,
                heuristic: heuristic.clone(),
                seed: search_seed,
            };
            let outcome = alphabeta(&params, &NodePath::root(), &cfg)?;
            println!("alphabeta: value {:.6}, {} frontier evaluations", outcome.value, outcome.frontier_evals);
            (Some(outcome.best_action), serde_json::to_value(outcome)?)
        }
        Algorithm::Random => bail!(UsageError("search supports uct and alphabeta".into())),
    };
    let correct = action.is_some_and(|a| root.optimal_moves.contains(&a));
    match action {
        Some(a) => println!("root action {a} ({})", if correct { "optimal" } else { "sub-optimal" }),
        None => println!("no root action"),
    }
    let report = json!({
        "algo": algo.name(),
        "gamma": params.critical_rate(),
        "b": params.branching(),
        "d_max": params.max_depth(),
        "seed": run.seed,
        "heuristic": heuristic.label(),
        "root_value": root.value.sign(),
        "optimal_moves": root.optimal_moves,
        "action": action,
        "correct": correct,
        "result": result,
    });
    run.write("search.json", &serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

fn default_heuristic() -> Heuristic {
    Heuristic::bundled("chess_p10_light").expect("bundled histogram")
}

fn experiment(mut run: Run, args: ExperimentArgs) -> anyhow::Result<()> {
    let defaults = GridSpec::default();
    let spec = GridSpec {
        algorithm: run.settings.get("algo", args.algo, defaults.algorithm)?,
        gammas: run.settings.get_list("gamma", args.gamma, defaults.gammas)?,
        branching: run.settings.get_list("b", args.b, defaults.branching)?,
        explorations: run.settings.get_list("c", args.c, defaults.explorations)?,
        heuristics: run.settings.get_list("heuristic", args.heuristic, defaults.heuristics)?,
        budgets: run.settings.get_list("budgets", args.budgets, defaults.budgets)?,
        max_depth: run.settings.get("d_max", args.d_max, defaults.max_depth)?,
        trees: run.settings.get("trees", args.trees, defaults.trees)?,
        master_seed: run.seed,
    };
    let formats = run.settings.get_list(
        "format",
        args.format,
        vec![
            lookahead_core::experiments::OutputFormat::Csv,
            lookahead_core::experiments::OutputFormat::Svg,
        ],
    )?;
    spec.validate()?;
    run.resolved()?;
    let started = Instant::now();
    let records = run_grid(&spec, run.workers)?;
    let report = pathology_report(&records)?;
    let written = emit_results(&report, &formats, &run.out_dir)?;
    for cell in &report.cells {
        let c = cell.exploration.map_or_else(|| "-".to_string(), |c| c.to_string());
        let delta: Vec<String> = cell.delta.iter().map(|d| format!("{d:.3}")).collect();
        let last = cell.pathology.last().copied().flatten();
        println!(
            "gamma={} b={} c={c} {} {}: delta [{}] P_last {}{}",
            cell.gamma,
            cell.branching,
            cell.heuristic,
            cell.algorithm,
            delta.join(" "),
            last.map_or_else(|| "NA".to_string(), |p| format!("{p:.3}")),
            if cell.pathological() { " pathological" } else { "" },
        );
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    println!("{} cells in {:.1}s", report.cells.len(), started.elapsed().as_secs_f64());
    Ok(())
}

/// Sub-optimal move cost: `fixed:<k>` or `uniform:<max>`; a bare integer
/// means fixed.
#[derive(Clone, Copy, Debug)]
pub struct CostArg(pub PvCost);

impl FromStr for CostArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |v: &str| v.trim().parse::<u32>().map_err(|e| format!("bad cost `{s}`: {e}"));
        match s.trim().split_once(':') {
            Some(("fixed", k)) => Ok(CostArg(PvCost::Fixed(parse(k)?))),
            Some(("uniform", m)) => Ok(CostArg(PvCost::Uniform { max: parse(m)? })),
            Some(_) => Err(format!("bad cost `{s}`: expected fixed:<k> or uniform:<max>")),
            None => Ok(CostArg(PvCost::Fixed(parse(s)?))),
        }
    }
}

impl fmt::Display for CostArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            PvCost::Fixed(k) => write!(f, "fixed:{k}"),
            PvCost::Uniform { max } => write!(f, "uniform:{max}"),
        }
    }
}

fn pv_check(mut run: Run, args: PvCheckArgs) -> anyhow::Result<()> {
    let b = run.settings.get("b", args.b, 2)?;
    let cost = run.settings.get("cost", args.cost, CostArg(PvCost::Fixed(1)))?.0;
    let depth = run.settings.get("depth", args.depth, 10)?;
    let seeds = run.settings.get("seeds", args.seeds, 100)?;
    let instances = run.settings.get("instances", args.instances, 200)?;
    let playouts = run.settings.get("playouts", args.playouts, 1000)?;
    let d_max = run.settings.get("d_max", args.d_max, 10)?;
    run.resolved()?;

    // With a fixed cost and two moves, the subtree sums differ by exactly k 2^d.
    let expected = |d: u32| match cost {
        PvCost::Fixed(k) if b == 2 => Some(i64::from(k) << d),
        _ => None,
    };
    let mut csv = String::from("seed,d,diff,expected\n");
    let (mut checked, mut mismatches) = (0u32, 0u32);
    for s in 0..seeds {
        let params = PvParams::new(b, cost, depth + 1, derive_seed(&[run.seed, u64::from(s)]))?;
        let l = PvCursor::root(&params).designated_child(&params);
        let r = (l + 1) % b;
        for d in 0..=depth {
            let diff = pv_leaf_sum(&params, &NodePath::from(vec![l]), d)?
                - pv_leaf_sum(&params, &NodePath::from(vec![r]), d)?;
            let want = expected(d);
            if let Some(want) = want {
                checked += 1;
                mismatches += u32::from(diff != want);
            }
            let want = want.map_or_else(|| "NA".to_string(), |w| w.to_string());
            let _ = writeln!(csv, "{s},{d},{diff},{want}");
        }
    }
    run.write("pv_identity.csv", &csv)?;

    let mut plans = String::from("instance,chosen,optimal\n");
    let mut hits = 0u32;
    for i in 0..instances {
        let params = PvParams::new(b, cost, d_max, derive_seed(&[run.seed, 0x9A11, u64::from(i)]))?;
        let chosen = pv_naive_plan(&params, playouts, derive_seed(&[run.seed, 0x9A12, u64::from(i)]));
        let optimal = pv_optimal_root_action(&params);
        hits += u32::from(chosen as u32 == optimal);
        let _ = writeln!(plans, "{i},{chosen},{optimal}");
    }
    run.write("pv_planner.csv", &plans)?;

    if checked > 0 {
        println!("leaf-sum identity: {mismatches} mismatches in {checked} checks");
    } else {
        println!("leaf-sum differences written; no closed form for this cost and branching");
    }
    if instances > 0 {
        println!(
            "naive planner: {hits}/{instances} optimal ({:.1}%)",
            100.0 * f64::from(hits) / f64::from(instances)
        );
    }
    Ok(())
}

fn theorem(mut run: Run, args: TheoremArgs) -> anyhow::Result<()> {
    let n = run.settings.get_opt("N", args.n)?;
    let verify = run.settings.get("verify", args.verify.then_some(true), false)?;
    let (branching, trees, d_max) = if verify {
        (
            run.settings.get_list("b", args.b, vec![2, 3])?,
            run.settings.get("trees", args.trees, 500)?,
            run.settings.get("d_max", args.d_max, 50)?,
        )
    } else {
        (Vec::new(), 0, 0)
    };
    let Some(n) = n.or((!verify).then_some(0)) else {
        bail!(UsageError("--verify needs --N".into()));
    };
    run.resolved()?;
    let budgets: Vec<u64> = if n == 0 { DEFAULT_BUDGETS.to_vec() } else { vec![n] };
    let mut csv = String::from("N,c\n");
    for &budget in &budgets {
        let c = theorem_c_bound(budget)?;
        let _ = writeln!(csv, "{budget},{c}");
        if n == 0 {
            println!("N = {budget:>6}  c = {c:.3}");
        } else {
            println!("c = {c:.3}");
        }
    }
    run.write("theorem.csv", &csv)?;
    if verify {
        let mut reports = Vec::new();
        for &b in &branching {
            let report = theorem_experiment(b, n, trees, d_max, run.seed, run.workers)?;
            println!(
                "b = {b}: breadth-first in {:.1}% of {} runs, max sibling gap {}, accuracy {:.3} +/- {:.3} (1/b = {:.3})",
                100.0 * report.breadth_first_rate,
                report.trees,
                report.max_sibling_gap,
                report.accuracy,
                report.se,
                1.0 / f64::from(b),
            );
            reports.push(report);
        }
        run.write("theorem.json", &serde_json::to_string_pretty(&reports)?)?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeTask {
    Sample,
    Gamma,
    Histogram,
    All,
}

impl FromStr for ProbeTask {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "sample" => Ok(ProbeTask::Sample),
            "gamma" => Ok(ProbeTask::Gamma),
            "histogram" => Ok(ProbeTask::Histogram),
            "all" => Ok(ProbeTask::All),
            other => Err(format!("unknown probe task `{other}`")),
        }
    }
}

impl fmt::Display for ProbeTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProbeTask::Sample => "sample",
            ProbeTask::Gamma => "gamma",
            ProbeTask::Histogram => "histogram",
            ProbeTask::All => "all",
        })
    }
}

fn probe(mut run: Run, args: ProbeArgs) -> anyhow::Result<()> {
    let d = ProbeConfig::default();
    let s = &mut run.settings;
    let task = s.get("task", args.task, ProbeTask::All)?;
    let mock = s.get_opt("mock", args.mock.map(|p| p.display().to_string()))?;
    let replay = s.get_opt("replay", args.replay.map(|p| p.display().to_string()))?;
    let positions_file = s.get_opt("positions", args.positions.map(|p| p.display().to_string()))?;
    let engine = s.get("engine", args.engine.map(|p| p.display().to_string()), d.engine.display().to_string())?;
    let engine_args = s.get_opt(
        "engine_args",
        (!args.engine_args.is_empty()).then(|| args.engine_args.join(" ")),
    )?;
    let options = s.get_opt("options", (!args.options.is_empty()).then(|| args.options.join(";")))?;
    let bins = s.get("bins", args.bins, 20)?;
    let cfg = ProbeConfig {
        engine: PathBuf::from(engine),
        engine_args: engine_args.map_or_else(Vec::new, |a| a.split_whitespace().map(str::to_string).collect()),
        plies: s.get("plies", args.plies, d.plies)?,
        mode: s.get("mode", args.mode, d.mode)?,
        deep_depth: s.get("deep_depth", args.deep_depth, d.deep_depth)?,
        child_depth: s.get("child_depth", args.child_depth, d.child_depth)?,
        heavy_depth: s.get("heavy_depth", args.heavy_depth, d.heavy_depth)?,
        multipv: s.get("multipv", args.multipv, d.multipv)?,
        samples: s.get("samples", args.samples, d.samples)?,
        seed: run.seed,
        options: parse_options(options.as_deref())?,
        timeout: Duration::from_millis(s.get("timeout_ms", args.timeout_ms, DEFAULT_TIMEOUT.as_millis() as u64)?),
        cp_scale: s.get("cp_scale", args.cp_scale, DEFAULT_CP_SCALE)?,
        record_transcript: s.get("transcript", args.transcript.then_some(true), false)?,
    };
    if mock.is_some() && replay.is_some() {
        bail!(UsageError("--mock and --replay are mutually exclusive".into()));
    }
    cfg.validate()?;
    run.resolved()?;

    let mut session = match (&mock, &replay) {
        (Some(script), _) => EngineSession::start(Box::new(load_mock(Path::new(script))?), &cfg)?,
        (_, Some(path)) => {
            let text = read(Path::new(path))?;
            let transcript: Transcript = text.parse()?;
            EngineSession::start(Box::new(ReplayTransport::new(transcript)) as Box<dyn Transport>, &cfg)?
        }
        _ => EngineSession::spawn(&cfg)?,
    };
    if let Some(name) = session.engine_name() {
        println!("engine: {name}");
    }
    for name in session.rejected_options() {
        println!("option not advertised, skipped: {name}");
    }

    let positions: Vec<Position> = match &positions_file {
        Some(path) => read(Path::new(path))?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(Position::from_str)
            .collect::<Result<_, _>>()?,
        None => sample_positions(&mut session, &cfg)?,
    };
    if matches!(task, ProbeTask::Sample | ProbeTask::All) {
        let text: String = positions.iter().map(|p| format!("{p}\n")).collect();
        run.write("positions.txt", &text)?;
        println!("{} positions", positions.len());
    }
    if matches!(task, ProbeTask::Gamma | ProbeTask::All) {
        let mut records = Vec::new();
        for p in &positions {
            records.extend(empirical_gamma(&mut session, p, &cfg)?);
        }
        run.write("gamma.csv", &records_csv(&records))?;
        let high = records.iter().filter(|r| r.gamma_tilde > 0.9).count();
        let flagged = records.iter().filter(|r| r.flagged).count();
        println!(
            "critical rate: {} of {} positions are +1 choice nodes; {high} with rate above 0.9; {flagged} flagged",
            records.len(),
            positions.len()
        );
    }
    if matches!(task, ProbeTask::Histogram | ProbeTask::All) {
        let build = build_eval_histograms(&mut session, &positions, bins, &cfg)?;
        run.write("eval.hist", &build.pdf.to_file_string())?;
        println!(
            "histogram: {} +1 samples, {} -1 samples, {} dropped",
            build.plus_samples, build.minus_samples, build.dropped
        );
    }
    if let Some(transcript) = session.quit()? {
        run.write("transcript.txt", &transcript.to_string())?;
    }
    Ok(())
}

fn parse_options(text: Option<&str>) -> anyhow::Result<Vec<(String, String)>> {
    let Some(text) = text else {
        return Ok(Vec::new());
    };
    text.split(';')
        .filter(|o| !o.trim().is_empty())
        .map(|o| match o.split_once('=') {
            Some((k, v)) => Ok((k.trim().to_string(), v.trim().to_string())),
            None => Err(UsageError(format!("engine option `{o}` is not NAME=VALUE")).into()),
        })
        .collect()
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// `synthetic` selects the built-in scriptless engine.
fn load_mock(script: &Path) -> anyhow::Result<MockEngine> {
    if script.as_os_str() == "synthetic" {
        return Ok(MockEngine::synthetic());
    }
    let parsed: MockScript = read(script)?.parse().map_err(lookahead_core::Error::from)?;
    Ok(MockEngine::new(parsed))
}

fn mock_engine(args: &MockEngineArgs) -> anyhow::Result<()> {
    let mut engine = match &args.script {
        Some(path) => load_mock(path)?,
        None => MockEngine::synthetic(),
    };
    let stdin = io::stdin();
    engine.serve(stdin.lock(), io::stdout().lock())?;
    Ok(())
}
