use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SUBCOMMANDS: [&str; 7] = ["gen-tree", "density", "search", "experiment", "pv-check", "theorem", "probe"];

fn lookahead(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lookahead"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn desk_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.cfg")
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut full = vec!["--out-dir", dir.to_str().unwrap()];
    full.extend_from_slice(args);
    let out = lookahead(&full);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn help_exits_zero_and_lists_global_flags() {
    let top = lookahead(&["--help"]);
    assert_eq!(top.status.code(), Some(0));
    for sub in SUBCOMMANDS {
        assert!(stdout(&top).contains(sub), "{sub} missing from top-level help");
        let out = lookahead(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub} --help");
        let text = stdout(&out);
        for flag in ["--config", "--seed", "--workers", "--out-dir"] {
            assert!(text.contains(flag), "{sub} --help lacks {flag}");
        }
    }
    assert_eq!(lookahead(&["--version"]).status.code(), Some(0));
}

#[test]
fn density_at_depth_two() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(tmp.path(), &["density", "--gamma", "1", "--b", "2", "--n", "2"]);
    assert_eq!(stdout(&out), "0.75\n");
    let csv = fs::read_to_string(tmp.path().join("density.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "2,0.75,0.875"), "{csv}");
}

#[test]
fn theorem_bound_for_one_thousand() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(tmp.path(), &["theorem", "--N", "1000"]);
    assert_eq!(stdout(&out).trim(), "c = 8507.785");
}

#[test]
fn theorem_verify_small() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(tmp.path(), &["theorem", "--N", "64", "--verify", "--b", "2", "--trees", "10", "--d-max", "20"]);
    assert!(stdout(&out).contains("breadth-first in 100.0% of 10 runs"), "{}", stdout(&out));
    assert!(tmp.path().join("theorem.json").exists());
}

#[test]
fn desk_experiment_baseline_pathology_is_one() {
    let tmp = TempDir::new().unwrap();
    let config = desk_config();
    run_in(tmp.path(), &["--workers", "2", "--config", config.to_str().unwrap(), "experiment"]);
    let csv = fs::read_to_string(tmp.path().join("results.csv")).unwrap();
    let mut header = csv.lines().next().unwrap().split(',');
    let budget = header.position(|h| h == "budget").unwrap();
    let index = csv.lines().next().unwrap().split(',').position(|h| h == "pathology_index").unwrap();
    let first_budget = csv.lines().nth(1).unwrap().split(',').nth(budget).unwrap().to_string();
    let baselines: Vec<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|f| f[budget] == first_budget)
        .map(|f| f[index])
        .collect::<Vec<_>>();
    assert!(!baselines.is_empty());
    assert!(baselines.iter().all(|&p| p == "1.000000"), "{csv}");
    assert!(tmp.path().join("pathology.svg").exists());
    let manifest = fs::read_to_string(tmp.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("trees=200") && manifest.contains("workers=2"), "{manifest}");
}

#[test]
fn flags_override_config_values() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# small\ngamma = 0.5\nb = 3\n").unwrap();
    let out = run_in(tmp.path(), &["--config", cfg.to_str().unwrap(), "density", "--b", "2", "--n", "1"]);
    // k = 1 - 0.5 + 0.25
    assert_eq!(stdout(&out), "0.75\n");
    let manifest = fs::read_to_string(tmp.path().join("manifest.txt")).unwrap();
    assert!(manifest.lines().any(|l| l == "b=2") && manifest.lines().any(|l| l == "gamma=0.5"));
}

#[test]
fn usage_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(lookahead(&["density", "--bogus"]).status.code(), Some(1));
    assert_eq!(lookahead(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(lookahead(&[]).status.code(), Some(1));
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "gamma = 1\nbogus = 3\n").unwrap();
    let out = lookahead(&["--config", cfg.to_str().unwrap(), "density"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
    fs::write(&cfg, "gamma = lots\n").unwrap();
    assert_eq!(lookahead(&["--config", cfg.to_str().unwrap(), "density"]).status.code(), Some(1));
    let out_dir = tmp.path().join("o");
    let o = out_dir.to_str().unwrap();
    assert_eq!(lookahead(&["--out-dir", o, "density", "--gamma", "1.5"]).status.code(), Some(1));
    assert_eq!(lookahead(&["--out-dir", o, "experiment", "--budgets", "100,10"]).status.code(), Some(1));
    assert_eq!(lookahead(&["--out-dir", o, "search", "--heuristic", "nonsense"]).status.code(), Some(1));
}

#[test]
fn runtime_failures_exit_two() {
    let tmp = TempDir::new().unwrap();
    let o = tmp.path().to_str().unwrap();
    let out = lookahead(&["--out-dir", o, "probe", "--engine", "/nonexistent/engine"]);
    assert_eq!(out.status.code(), Some(2));
    let out = lookahead(&["--out-dir", o, "probe", "--replay", "/nonexistent/transcript"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn same_seed_same_files() {
    let runs: [&[&str]; 8] = [
        &["gen-tree", "--depth", "3", "--gamma", "0.7"],
        &["density", "--gamma", "0.9", "--b", "3"],
        &["search", "--budget", "300", "--trace", "--c", "0.5"],
        &["search", "--algo", "alphabeta", "--depth", "5", "--heuristic", "gaussian:0.3"],
        &["experiment", "--gamma", "1", "--b", "2", "--c", "1", "--trees", "12", "--budgets", "10,100"],
        &["pv-check", "--seeds", "3", "--instances", "10", "--playouts", "50", "--cost", "uniform:3"],
        &["theorem", "--N", "32", "--verify", "--b", "2", "--trees", "4", "--d-max", "12"],
        &["probe", "--mock", "synthetic", "--samples", "4", "--plies", "3", "--bins", "5", "--transcript"],
    ];
    for args in runs {
        let tmp = TempDir::new().unwrap();
        let dir = tmp.path().join("out");
        let mut with_seed = vec!["--seed", "42"];
        with_seed.extend_from_slice(args);
        run_in(&dir, &with_seed);
        let fa = files(&dir);
        fs::remove_dir_all(&dir).unwrap();
        run_in(&dir, &with_seed);
        let fb = files(&dir);
        assert!(fa.len() >= 2, "{args:?} wrote {:?}", fa.keys());
        assert!(fa == fb, "{args:?}: outputs differ");
    }
}

#[test]
fn search_writes_result_json() {
    let tmp = TempDir::new().unwrap();
    run_in(tmp.path(), &["search", "--budget", "200", "--heuristic", "perfect"]);
    let text = fs::read_to_string(tmp.path().join("search.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["algo"], "uct");
    assert_eq!(v["result"]["iterations"], 200);
    assert!(v["optimal_moves"].as_array().is_some_and(|m| !m.is_empty()));
}

#[test]
fn probe_with_mock_then_replay() {
    let live = TempDir::new().unwrap();
    let common = ["--samples", "6", "--plies", "4", "--bins", "4"];
    let mut args = vec!["probe", "--mock", "synthetic", "--transcript"];
    args.extend_from_slice(&common);
    run_in(live.path(), &args);
    let gamma = fs::read_to_string(live.path().join("gamma.csv")).unwrap();
    assert!(gamma.starts_with("fen,b,parent_sign,gamma_tilde\n"));
    assert_eq!(fs::read_to_string(live.path().join("positions.txt")).unwrap().lines().count(), 6);

    let replayed = TempDir::new().unwrap();
    let transcript = live.path().join("transcript.txt");
    let mut args = vec!["probe", "--replay", transcript.to_str().unwrap()];
    args.extend_from_slice(&common);
    run_in(replayed.path(), &args);
    for name in ["gamma.csv", "eval.hist", "positions.txt"] {
        assert_eq!(
            fs::read(live.path().join(name)).unwrap(),
            fs::read(replayed.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn probe_drives_an_engine_subprocess() {
    let tmp = TempDir::new().unwrap();
    let script = tmp.path().join("engine.script");
    fs::write(
        &script,
        "legal startpos = e2e4 d2d4\n\
         eval startpos @ 20 = cp 30 e2e4\n\
         eval startpos moves e2e4 @ 19 = cp -20 e7e5\n\
         eval startpos moves d2d4 @ 19 = cp 40 d7d5\n",
    )
    .unwrap();
    let positions = tmp.path().join("positions.txt");
    fs::write(&positions, "startpos\n").unwrap();
    let out_dir = tmp.path().join("out");
    run_in(
        &out_dir,
        &[
            "probe",
            "--task",
            "gamma",
            "--engine",
            env!("CARGO_BIN_EXE_lookahead"),
            "--engine-arg",
            "mock-engine",
            "--engine-arg",
            "--script",
            "--engine-arg",
            script.to_str().unwrap(),
            "--positions",
            positions.to_str().unwrap(),
        ],
    );
    // parent +1; children +1 and -1 from the parent's side: one disagreement of one
    assert_eq!(
        fs::read_to_string(out_dir.join("gamma.csv")).unwrap(),
        "fen,b,parent_sign,gamma_tilde\nstartpos,2,1,1\n"
    );
}
