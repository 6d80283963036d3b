mod common;

use std::path::Path;
use std::time::Duration;

use lookahead_core::engine_probe::{
    records_csv, sample_positions, EngineSession, MockEngine, PlayoutMode, Position, ProbeConfig, ProcessTransport,
    ReplayTransport, STARTPOS_MOVES,
};
use lookahead_core::heuristics::load_histogram;
use lookahead_core::Value;

#[test]
fn golden_transcript() {
    let live = common::probe_flow(Box::new(common::mock_engine()));
    let path = common::data_path("golden_transcript.txt");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, live.transcript.to_string()).unwrap();
    }
    let golden = std::fs::read_to_string(path).unwrap();
    assert_eq!(live.transcript.to_string(), golden);
}

#[test]
fn replay_reproduces_a_session() {
    let live = common::probe_flow(Box::new(common::mock_engine()));
    let replay = ReplayTransport::new(live.transcript.clone());
    let again = common::probe_flow(Box::new(replay));
    assert_eq!(again.records, live.records);
    assert_eq!(again.samples, live.samples);
    assert_eq!(again.histograms.pdf, live.histograms.pdf);
    assert_eq!(again.transcript, live.transcript);
}

#[test]
fn critical_rates_from_the_sign_table() {
    let live = common::probe_flow(Box::new(common::mock_engine()));
    let r = live.records[0].as_ref().unwrap();
    assert_eq!(r.child_signs, vec![1, -1, 0]);
    assert_eq!((r.b, r.gamma_tilde, r.flagged), (2, 1.0, true));
    let r = live.records[1].as_ref().unwrap();
    assert_eq!(r.child_signs, vec![1, 1, -1, 1]);
    assert_eq!((r.b, r.flagged), (4, false));
    assert!((r.gamma_tilde - 1.0 / 3.0).abs() < 1e-15);
    let r = live.records[2].as_ref().unwrap();
    assert_eq!((r.b, r.gamma_tilde), (2, 0.0));
    assert!(live.records[3].is_none(), "forced parent");
    assert!(live.records[4].is_none(), "drawn parent");
    let csv = records_csv(&live.records.iter().flatten().cloned().collect::<Vec<_>>());
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("fen,b,parent_sign,gamma_tilde\nstartpos moves e2e4,2,1,1\n"));
}

#[test]
fn histograms_round_trip() {
    let live = common::probe_flow(Box::new(common::mock_engine()));
    let h = &live.histograms;
    assert_eq!((h.plus_samples, h.minus_samples, h.dropped), (3, 1, 1));
    // 15 cp -> 0.52, 400 cp -> 0.91, -100 cp -> 0.36 (winning); -400 cp -> 0.09
    let third = 1.0 / 3.0;
    assert_eq!(h.pdf.weights(Value::Plus), &[0.0, third, third, third]);
    assert_eq!(h.pdf.weights(Value::Minus), &[1.0, 0.0, 0.0, 0.0]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.hist");
    std::fs::write(&path, h.pdf.to_file_string()).unwrap();
    assert_eq!(load_histogram(&path).unwrap(), h.pdf);
}

#[test]
fn light_first_moves_are_uniform() {
    let cfg = ProbeConfig {
        plies: 1,
        samples: 10_000,
        seed: 99,
        ..ProbeConfig::default()
    };
    let mut session = EngineSession::start(Box::new(MockEngine::synthetic()), &cfg).unwrap();
    let samples = sample_positions(&mut session, &cfg).unwrap();
    let mut counts = [0u32; 20];
    for p in &samples {
        let i = STARTPOS_MOVES.iter().position(|m| *m == p.moves[0]).unwrap();
        counts[i] += 1;
    }
    let expected = 10_000.0 / 20.0;
    let chi2: f64 = counts.iter().map(|&c| (f64::from(c) - expected).powi(2) / expected).sum();
    // 19 degrees of freedom, 0.1% critical value
    assert!(chi2 < 43.82, "chi-square {chi2}");
}

#[test]
fn heavy_walk_with_one_line_is_the_principal_variation() {
    let cfg = ProbeConfig {
        plies: 4,
        samples: 3,
        mode: PlayoutMode::Heavy,
        multipv: 1,
        ..ProbeConfig::default()
    };
    let mut session = EngineSession::start(Box::new(MockEngine::synthetic()), &cfg).unwrap();
    let walks = sample_positions(&mut session, &cfg).unwrap();
    assert_eq!(walks.len(), 3);
    assert!(walks.iter().all(|w| *w == walks[0]));
    assert_eq!(walks[0].plies(), 4);
}

#[test]
fn heavy_walk_picks_among_top_lines() {
    let cfg = ProbeConfig {
        plies: 1,
        samples: 300,
        mode: PlayoutMode::Heavy,
        ..ProbeConfig::default()
    };
    let mut session = EngineSession::start(Box::new(MockEngine::synthetic()), &cfg).unwrap();
    let walks = sample_positions(&mut session, &cfg).unwrap();
    let mut distinct: Vec<&String> = walks.iter().map(|w| &w.moves[0]).collect();
    distinct.sort();
    distinct.dedup();
    assert_eq!(distinct.len(), 3);
}

#[test]
fn sampling_discards_dead_ends() {
    let script = "legal startpos = e2e4 f2f3\nlegal startpos moves f2f3 =\n";
    let cfg = ProbeConfig {
        plies: 2,
        samples: 20,
        ..ProbeConfig::default()
    };
    let mut session = EngineSession::start(Box::new(MockEngine::new(script.parse().unwrap())), &cfg).unwrap();
    let walks = sample_positions(&mut session, &cfg).unwrap();
    assert!(walks.iter().all(|w| w.moves[0] == "e2e4" && w.plies() == 2));
}

#[test]
fn process_transport_handshake() {
    // a shell loop answering the handshake stands in for an engine binary
    let script = r#"while read l; do case "$l" in uci) echo "id name shell"; echo uciok;; isready) echo readyok;; quit) exit 0;; esac; done"#;
    let transport = ProcessTransport::spawn(Path::new("sh"), &["-c".into(), script.into()]).unwrap();
    let cfg = ProbeConfig {
        record_transcript: true,
        timeout: Duration::from_secs(5),
        ..ProbeConfig::default()
    };
    let session = EngineSession::start(Box::new(transport), &cfg).unwrap();
    assert_eq!(session.engine_name(), Some("shell"));
    let t = session.quit().unwrap().unwrap().to_string();
    assert!(t.ends_with("> isready\n< readyok\n> quit\n"));
}

#[test]
fn fen_input_positions() {
    let p: Position = "8/8/8/8/8/8/8/K1k5 w - - 0 1".parse().unwrap();
    assert_eq!(p.to_string(), "fen 8/8/8/8/8/8/8/K1k5 w - - 0 1");
}
