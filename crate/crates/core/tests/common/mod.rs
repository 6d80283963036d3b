#![allow(dead_code)]

use std::path::PathBuf;

use lookahead_core::engine_probe::{
    build_eval_histograms, empirical_gamma, sample_positions, CriticalRateRecord, EngineSession, HistogramBuild,
    MockEngine, PlayoutMode, Position, ProbeConfig, Transcript, Transport,
};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn mock_engine() -> MockEngine {
    let script = std::fs::read_to_string(data_path("mock_engine.script")).unwrap();
    MockEngine::new(script.parse().unwrap())
}

pub fn probe_config() -> ProbeConfig {
    ProbeConfig {
        plies: 2,
        mode: PlayoutMode::Light,
        samples: 2,
        seed: 7,
        options: vec![("MultiPV".into(), "3".into())],
        record_transcript: true,
        ..ProbeConfig::default()
    }
}

pub fn scripted_positions() -> Vec<Position> {
    ["e2e4", "d2d4", "g1f3", "f2f3", "b1c3"]
        .iter()
        .map(|m| Position::startpos().with_move(m))
        .collect()
}

pub struct FlowResult {
    pub records: Vec<Option<CriticalRateRecord>>,
    pub samples: Vec<Position>,
    pub histograms: HistogramBuild,
    pub transcript: Transcript,
}

/// Handshake, critical rates, light sampling, histogram build, quit.
pub fn probe_flow(transport: Box<dyn Transport>) -> FlowResult {
    let cfg = probe_config();
    let mut session = EngineSession::start(transport, &cfg).unwrap();
    let positions = scripted_positions();
    let records = positions
        .iter()
        .map(|p| empirical_gamma(&mut session, p, &cfg).unwrap())
        .collect();
    let samples = sample_positions(&mut session, &cfg).unwrap();
    let histograms = build_eval_histograms(&mut session, &positions, 4, &cfg).unwrap();
    let transcript = session.quit().unwrap().unwrap();
    FlowResult {
        records,
        samples,
        histograms,
        transcript,
    }
}
