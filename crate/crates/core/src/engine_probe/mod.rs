//! UCI client that measures how chess positions behave under deep search.
//!
//! Positions are sampled by random walks from the initial position, either
//! uniform over legal moves ("light") or uniform over an engine's top lines
//! ("heavy"). For a sampled choice node the empirical critical rate is the
//! fraction of its non-best children whose shallower search sign disagrees
//! with the parent's deep search sign. Evaluation histograms pair each
//! sample's deep-search sign with its shallowest obtainable evaluation.
//!
//! Engine lines are parsed from the side to move's point of view; child
//! scores are negated to express them for the parent's mover.

mod mock;
mod transport;
mod uci;

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::io;
use std::path::PathBuf;
use std::time::Duration;

use rand::Rng;
use serde::Serialize;

pub use mock::{MockEngine, MockScript, STARTPOS_MOVES};
pub use transport::{Direction, ProcessTransport, ReplayTransport, Transcript, Transport};
pub use uci::{logistic, parse_info, parse_perft_move, Position, PvLine, Score};

use crate::error::{Error, Result};
use crate::heuristics::HistogramPdf;
use crate::rng;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);
pub const DEFAULT_CP_SCALE: f64 = 400.0;

/// Engine options applied at session start, in order.
pub const DEFAULT_OPTIONS: [(&str, &str); 21] = [
    ("Debug Log File", ""),
    ("Contempt", "24"),
    ("Threads", "1"),
    ("Hash", "16"),
    ("Clear Hash Ponder", "false"),
    ("MultiPV", "1"),
    ("Skill Level", "20"),
    ("Move Overhead", "10"),
    ("Slow Mover", "100"),
    ("nodestime", "0"),
    ("UCI_Chess960", "false"),
    ("UCI_AnalyseMode", "false"),
    ("UCI_LimitStrength", "false"),
    ("UCI_Elo", "1350"),
    ("UCI_ShowWDL", "false"),
    ("SyzygyPath", ""),
    ("SyzygyProbeDepth", "1"),
    ("Syzygy50MoveRule", "true"),
    ("SyzygyProbeLimit", "7"),
    ("Use NNUE", "false"),
    ("EvalFile", "nn-62ef826d1a6d.nnue"),
];

#[derive(Debug, thiserror::Error)]
pub enum ProbeError {
    #[error("cannot start engine `{program}`: {source}")]
    Spawn {
        program: String,
        #[source]
        source: io::Error,
    },
    #[error("engine did not answer within {0:?}")]
    Timeout(Duration),
    #[error("engine exited unexpectedly")]
    EngineExited,
    #[error("cannot parse engine output `{line}`: {reason}")]
    Parse { line: String, reason: String },
    #[error("replay diverged: expected {expected}, {found}")]
    ReplayMismatch { expected: String, found: String },
    #[error("could not sample a position: {0}")]
    Sampling(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PlayoutMode {
    /// Uniform over legal moves.
    Light,
    /// Uniform over the top lines of a shallow multi-PV search.
    Heavy,
}

impl fmt::Display for PlayoutMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlayoutMode::Light => "light",
            PlayoutMode::Heavy => "heavy",
        })
    }
}

impl std::str::FromStr for PlayoutMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "light" => Ok(PlayoutMode::Light),
            "heavy" => Ok(PlayoutMode::Heavy),
            other => Err(Error::InvalidParams(format!("unknown playout mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProbeConfig {
    pub engine: PathBuf,
    pub engine_args: Vec<String>,
    pub plies: u32,
    pub mode: PlayoutMode,
    /// Depth of the parent search that stands in for the true value.
    pub deep_depth: u32,
    pub child_depth: u32,
    pub heavy_depth: u32,
    pub multipv: u32,
    pub samples: usize,
    pub seed: u64,
    /// Applied after, and overriding, [`DEFAULT_OPTIONS`].
    pub options: Vec<(String, String)>,
    pub timeout: Duration,
    pub cp_scale: f64,
    pub record_transcript: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            engine: PathBuf::from("stockfish"),
            engine_args: Vec::new(),
            plies: 10,
            mode: PlayoutMode::Light,
            deep_depth: 20,
            child_depth: 19,
            heavy_depth: 10,
            multipv: 3,
            samples: 100,
            seed: 0,
            options: Vec::new(),
            timeout: DEFAULT_TIMEOUT,
            cp_scale: DEFAULT_CP_SCALE,
            record_transcript: false,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.deep_depth < 1 || self.child_depth < 1 || self.heavy_depth < 1 {
            return Err(Error::InvalidParams("search depths must be at least 1".into()));
        }
        if self.multipv < 1 {
            return Err(Error::InvalidParams("multipv must be at least 1".into()));
        }
        if !(self.cp_scale.is_finite() && self.cp_scale > 0.0) {
            return Err(Error::InvalidParams("centipawn scale must be positive".into()));
        }
        Ok(())
    }

    /// Defaults with overrides applied; overrides of unknown names append.
    pub fn resolved_options(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> =
            DEFAULT_OPTIONS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        for (name, value) in &self.options {
            match out.iter_mut().find(|(k, _)| k == name) {
                Some(slot) => slot.1 = value.clone(),
                None => out.push((name.clone(), value.clone())),
            }
        }
        out
    }
}

/// `setoption` wire form; empty values omit the trailing space.
pub fn setoption_command(name: &str, value: &str) -> String {
    if value.is_empty() {
        format!("setoption name {name} value")
    } else {
        format!("setoption name {name} value {value}")
    }
}

/// Search limit of a `go` command.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Go {
    pub depth: u32,
    pub nodes: Option<u64>,
}

impl Go {
    pub fn depth(depth: u32) -> Go {
        Go { depth, nodes: None }
    }

    /// Shallowest evaluation baseline UCI offers: depth 1, one node.
    pub fn minimal() -> Go {
        Go {
            depth: 1,
            nodes: Some(1),
        }
    }
}

impl fmt::Display for Go {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "go depth {}", self.depth)?;
        if let Some(n) = self.nodes {
            write!(f, " nodes {n}")?;
        }
        Ok(())
    }
}

/// A live UCI conversation.
pub struct EngineSession {
    transport: Box<dyn Transport>,
    timeout: Duration,
    transcript: Option<Transcript>,
    multipv: u32,
    engine_name: Option<String>,
    advertised: Vec<String>,
    rejected: Vec<String>,
}

impl EngineSession {
    pub fn spawn(cfg: &ProbeConfig) -> Result<EngineSession> {
        let transport = ProcessTransport::spawn(&cfg.engine, &cfg.engine_args)?;
        EngineSession::start(Box::new(transport), cfg)
    }

    /// Handshake and option setup over an existing transport.
    pub fn start(transport: Box<dyn Transport>, cfg: &ProbeConfig) -> Result<EngineSession> {
        cfg.validate()?;
        let mut s = EngineSession {
            transport,
            timeout: cfg.timeout,
            transcript: cfg.record_transcript.then(Transcript::default),
            multipv: 1,
            engine_name: None,
            advertised: Vec::new(),
            rejected: Vec::new(),
        };
        s.send("uci")?;
        for line in s.read_until(|l| l == "uciok")? {
            if let Some(name) = line.strip_prefix("id name ") {
                s.engine_name = Some(name.to_string());
            } else if let Some(rest) = line.strip_prefix("option name ") {
                let name = rest.split(" type").next().unwrap_or(rest).trim();
                s.advertised.push(name.to_string());
            }
        }
        for (name, value) in cfg.resolved_options() {
            s.set_option(&name, &value)?;
        }
        s.ready()?;
        Ok(s)
    }

    fn send(&mut self, line: &str) -> Result<()> {
        if let Some(t) = &mut self.transcript {
            t.push(Direction::Sent, line);
        }
        self.transport.send(line)?;
        Ok(())
    }

    fn recv(&mut self) -> Result<String> {
        let line = self.transport.recv(self.timeout)?;
        if let Some(t) = &mut self.transcript {
            t.push(Direction::Received, &line);
        }
        Ok(line)
    }

    /// Lines up to and including the first one matching `done`.
    fn read_until(&mut self, done: impl Fn(&str) -> bool) -> Result<Vec<String>> {
        let mut lines = Vec::new();
        loop {
            let line = self.recv()?;
            let finished = done(&line);
            lines.push(line);
            if finished {
                return Ok(lines);
            }
        }
    }

    /// Sends the option if the engine advertised it. Unknown options are
    /// logged and skipped; returns whether the option was sent.
    pub fn set_option(&mut self, name: &str, value: &str) -> Result<bool> {
        if !self.advertised.iter().any(|o| o == name) {
            log::warn!("engine does not offer option `{name}`; skipped");
            self.rejected.push(name.to_string());
            return Ok(false);
        }
        self.send(&setoption_command(name, value))?;
        if name == "MultiPV" {
            self.multipv = value.parse().unwrap_or(1);
        }
        Ok(true)
    }

    pub fn ready(&mut self) -> Result<()> {
        self.send("isready")?;
        self.read_until(|l| l == "readyok")?;
        Ok(())
    }

    pub fn engine_name(&self) -> Option<&str> {
        self.engine_name.as_deref()
    }

    pub fn rejected_options(&self) -> &[String] {
        &self.rejected
    }

    pub fn transcript(&self) -> Option<&Transcript> {
        self.transcript.as_ref()
    }

    /// Ends the conversation and returns the transcript, if recorded.
    pub fn quit(mut self) -> Result<Option<Transcript>> {
        self.send("quit")?;
        Ok(self.transcript.take())
    }

    /// Legal moves via `go perft 1`.
    pub fn legal_moves(&mut self, position: &Position) -> Result<Vec<String>> {
        self.send(&format!("position {position}"))?;
        self.send("go perft 1")?;
        let lines = self.read_until(|l| l.starts_with("Nodes searched"))?;
        Ok(lines.iter().filter_map(|l| parse_perft_move(l)).collect())
    }
}

/// Searches `position` and returns the final line for each PV index, best
/// first. Scores are from the side to move's point of view.
pub fn probe_eval(session: &mut EngineSession, position: &Position, go: Go, multipv: u32) -> Result<Vec<PvLine>> {
    if multipv != session.multipv {
        session.set_option("MultiPV", &multipv.to_string())?;
    }
    session.send(&format!("position {position}"))?;
    session.send(&go.to_string())?;
    let mut lines = BTreeMap::new();
    for line in session.read_until(|l| l.starts_with("bestmove"))? {
        if let Some(pv) = parse_info(&line)? {
            lines.insert(pv.multipv, pv);
        }
    }
    Ok(lines.into_values().collect())
}

/// Sign of the best line, or 0 when the search returned none.
fn top_sign(lines: &[PvLine]) -> i8 {
    lines.first().map_or(0, |l| l.score.sign())
}

/// Random walks of `cfg.plies` plies from the initial position. Walks that
/// reach a position without moves are discarded and redrawn.
pub fn sample_positions(session: &mut EngineSession, cfg: &ProbeConfig) -> Result<Vec<Position>> {
    let mut rng = rng::stream_rng(cfg.seed);
    let mut out = Vec::with_capacity(cfg.samples);
    let max_attempts = cfg.samples.saturating_mul(50).max(100);
    let mut attempts = 0;
    while out.len() < cfg.samples {
        if attempts == max_attempts {
            return Err(ProbeError::Sampling(format!(
                "only {} of {} walks reached ply {} in {attempts} attempts",
                out.len(),
                cfg.samples,
                cfg.plies
            ))
            .into());
        }
        attempts += 1;
        let mut position = Position::startpos();
        let mut alive = true;
        for _ in 0..cfg.plies {
            let candidates: Vec<String> = match cfg.mode {
                PlayoutMode::Light => session.legal_moves(&position)?,
                PlayoutMode::Heavy => probe_eval(session, &position, Go::depth(cfg.heavy_depth), cfg.multipv)?
                    .into_iter()
                    .filter_map(|l| l.mv)
                    .collect(),
            };
            if candidates.is_empty() {
                alive = false;
                break;
            }
            let mv = &candidates[rng.random_range(0..candidates.len())];
            position = position.with_move(mv);
        }
        if alive {
            out.push(position);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalRateRecord {
    /// `position` command argument, a FEN or `startpos` plus moves.
    pub position: String,
    /// Children with a determinate sign.
    pub b: usize,
    pub legal_moves: usize,
    pub parent_sign: i8,
    /// Child signs from the parent mover's point of view; 0 = excluded.
    pub child_signs: Vec<i8>,
    pub gamma_tilde: f64,
    /// Some child was excluded, or no child agreed with the parent.
    pub flagged: bool,
}

/// Empirical critical rate of `position`, or `None` when it is not a choice
/// node (deep sign not +1) or fewer than two children have a sign.
pub fn empirical_gamma(
    session: &mut EngineSession,
    position: &Position,
    cfg: &ProbeConfig,
) -> Result<Option<CriticalRateRecord>> {
    let parent_sign = top_sign(&probe_eval(session, position, Go::depth(cfg.deep_depth), 1)?);
    if parent_sign != 1 {
        return Ok(None);
    }
    let moves = session.legal_moves(position)?;
    if moves.len() < 2 {
        return Ok(None);
    }
    let mut child_signs = Vec::with_capacity(moves.len());
    for mv in &moves {
        let lines = probe_eval(session, &position.with_move(mv), Go::depth(cfg.child_depth), 1)?;
        child_signs.push(-top_sign(&lines));
    }
    let b = child_signs.iter().filter(|&&s| s != 0).count();
    if b < 2 {
        return Ok(None);
    }
    let disagreements = child_signs.iter().filter(|&&s| s != 0 && s != parent_sign).count();
    let denominator = b - 1;
    Ok(Some(CriticalRateRecord {
        position: position.to_string(),
        b,
        legal_moves: moves.len(),
        parent_sign,
        flagged: b < moves.len() || disagreements > denominator,
        gamma_tilde: disagreements.min(denominator) as f64 / denominator as f64,
        child_signs,
    }))
}

pub const RECORD_CSV_HEADER: &str = "fen,b,parent_sign,gamma_tilde";

pub fn records_csv(records: &[CriticalRateRecord]) -> String {
    let mut out = format!("{RECORD_CSV_HEADER}\n");
    for r in records {
        let _ = writeln!(out, "{},{},{},{}", r.position, r.b, r.parent_sign, r.gamma_tilde);
    }
    out
}

#[derive(Clone, Debug)]
pub struct HistogramBuild {
    pub pdf: HistogramPdf,
    pub plus_samples: usize,
    pub minus_samples: usize,
    /// Samples whose deep sign was 0 or unavailable.
    pub dropped: usize,
}

/// Bins each sample's minimal-search evaluation, mapped to `[0, 1]`, by the
/// sign of its deep search.
pub fn build_eval_histograms(
    session: &mut EngineSession,
    samples: &[Position],
    bins: usize,
    cfg: &ProbeConfig,
) -> Result<HistogramBuild> {
    if samples.is_empty() {
        return Err(Error::InvalidParams("no sample positions".into()));
    }
    if bins < 2 {
        return Err(Error::InvalidParams("at least two bins are required".into()));
    }
    let mut plus = vec![0.0; bins];
    let mut minus = vec![0.0; bins];
    let (mut plus_samples, mut minus_samples, mut dropped) = (0, 0, 0);
    for position in samples {
        let class = top_sign(&probe_eval(session, position, Go::depth(cfg.deep_depth), 1)?);
        if class == 0 {
            dropped += 1;
            continue;
        }
        let lines = probe_eval(session, position, Go::minimal(), 1)?;
        let Some(first) = lines.first() else {
            dropped += 1;
            continue;
        };
        let u = first.score.to_unit(cfg.cp_scale);
        let bin = ((u * bins as f64) as usize).min(bins - 1);
        if class > 0 {
            plus[bin] += 1.0;
            plus_samples += 1;
        } else {
            minus[bin] += 1.0;
            minus_samples += 1;
        }
    }
    if dropped > 0 {
        log::info!("{dropped} samples with an indeterminate deep sign were dropped");
    }
    if plus_samples == 0 || minus_samples == 0 {
        return Err(Error::Histogram(format!(
            "need samples of both classes, got {plus_samples} winning and {minus_samples} losing"
        )));
    }
    Ok(HistogramBuild {
        pdf: HistogramPdf::from_weights(plus, minus)?,
        plus_samples,
        minus_samples,
        dropped,
    })
}
