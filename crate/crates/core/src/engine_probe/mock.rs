//! A scripted in-process UCI engine for tests and offline runs.
//!
//! Script lines (`#` starts a comment):
//!
//! ```text
//! option <name>                          advertise an option (repeatable)
//! legal <position> = <move> <move> ...   legal moves of a position
//! eval <position> [@ <depth>] = <score> <move>; <score> <move>; ...
//! silent                                 never reply to anything
//! ```
//!
//! `<position>` uses the `position` command syntax and `<score>` is
//! `cp <n>` or `mate <n>`, listed best first. Positions without a scripted
//! entry get deterministic synthetic moves and scores. Without `option`
//! lines, the engine advertises the default option set.

use std::collections::{HashMap, VecDeque};
use std::io::{self, BufRead, Write};
use std::str::FromStr;
use std::time::Duration;

use super::transport::Transport;
use super::uci::{Position, Score};
use super::{ProbeError, DEFAULT_OPTIONS};
use crate::rng;

/// The 20 legal moves of the initial chess position.
pub const STARTPOS_MOVES: [&str; 20] = [
    "a2a3", "b2b3", "c2c3", "d2d3", "e2e3", "f2f3", "g2g3", "h2h3", "a2a4", "b2b4", "c2c4", "d2d4", "e2e4", "f2f4",
    "g2g4", "h2h4", "b1a3", "b1c3", "g1f3", "g1h3",
];

/// Scripted lines for one (position, depth) key: score and first move.
pub type ScriptedLines = Vec<(Score, String)>;

#[derive(Clone, Debug, Default)]
pub struct MockScript {
    pub options: Vec<String>,
    pub legal: HashMap<String, Vec<String>>,
    /// Keyed by position and optional depth; lines best first.
    pub evals: HashMap<(String, Option<u32>), ScriptedLines>,
    pub silent: bool,
}

impl MockScript {
    fn legal_moves(&self, pos: &Position) -> Vec<String> {
        let key = pos.to_string();
        if let Some(moves) = self.legal.get(&key) {
            return moves.clone();
        }
        if pos.fen.is_none() && pos.moves.is_empty() {
            return STARTPOS_MOVES.iter().map(|m| m.to_string()).collect();
        }
        let h = position_hash(&key);
        let pool: Vec<String> = (b'a'..=b'h')
            .flat_map(|f| (b'1'..=b'7').map(move |r| format!("{}{}{}{}", f as char, r as char, f as char, (r + 1) as char)))
            .collect();
        let count = 12 + (h % 25) as usize;
        let start = (h >> 8) as usize % pool.len();
        (0..count).map(|i| pool[(start + i) % pool.len()].clone()).collect()
    }

    fn lines(&self, pos: &Position, depth: u32, multipv: u32) -> Vec<(Score, String)> {
        let key = pos.to_string();
        if let Some(lines) = self
            .evals
            .get(&(key.clone(), Some(depth)))
            .or_else(|| self.evals.get(&(key.clone(), None)))
        {
            return lines.iter().take(multipv as usize).cloned().collect();
        }
        let legal = self.legal_moves(pos);
        if legal.is_empty() {
            return Vec::new();
        }
        let h = position_hash(&key);
        let base = (h % 801) as i32 - 400;
        (0..(multipv as usize).min(legal.len()))
            .map(|i| {
                let mv = legal[((h >> 16) as usize + i) % legal.len()].clone();
                (Score::Cp(base - 25 * i as i32), mv)
            })
            .collect()
    }
}

fn position_hash(key: &str) -> u64 {
    key.bytes().fold(0x9E37_79B9_7F4A_7C15, |h, b| rng::mix64(h ^ u64::from(b)))
}

fn script_error(line: &str, reason: &str) -> ProbeError {
    ProbeError::Parse {
        line: line.to_string(),
        reason: reason.to_string(),
    }
}

fn parse_score_line(entry: &str, raw: &str) -> Result<(Score, String), ProbeError> {
    let t: Vec<&str> = entry.split_whitespace().collect();
    if t.len() != 3 {
        return Err(script_error(raw, "eval entries are `cp|mate <n> <move>`"));
    }
    let n: i32 = t[1].parse().map_err(|_| script_error(raw, "score is not an integer"))?;
    let score = match t[0] {
        "cp" => Score::Cp(n),
        "mate" => Score::Mate(n),
        _ => return Err(script_error(raw, "score kind must be `cp` or `mate`")),
    };
    Ok((score, t[2].to_string()))
}

impl FromStr for MockScript {
    type Err = ProbeError;

    fn from_str(s: &str) -> Result<Self, ProbeError> {
        let mut script = MockScript::default();
        for raw in s.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (head, rest) = line.split_once(' ').unwrap_or((line, ""));
            match head {
                "silent" => script.silent = true,
                "option" => script.options.push(rest.trim().to_string()),
                "legal" => {
                    let (pos, moves) = rest.split_once('=').ok_or_else(|| script_error(raw, "missing `=`"))?;
                    let pos: Position = pos.parse()?;
                    script
                        .legal
                        .insert(pos.to_string(), moves.split_whitespace().map(str::to_string).collect());
                }
                "eval" => {
                    let (lhs, entries) = rest.split_once('=').ok_or_else(|| script_error(raw, "missing `=`"))?;
                    let (pos, depth) = match lhs.split_once('@') {
                        Some((pos, d)) => (
                            pos,
                            Some(d.trim().parse().map_err(|_| script_error(raw, "depth is not an integer"))?),
                        ),
                        None => (lhs, None),
                    };
                    let pos: Position = pos.parse()?;
                    let lines = entries
                        .split(';')
                        .filter(|e| !e.trim().is_empty())
                        .map(|e| parse_score_line(e, raw))
                        .collect::<Result<Vec<_>, _>>()?;
                    script.evals.insert((pos.to_string(), depth), lines);
                }
                _ => return Err(script_error(raw, "unknown directive")),
            }
        }
        if script.options.is_empty() {
            script.options = DEFAULT_OPTIONS.iter().map(|(k, _)| k.to_string()).collect();
        }
        Ok(script)
    }
}

/// Scripted engine; replies are queued as commands arrive.
pub struct MockEngine {
    script: MockScript,
    multipv: u32,
    position: Position,
    queue: VecDeque<String>,
}

impl MockEngine {
    pub fn new(script: MockScript) -> MockEngine {
        MockEngine {
            script,
            multipv: 1,
            position: Position::startpos(),
            queue: VecDeque::new(),
        }
    }

    /// Engine with no scripted entries.
    pub fn synthetic() -> MockEngine {
        MockEngine::new("".parse().expect("empty script parses"))
    }

    /// Replies to one command.
    pub fn respond(&mut self, command: &str) -> Vec<String> {
        if self.script.silent {
            return Vec::new();
        }
        let mut tokens = command.split_whitespace();
        match tokens.next() {
            Some("uci") => {
                let mut out = vec!["id name lookahead-mock".to_string(), "id author lookahead".to_string()];
                out.extend(self.script.options.iter().map(|o| format!("option name {o} type string default")));
                out.push("uciok".into());
                out
            }
            Some("isready") => vec!["readyok".into()],
            Some("setoption") => {
                let rest = command.trim_start_matches("setoption").trim();
                let (name, value) = match rest.strip_prefix("name ").and_then(|r| r.split_once(" value")) {
                    Some((n, v)) => (n.trim(), v.trim()),
                    None => (rest.strip_prefix("name ").unwrap_or(rest).trim(), ""),
                };
                if !self.script.options.iter().any(|o| o == name) {
                    return vec![format!("No such option: {name}")];
                }
                if name == "MultiPV" {
                    self.multipv = value.parse().unwrap_or(1).max(1);
                }
                Vec::new()
            }
            Some("position") => {
                match command.trim_start_matches("position").parse() {
                    Ok(p) => self.position = p,
                    Err(_) => return vec![format!("info string bad position: {command}")],
                }
                Vec::new()
            }
            Some("go") => {
                let args: Vec<&str> = tokens.collect();
                let value_of = |key: &str| {
                    args.iter()
                        .position(|&a| a == key)
                        .and_then(|i| args.get(i + 1))
                        .and_then(|v| v.parse::<u32>().ok())
                };
                if value_of("perft").is_some() {
                    let moves = self.script.legal_moves(&self.position);
                    let mut out: Vec<String> = moves.iter().map(|m| format!("{m}: 1")).collect();
                    out.push(String::new());
                    out.push(format!("Nodes searched: {}", moves.len()));
                    return out;
                }
                let depth = value_of("depth").unwrap_or(1);
                let lines = self.script.lines(&self.position, depth, self.multipv);
                if lines.is_empty() {
                    return vec![
                        format!("info depth 0 score {}", Score::Mate(0)),
                        "bestmove (none)".into(),
                    ];
                }
                let mut out: Vec<String> = lines
                    .iter()
                    .enumerate()
                    .map(|(i, (score, mv))| {
                        format!("info depth {depth} seldepth {depth} multipv {} score {score} nodes 1000 pv {mv}", i + 1)
                    })
                    .collect();
                out.push(format!("bestmove {}", lines[0].1));
                out
            }
            Some("ucinewgame") | Some("stop") | Some("quit") | None => Vec::new(),
            Some(_) => vec![format!("Unknown command: {command}")],
        }
    }

    /// Serves the engine over standard streams until `quit` or end of input.
    pub fn serve<R: BufRead, W: Write>(&mut self, input: R, mut output: W) -> io::Result<()> {
        for line in input.lines() {
            let line = line?;
            for reply in self.respond(line.trim()) {
                writeln!(output, "{reply}")?;
            }
            output.flush()?;
            if line.trim() == "quit" {
                break;
            }
        }
        Ok(())
    }
}

impl Transport for MockEngine {
    fn send(&mut self, line: &str) -> Result<(), ProbeError> {
        let replies = self.respond(line);
        self.queue.extend(replies);
        Ok(())
    }

    fn recv(&mut self, timeout: Duration) -> Result<String, ProbeError> {
        self.queue.pop_front().ok_or(ProbeError::Timeout(timeout))
    }
}
