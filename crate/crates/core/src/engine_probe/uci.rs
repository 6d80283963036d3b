//! UCI wire-format pieces: scores, positions, `info` and `perft` lines.

use std::fmt;
use std::str::FromStr;

use super::ProbeError;

/// Engine score from the side to move's point of view.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Score {
    Cp(i32),
    /// Moves to mate; negative when the side to move is being mated.
    Mate(i32),
}

impl Score {
    /// `-1`, `0` or `+1`. `mate 0` means the side to move is already mated.
    pub fn sign(self) -> i8 {
        match self {
            Score::Cp(cp) => cp.signum() as i8,
            Score::Mate(m) if m > 0 => 1,
            Score::Mate(_) => -1,
        }
    }

    /// Same score seen from the other side.
    pub fn negate(self) -> Score {
        match self {
            Score::Cp(cp) => Score::Cp(-cp),
            Score::Mate(m) => Score::Mate(-m),
        }
    }

    /// Expected score in `[0, 1]`: `1 / (1 + 10^(-cp / scale))`, with mates
    /// at the limits.
    pub fn to_unit(self, scale: f64) -> f64 {
        match self {
            Score::Cp(cp) => logistic(f64::from(cp), scale),
            s => {
                if s.sign() > 0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

pub fn logistic(cp: f64, scale: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf(-cp / scale))
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Score::Cp(cp) => write!(f, "cp {cp}"),
            Score::Mate(m) => write!(f, "mate {m}"),
        }
    }
}

/// One principal variation from a (multi-PV) search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PvLine {
    pub multipv: u32,
    pub depth: u32,
    pub score: Score,
    /// First move of the variation.
    pub mv: Option<String>,
}

/// Parses an `info` line carrying a score. Returns `Ok(None)` for `info`
/// lines without one (`info string`, `info currmove`, ...).
pub fn parse_info(line: &str) -> Result<Option<PvLine>, ProbeError> {
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some("info") {
        return Ok(None);
    }
    let bad = |reason: &str| ProbeError::Parse {
        line: line.to_string(),
        reason: reason.to_string(),
    };
    let num = |t: Option<&str>, what: &str| -> Result<i64, ProbeError> {
        t.and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(&format!("expected an integer after `{what}`")))
    };
    let (mut multipv, mut depth, mut score, mut mv) = (1u32, 0u32, None, None);
    while let Some(tok) = tokens.next() {
        match tok {
            "string" => return Ok(None),
            "multipv" => multipv = num(tokens.next(), tok)? as u32,
            "depth" => depth = num(tokens.next(), tok)? as u32,
            "score" => {
                let kind = tokens.next();
                let value = num(tokens.next(), "score")? as i32;
                score = Some(match kind {
                    Some("cp") => Score::Cp(value),
                    Some("mate") => Score::Mate(value),
                    _ => return Err(bad("score must be `cp` or `mate`")),
                });
            }
            "pv" => {
                mv = tokens.next().map(str::to_string);
                break;
            }
            _ => {}
        }
    }
    Ok(score.map(|score| PvLine { multipv, depth, score, mv }))
}

/// Parses one `<move>: <count>` line of `go perft 1` output.
pub fn parse_perft_move(line: &str) -> Option<String> {
    let (mv, count) = line.split_once(':')?;
    let mv = mv.trim();
    let is_square = |s: &[u8]| s.len() == 2 && (b'a'..=b'h').contains(&s[0]) && (b'1'..=b'8').contains(&s[1]);
    let bytes = mv.as_bytes();
    let ok = (bytes.len() == 4 || (bytes.len() == 5 && b"qrbn".contains(&bytes[4])))
        && is_square(&bytes[0..2])
        && is_square(&bytes[2..4])
        && count.trim().parse::<u64>().is_ok();
    ok.then(|| mv.to_string())
}

/// A position as UCI addresses it: a base plus moves played from it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Position {
    /// `None` for the standard initial position.
    pub fen: Option<String>,
    pub moves: Vec<String>,
}

impl Position {
    pub fn startpos() -> Position {
        Position { fen: None, moves: Vec::new() }
    }

    pub fn with_move(&self, mv: &str) -> Position {
        let mut next = self.clone();
        next.moves.push(mv.to_string());
        next
    }

    pub fn plies(&self) -> usize {
        self.moves.len()
    }
}

impl fmt::Display for Position {
    /// The argument of the `position` command.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.fen {
            None => f.write_str("startpos")?,
            Some(fen) => write!(f, "fen {fen}")?,
        }
        if !self.moves.is_empty() {
            write!(f, " moves {}", self.moves.join(" "))?;
        }
        Ok(())
    }
}

impl FromStr for Position {
    type Err = ProbeError;

    /// Accepts `startpos [moves ...]`, `fen <FEN> [moves ...]` or a bare FEN.
    fn from_str(s: &str) -> Result<Self, ProbeError> {
        let s = s.trim();
        let (base, moves) = match s.split_once(" moves") {
            Some((base, moves)) => (base.trim(), moves.split_whitespace().map(str::to_string).collect()),
            None => (s, Vec::new()),
        };
        let fen = match base {
            "startpos" => None,
            _ => {
                let fen = base.strip_prefix("fen ").unwrap_or(base).trim();
                if fen.split_whitespace().count() < 2 || !fen.contains('/') {
                    return Err(ProbeError::Parse {
                        line: s.to_string(),
                        reason: "not a FEN or `startpos`".into(),
                    });
                }
                Some(fen.to_string())
            }
        };
        Ok(Position { fen, moves })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_signs() {
        assert_eq!(Score::Cp(-35).sign(), -1);
        assert_eq!(Score::Cp(0).sign(), 0);
        assert_eq!(Score::Mate(3).sign(), 1);
        assert_eq!(Score::Mate(-2).sign(), -1);
        assert_eq!(Score::Mate(0).sign(), -1);
        assert_eq!(Score::Mate(3).negate().sign(), -1);
    }

    #[test]
    fn logistic_map() {
        assert_eq!(logistic(0.0, 400.0), 0.5);
        assert!(logistic(1e6, 400.0) > 1.0 - 1e-12);
        assert!(logistic(-1e6, 400.0) < 1e-12);
        assert!((logistic(400.0, 400.0) - 10.0 / 11.0).abs() < 1e-12);
        assert_eq!(Score::Mate(-1).to_unit(400.0), 0.0);
    }

    #[test]
    fn info_lines() {
        let l = parse_info("info depth 19 seldepth 25 multipv 2 score cp -35 nodes 100 pv e7e5 g1f3")
            .unwrap()
            .unwrap();
        assert_eq!(l.multipv, 2);
        assert_eq!(l.depth, 19);
        assert_eq!(l.score, Score::Cp(-35));
        assert_eq!(l.mv.as_deref(), Some("e7e5"));
        let l = parse_info("info depth 3 score mate -2 lowerbound pv a1a2").unwrap().unwrap();
        assert_eq!(l.score, Score::Mate(-2));
        assert_eq!(l.multipv, 1);
        assert!(parse_info("info string NNUE disabled").unwrap().is_none());
        assert!(parse_info("info depth 4 currmove e2e4").unwrap().is_none());
        assert!(parse_info("info depth 4 score wdl 1").is_err());
    }

    #[test]
    fn perft_lines() {
        assert_eq!(parse_perft_move("e2e4: 1").as_deref(), Some("e2e4"));
        assert_eq!(parse_perft_move("a7a8q: 1").as_deref(), Some("a7a8q"));
        assert_eq!(parse_perft_move("Nodes searched: 20"), None);
        assert_eq!(parse_perft_move(""), None);
    }

    #[test]
    fn positions_round_trip() {
        for s in [
            "startpos",
            "startpos moves e2e4 e7e5",
            "fen rnbqkbnr/pppppppp/8/8/4P3/8/PPPP1PPP/RNBQKBNR b KQkq - 0 1",
            "fen 8/8/8/8/8/8/8/K1k5 w - - 0 1 moves a1a2",
        ] {
            let p: Position = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        let bare: Position = "8/8/8/8/8/8/8/K1k5 w - - 0 1".parse().unwrap();
        assert_eq!(bare.to_string(), "fen 8/8/8/8/8/8/8/K1k5 w - - 0 1");
        assert!("hello".parse::<Position>().is_err());
    }
}
