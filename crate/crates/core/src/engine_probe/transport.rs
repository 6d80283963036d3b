//! Line transports to an engine: a child process, or a recorded transcript.

use std::collections::VecDeque;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::str::FromStr;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use super::ProbeError;

/// Line-oriented duplex channel to an engine.
pub trait Transport: Send {
    fn send(&mut self, line: &str) -> Result<(), ProbeError>;
    /// Next line from the engine, without its terminator.
    fn recv(&mut self, timeout: Duration) -> Result<String, ProbeError>;
}

/// Engine running as a child process.
pub struct ProcessTransport {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<Option<String>>,
}

impl ProcessTransport {
    pub fn spawn(program: &Path, args: &[String]) -> Result<ProcessTransport, ProbeError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|source| ProbeError::Spawn {
                program: program.display().to_string(),
                source,
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                match line {
                    Ok(l) => {
                        if tx.send(Some(l)).is_err() {
                            return;
                        }
                    }
                    Err(_) => break,
                }
            }
            let _ = tx.send(None);
        });
        Ok(ProcessTransport {
            child,
            stdin,
            lines: rx,
        })
    }
}

impl Transport for ProcessTransport {
    fn send(&mut self, line: &str) -> Result<(), ProbeError> {
        writeln!(self.stdin, "{line}")
            .and_then(|_| self.stdin.flush())
            .map_err(|_| ProbeError::EngineExited)
    }

    fn recv(&mut self, timeout: Duration) -> Result<String, ProbeError> {
        match self.lines.recv_timeout(timeout) {
            Ok(Some(line)) => Ok(line.trim_end_matches('\r').to_string()),
            Ok(None) | Err(RecvTimeoutError::Disconnected) => Err(ProbeError::EngineExited),
            Err(RecvTimeoutError::Timeout) => Err(ProbeError::Timeout(timeout)),
        }
    }
}

impl Drop for ProcessTransport {
    fn drop(&mut self) {
        let _ = writeln!(self.stdin, "quit");
        let _ = self.stdin.flush();
        for _ in 0..20 {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(5));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Sent,
    Received,
}

/// Every line exchanged with an engine, in order.
///
/// Text form: one line per entry, `> ` for lines sent to the engine and
/// `< ` for lines received.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    pub entries: Vec<(Direction, String)>,
}

impl Transcript {
    pub fn push(&mut self, direction: Direction, line: &str) {
        self.entries.push((direction, line.to_string()));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (dir, line) in &self.entries {
            let mark = match dir {
                Direction::Sent => '>',
                Direction::Received => '<',
            };
            if line.is_empty() {
                writeln!(f, "{mark}")?;
            } else {
                writeln!(f, "{mark} {line}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for Transcript {
    type Err = ProbeError;

    fn from_str(s: &str) -> Result<Self, ProbeError> {
        let mut t = Transcript::default();
        for line in s.lines() {
            let (dir, rest) = match line.as_bytes().first() {
                Some(b'>') => (Direction::Sent, &line[1..]),
                Some(b'<') => (Direction::Received, &line[1..]),
                _ => {
                    return Err(ProbeError::Parse {
                        line: line.to_string(),
                        reason: "transcript lines start with `>` or `<`".into(),
                    })
                }
            };
            t.push(dir, rest.strip_prefix(' ').unwrap_or(rest));
        }
        Ok(t)
    }
}

/// Plays a transcript back, checking every sent line against it.
pub struct ReplayTransport {
    entries: VecDeque<(Direction, String)>,
}

impl ReplayTransport {
    pub fn new(transcript: Transcript) -> ReplayTransport {
        ReplayTransport {
            entries: transcript.entries.into(),
        }
    }

    /// Lines of the transcript not yet consumed.
    pub fn remaining(&self) -> usize {
        self.entries.len()
    }
}

impl Transport for ReplayTransport {
    fn send(&mut self, line: &str) -> Result<(), ProbeError> {
        match self.entries.pop_front() {
            Some((Direction::Sent, expected)) if expected == line => Ok(()),
            other => Err(ProbeError::ReplayMismatch {
                expected: other.map_or_else(|| "end of transcript".into(), |(_, l)| format!("`{l}`")),
                found: format!("sent `{line}`"),
            }),
        }
    }

    fn recv(&mut self, timeout: Duration) -> Result<String, ProbeError> {
        match self.entries.front() {
            Some((Direction::Received, _)) => Ok(self.entries.pop_front().expect("checked").1),
            _ => Err(ProbeError::Timeout(timeout)),
        }
    }
}
