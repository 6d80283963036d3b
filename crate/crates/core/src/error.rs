use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("child index {index} out of range for branching factor {branching}")]
    ChildOutOfRange { index: u32, branching: u32 },

    #[error("path depth {depth} exceeds maximum depth {max_depth}")]
    PathTooDeep { depth: usize, max_depth: u32 },

    #[error("depth {depth} out of range 0..={max}")]
    DepthOutOfRange { depth: u32, max: u32 },

    #[error("enumeration of {nodes} nodes exceeds the cap of {cap}")]
    EnumerationCap { nodes: u128, cap: u64 },

    #[error("malformed histogram: {0}")]
    Histogram(String),

    #[error("malformed heuristic spec `{0}`")]
    HeuristicSpec(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Probe(#[from] crate::engine_probe::ProbeError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
