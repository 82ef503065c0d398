use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::graph::{NodeId, Timestamp};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("no edges")]
    NoEdges,

    #[error("node {node} out of range (graph has {n_nodes} nodes)")]
    NodeOutOfRange { node: NodeId, n_nodes: usize },

    #[error("edge ({src}, {dst}, {time}) is not in the graph")]
    EdgeNotFound {
        src: NodeId,
        dst: NodeId,
        time: Timestamp,
    },

    #[error("empty neighbor set")]
    EmptyNeighborhood,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("aborted after {rejected} consecutive walks shorter than the minimum length {omega}")]
    WalkBudgetStalled { rejected: u64, omega: usize },

    #[error("empty walk set")]
    NoWalks,

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("test window fully overlaps training pairs")]
    NoPositives,

    #[error("cannot sample {needed} negative pairs, only {available} non-adjacent pairs exist")]
    NotEnoughNegatives { needed: usize, available: usize },

    #[error("labels contain a single class")]
    SingleClass,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
