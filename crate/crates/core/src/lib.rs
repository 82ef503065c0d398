//! Dynamic node embeddings learned from temporal random walks over
//! timestamped edge streams.
//!
//! The pipeline is: ingest an edge stream into a [`TemporalGraph`], sample
//! time-respecting walks with [`walker::generate_walks`] (or, online, with
//! [`walker::backward_walks_for_edge`] as each edge arrives), and fit
//! skip-gram embeddings over the walks with [`embedder`]. The
//! [`evaluation`] module reproduces a temporal link-prediction protocol on
//! top of that, including a discrete-snapshot baseline.

pub mod embedder;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod rng;
pub mod sampling;
pub mod synthetic;
pub mod walker;

pub use error::{Error, Result};
pub use graph::{LoadOptions, Neighbor, NodeId, TemporalEdge, TemporalGraph, Timestamp};
pub use sampling::{BiasConfig, BiasKind, Favor};
pub use walker::{TemporalWalk, WalkBudget, WalkConfig, WalkKind};
pub use embedder::{EmbeddingMatrix, OnlineTrainer, TrainConfig};
pub use evaluation::{EdgeOperator, LinkPredictionConfig, LinkPredictionReport, WalkMode};
