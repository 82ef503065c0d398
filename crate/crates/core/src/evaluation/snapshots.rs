//! Discrete-snapshot baseline: static embeddings per time slice,
//! concatenated into one vector per node.

use std::fmt;
use std::str::FromStr;

use log::warn;

use crate::embedder::{train, EmbeddingMatrix, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::{TemporalEdge, TemporalGraph};
use crate::rng::derive_seed;
use crate::walker::{static_walks, WalkBudget, WalkConfig};

use super::{run_protocol, LinkPredictionConfig, LinkPredictionReport};

const SNAPSHOT_TAG: u64 = 0x736e_6170;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SnapshotMode {
    /// Equal-width time intervals over the edge span.
    #[default]
    EqualTime,
    /// Equal numbers of edges in time order.
    EqualCount,
}

impl FromStr for SnapshotMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal-time" => Ok(SnapshotMode::EqualTime),
            "equal-count" => Ok(SnapshotMode::EqualCount),
            _ => Err(Error::InvalidConfig(format!("unknown snapshot mode {s:?}"))),
        }
    }
}

impl fmt::Display for SnapshotMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SnapshotMode::EqualTime => "equal-time",
            SnapshotMode::EqualCount => "equal-count",
        })
    }
}

/// Block used for a node that has no edges in a snapshot.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InactivePolicy {
    #[default]
    Zeros,
    /// The node's block from the latest earlier snapshot where it was active.
    LastActive,
    /// Mean of the active nodes' blocks in the same snapshot.
    MeanActive,
}

impl FromStr for InactivePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zeros" => Ok(InactivePolicy::Zeros),
            "last-active" => Ok(InactivePolicy::LastActive),
            "mean-active" => Ok(InactivePolicy::MeanActive),
            _ => Err(Error::InvalidConfig(format!("unknown inactive policy {s:?}"))),
        }
    }
}

impl fmt::Display for InactivePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InactivePolicy::Zeros => "zeros",
            InactivePolicy::LastActive => "last-active",
            InactivePolicy::MeanActive => "mean-active",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SnapshotConfig {
    pub count: usize,
    pub mode: SnapshotMode,
    pub inactive: InactivePolicy,
}

impl SnapshotConfig {
    pub fn new(count: usize) -> Self {
        SnapshotConfig {
            count,
            mode: SnapshotMode::default(),
            inactive: InactivePolicy::default(),
        }
    }

    /// Per-snapshot dimension; `dim` must be a multiple of the snapshot count.
    pub fn block_dim(&self, dim: usize) -> Result<usize> {
        if self.count == 0 || !dim.is_multiple_of(self.count) {
            return Err(Error::InvalidConfig(format!(
                "snapshot count {} must divide the dimension {dim}",
                self.count
            )));
        }
        Ok(dim / self.count)
    }
}

/// Partitions the edges of `g` into `count` consecutive slices.
pub fn snapshot_edges(g: &TemporalGraph, count: usize, mode: SnapshotMode) -> Vec<Vec<TemporalEdge>> {
    let mut out = vec![Vec::new(); count.max(1)];
    let edges = g.edges();
    let count = out.len();
    match mode {
        SnapshotMode::EqualCount => {
            let m = edges.len();
            for (i, e) in edges.iter().enumerate() {
                out[i * count / m.max(1)].push(*e);
            }
        }
        SnapshotMode::EqualTime => {
            let (Some(lo), Some(hi)) = (g.t_min(), g.t_max()) else {
                return out;
            };
            let span = (hi - lo) as i128;
            for e in edges {
                let k = if span == 0 {
                    0
                } else {
                    (((e.time - lo) as i128 * count as i128) / span).min(count as i128 - 1) as usize
                };
                out[k].push(*e);
            }
        }
    }
    out
}

fn snapshot_seed(seed: u64, k: usize) -> u64 {
    if k == 0 {
        seed
    } else {
        derive_seed(seed, SNAPSHOT_TAG + k as u64)
    }
}

/// Static embeddings of each snapshot at `dim / count` dimensions each,
/// concatenated in time order. The walk budget is split evenly.
pub fn dtdne_embeddings(
    g: &TemporalGraph,
    snap: &SnapshotConfig,
    walk: &WalkConfig,
    train_cfg: &TrainConfig,
) -> Result<EmbeddingMatrix> {
    let dim = train_cfg.dim;
    let block = snap.block_dim(dim)?;
    let n = g.n_nodes();
    let mut data = vec![0.0; n * dim];
    let mut last: Vec<Option<usize>> = vec![None; n];
    let budget = WalkBudget {
        beta: walk.budget.beta.div_ceil(snap.count as u64).max(1),
        ..walk.budget
    };

    for (k, edges) in snapshot_edges(g, snap.count, snap.mode).into_iter().enumerate() {
        let offset = k * block;
        let mut active = vec![false; n];
        let mut trained = None;
        if edges.is_empty() {
            warn!("snapshot {k} has no edges; all nodes use the inactive policy");
        } else {
            let sub = g.with_edges(edges);
            for e in sub.edges() {
                active[e.src as usize] = true;
                active[e.dst as usize] = true;
            }
            let seed = snapshot_seed(walk.seed, k);
            match static_walks(&sub, &budget, seed, walk.parallel) {
                Ok(walks) => {
                    let cfg = TrainConfig {
                        dim: block,
                        seed: snapshot_seed(train_cfg.seed, k),
                        ..train_cfg.clone()
                    };
                    trained = Some(train(&walks, g.labels(), &cfg)?);
                }
                Err(Error::WalkBudgetStalled { .. }) => {
                    warn!("snapshot {k} cannot support walks of length {}; treated as empty", budget.omega);
                    active.iter_mut().for_each(|a| *a = false);
                }
                Err(e) => return Err(e),
            }
        }

        let z = trained.as_ref();
        let n_active = active.iter().filter(|&&a| a).count();
        let mut centroid = vec![0.0; block];
        if let Some(z) = z {
            for v in (0..n).filter(|&v| active[v]) {
                for (c, x) in centroid.iter_mut().zip(z.vector(v as u32)) {
                    *c += x / n_active as f64;
                }
            }
        }
        for v in 0..n {
            let row = v * dim + offset;
            if let (true, Some(z)) = (active[v], z) {
                data[row..row + block].copy_from_slice(z.vector(v as u32));
                last[v] = Some(k);
                continue;
            }
            match snap.inactive {
                InactivePolicy::Zeros => {}
                InactivePolicy::MeanActive => data[row..row + block].copy_from_slice(&centroid),
                InactivePolicy::LastActive => {
                    if let Some(j) = last[v] {
                        let from = v * dim + j * block;
                        data.copy_within(from..from + block, row);
                    }
                }
            }
        }
    }
    EmbeddingMatrix::from_rows(g.labels().to_vec(), dim, data)
}

/// Link prediction with snapshot embeddings in place of walk embeddings.
pub fn dtdne_baseline(g: &TemporalGraph, cfg: &LinkPredictionConfig, snap: &SnapshotConfig) -> Result<LinkPredictionReport> {
    snap.block_dim(cfg.train.dim)?;
    run_protocol(g, cfg, |split, seed| {
        let (walk, train_cfg) = cfg.for_seed(seed);
        dtdne_embeddings(&split.train_graph, snap, &walk, &train_cfg)
    })
}
