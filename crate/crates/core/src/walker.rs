//! Temporal random walks.
//!
//! Forward walks start from an edge drawn from the initial-edge distribution
//! and only ever move along edges strictly later than the last one traversed.
//! Backward walks do the mirror image and end at a given edge; they feed the
//! online updates.
//!
//! Each batch walk `i` is generated from its own rng stream with the length
//! cap at its maximum, then truncated to the residual budget when it is
//! accounted. Walks consume their rng in step order, so truncating a longer
//! walk yields exactly the walk a shorter cap would have produced, and the
//! output does not depend on how many workers generated it.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Neighbor, NodeId, TemporalEdge, TemporalGraph, Timestamp};
use crate::rng::{derive_seed, stream_rng};
use crate::sampling::{BiasConfig, BiasKind, EdgeCdf, NeighborBias};

const WALK_STREAM_TAG: u64 = 0x7761_6c6b;
const RELAX_STREAM_TAG: u64 = 0x7265_6c78;
const CHUNK: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WalkKind {
    /// Strictly time-increasing.
    Temporal,
    /// Fallback walk that may go back in time; covers nodes no temporal walk reached.
    Relaxed,
    /// Time-ignoring baseline walk.
    Static,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemporalWalk {
    pub nodes: Vec<NodeId>,
    /// `times[i]` is the time of the edge `nodes[i] -> nodes[i + 1]`.
    pub times: Vec<Timestamp>,
    pub kind: WalkKind,
}

impl TemporalWalk {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_time_increasing(&self) -> bool {
        self.times.windows(2).all(|w| w[0] < w[1])
    }

    fn truncate(&mut self, len: usize) {
        if self.nodes.len() > len {
            self.nodes.truncate(len);
            self.times.truncate(len.saturating_sub(1));
        }
    }
}

/// Budget for batch walk generation: stop once the kept walks hold `beta`
/// context windows of size `omega`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WalkBudget {
    pub beta: u64,
    pub omega: usize,
    pub max_len: usize,
    pub relax: bool,
}

impl WalkBudget {
    /// Budget equivalent to `walks_per_node` fixed-length walks from every node.
    pub fn matching_fixed_walks(walks_per_node: u64, n_nodes: usize, max_len: usize, omega: usize) -> Self {
        let windows = max_len.saturating_sub(omega) as u64 + 1;
        WalkBudget {
            beta: walks_per_node * n_nodes as u64 * windows,
            omega,
            max_len,
            relax: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega < 2 {
            return Err(Error::InvalidConfig(format!("omega must be at least 2, got {}", self.omega)));
        }
        if self.max_len < self.omega {
            return Err(Error::InvalidConfig(format!(
                "max walk length {} is shorter than omega {}",
                self.max_len, self.omega
            )));
        }
        if self.beta == 0 {
            return Err(Error::InvalidConfig("beta must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WalkConfig {
    pub budget: WalkBudget,
    pub fs: BiasKind,
    pub fg: BiasKind,
    pub bias: BiasConfig,
    pub seed: u64,
    /// Generate walks on the current rayon pool instead of the calling thread.
    pub parallel: bool,
}

/// One forward temporal walk starting with `start` and leaving its
/// destination strictly after `t`.
pub fn temporal_walk<R: Rng + ?Sized>(
    g: &TemporalGraph,
    start: TemporalEdge,
    t: Timestamp,
    max_len: usize,
    cap: usize,
    fg: &NeighborBias,
    rng: &mut R,
) -> Result<TemporalWalk> {
    if !g.contains_edge(&start) {
        return Err(Error::EdgeNotFound {
            src: start.src,
            dst: start.dst,
            time: start.time,
        });
    }
    let mut scratch = Vec::new();
    Ok(forward_walk(g, start, t, max_len.min(cap), fg, rng, &mut scratch))
}

fn forward_walk<R: Rng + ?Sized>(
    g: &TemporalGraph,
    start: TemporalEdge,
    mut t: Timestamp,
    limit: usize,
    fg: &NeighborBias,
    rng: &mut R,
    scratch: &mut Vec<f64>,
) -> TemporalWalk {
    let mut nodes = vec![start.src, start.dst];
    let mut times = vec![start.time];
    let mut current = start.dst;
    while nodes.len() < limit {
        let candidates = g
            .temporal_neighbors(current, t)
            .expect("walk stays inside the graph");
        if candidates.is_empty() {
            break;
        }
        let pick = fg.choose(candidates.iter().map(|n| n.time - t), rng, scratch);
        let next = candidates[pick];
        nodes.push(next.node);
        times.push(next.time);
        current = next.node;
        t = next.time;
    }
    TemporalWalk {
        nodes,
        times,
        kind: WalkKind::Temporal,
    }
}

/// Runs the budgeted accept/accumulate loop over walks produced by `make`,
/// where `make(i)` must be a pure function of `i`.
fn budgeted_walks<F>(budget: &WalkBudget, parallel: bool, make: F) -> Result<Vec<TemporalWalk>>
where
    F: Fn(u64) -> TemporalWalk + Sync,
{
    budget.validate()?;
    let omega = budget.omega;
    let beta = budget.beta;
    let guard = beta.saturating_mul(100);
    let mut kept = Vec::new();
    let mut covered: u64 = 0;
    let mut rejected: u64 = 0;
    let mut next_index: u64 = 0;
    while covered < beta {
        let range = next_index..next_index + CHUNK as u64;
        next_index += CHUNK as u64;
        let batch: Vec<TemporalWalk> = if parallel {
            range.into_par_iter().map(&make).collect()
        } else {
            range.map(&make).collect()
        };
        for mut walk in batch {
            if covered >= beta {
                break;
            }
            let residual = (beta - covered).min(budget.max_len as u64) as usize;
            walk.truncate(budget.max_len.min(omega + residual - 1));
            if walk.len() >= omega {
                covered += (walk.len() - omega + 1) as u64;
                rejected = 0;
                kept.push(walk);
            } else {
                rejected += 1;
                if rejected >= guard {
                    return Err(Error::WalkBudgetStalled { rejected, omega });
                }
            }
        }
    }
    Ok(kept)
}

/// Batch temporal walk generation driven by the context-window budget.
pub fn generate_walks(g: &TemporalGraph, cfg: &WalkConfig) -> Result<Vec<TemporalWalk>> {
    let cdf = EdgeCdf::build(g, cfg.fs, cfg.bias.exp_scale)?;
    let fg = NeighborBias::new(cfg.fg, &cfg.bias, g);
    let budget = cfg.budget;
    let walk_seed = derive_seed(cfg.seed, WALK_STREAM_TAG);
    let mut walks = budgeted_walks(&budget, cfg.parallel, |i| {
        let mut rng = stream_rng(walk_seed, i);
        let start = cdf.sample(g, &mut rng);
        let mut scratch = Vec::new();
        forward_walk(g, start, start.time, budget.max_len, &fg, &mut rng, &mut scratch)
    })?;
    if budget.relax {
        let relaxed = relaxed_walks(g, &walks, budget.omega, derive_seed(cfg.seed, RELAX_STREAM_TAG));
        walks.extend(relaxed);
    }
    Ok(walks)
}

fn undirected_degree(g: &TemporalGraph, v: NodeId) -> (&[Neighbor], &[Neighbor]) {
    let out = g.neighbors(v).expect("node in range");
    let inc = if g.is_directed() {
        g.in_neighbors(v).expect("node in range")
    } else {
        &[]
    };
    (out, inc)
}

/// One time-ignoring walk of length `omega` from every node with at least one
/// edge that appears in none of `walks`.
fn relaxed_walks(g: &TemporalGraph, walks: &[TemporalWalk], omega: usize, seed: u64) -> Vec<TemporalWalk> {
    let mut seen = vec![false; g.n_nodes()];
    for w in walks {
        for &v in &w.nodes {
            seen[v as usize] = true;
        }
    }
    let mut out = Vec::new();
    for v in 0..g.n_nodes() as NodeId {
        if seen[v as usize] {
            continue;
        }
        let (a, b) = undirected_degree(g, v);
        if a.is_empty() && b.is_empty() {
            continue;
        }
        let mut rng = stream_rng(seed, v as u64);
        let mut nodes = vec![v];
        let mut times = Vec::with_capacity(omega - 1);
        let mut current = v;
        while nodes.len() < omega {
            let (a, b) = undirected_degree(g, current);
            let k = rng.random_range(0..a.len() + b.len());
            let next = if k < a.len() { a[k] } else { b[k - a.len()] };
            nodes.push(next.node);
            times.push(next.time);
            current = next.node;
        }
        out.push(TemporalWalk {
            nodes,
            times,
            kind: WalkKind::Relaxed,
        });
    }
    out
}

/// Walks that end with `e`, built by stepping backward through strictly
/// earlier edges and returned in forward orientation.
///
/// The neighbor bias is applied to the backward gap `t - t'`, so the same
/// distribution shapes apply with the time axis mirrored.
pub fn backward_walks_for_edge<R: Rng + ?Sized>(
    g: &TemporalGraph,
    e: TemporalEdge,
    count: usize,
    max_len: usize,
    fg: &NeighborBias,
    rng: &mut R,
) -> Result<Vec<TemporalWalk>> {
    if !g.contains_edge(&e) {
        return Err(Error::EdgeNotFound {
            src: e.src,
            dst: e.dst,
            time: e.time,
        });
    }
    let max_len = max_len.max(2);
    let mut scratch = Vec::new();
    let mut walks = Vec::with_capacity(count);
    for _ in 0..count {
        let mut nodes = vec![e.dst, e.src];
        let mut times = vec![e.time];
        let (mut current, mut t) = (e.src, e.time);
        while nodes.len() < max_len {
            let preds = g.temporal_predecessors(current, t)?;
            if preds.is_empty() {
                break;
            }
            let k = preds.len();
            let j = fg.choose((0..k).map(|j| t - preds[k - 1 - j].time), rng, &mut scratch);
            let prev = preds[k - 1 - j];
            nodes.push(prev.node);
            times.push(prev.time);
            current = prev.node;
            t = prev.time;
        }
        nodes.reverse();
        times.reverse();
        walks.push(TemporalWalk {
            nodes,
            times,
            kind: WalkKind::Temporal,
        });
    }
    Ok(walks)
}

const STATIC_STREAM_TAG: u64 = 0x7374_6174;

/// Time-ignoring baseline walks under the same budget accounting.
pub fn static_walks(g: &TemporalGraph, budget: &WalkBudget, seed: u64, parallel: bool) -> Result<Vec<TemporalWalk>> {
    if g.n_edges() == 0 {
        return Err(Error::NoEdges);
    }
    let edges = g.edges();
    let walk_seed = derive_seed(seed, STATIC_STREAM_TAG);
    let max_len = budget.max_len;
    budgeted_walks(budget, parallel, |i| {
        let mut rng = stream_rng(walk_seed, i);
        let start = edges[rng.random_range(0..edges.len())];
        let mut nodes = vec![start.src, start.dst];
        let mut times = vec![start.time];
        let mut current = start.dst;
        while nodes.len() < max_len {
            let adj = g.neighbors(current).expect("node in range");
            if adj.is_empty() {
                break;
            }
            let next = adj[rng.random_range(0..adj.len())];
            nodes.push(next.node);
            times.push(next.time);
            current = next.node;
        }
        TemporalWalk {
            nodes,
            times,
            kind: WalkKind::Static,
        }
    })
}

/// Walk-length histogram and per-node occurrence and start counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalkStats {
    pub lengths: BTreeMap<usize, u64>,
    pub occurrences: Vec<u64>,
    pub starts: Vec<u64>,
}

impl WalkStats {
    pub fn from_walks(walks: &[TemporalWalk], n_nodes: usize) -> Result<Self> {
        if walks.is_empty() {
            return Err(Error::NoWalks);
        }
        let mut stats = WalkStats {
            lengths: BTreeMap::new(),
            occurrences: vec![0; n_nodes],
            starts: vec![0; n_nodes],
        };
        for w in walks {
            *stats.lengths.entry(w.len()).or_default() += 1;
            for &v in &w.nodes {
                stats.occurrences[v as usize] += 1;
            }
            if let Some(&first) = w.nodes.first() {
                stats.starts[first as usize] += 1;
            }
        }
        Ok(stats)
    }

    pub fn write_lengths_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "length,count")?;
        for (len, count) in &self.lengths {
            writeln!(out, "{len},{count}")?;
        }
        Ok(())
    }

    pub fn write_occurrences_csv(&self, mut out: impl Write, labels: &[String]) -> io::Result<()> {
        writeln!(out, "node,occurrences")?;
        for (label, count) in labels.iter().zip(&self.occurrences) {
            writeln!(out, "{label},{count}")?;
        }
        Ok(())
    }

    pub fn write_starts_csv(&self, mut out: impl Write, labels: &[String]) -> io::Result<()> {
        writeln!(out, "node,starts")?;
        for (label, count) in labels.iter().zip(&self.starts) {
            writeln!(out, "{label},{count}")?;
        }
        Ok(())
    }
}

/// One walk per line as space-separated node labels.
pub fn write_walks(mut out: impl Write, walks: &[TemporalWalk], labels: &[String]) -> io::Result<()> {
    for w in walks {
        let mut first = true;
        for &v in &w.nodes {
            if !first {
                out.write_all(b" ")?;
            }
            first = false;
            out.write_all(labels[v as usize].as_bytes())?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}
