//! Generated edge streams with planted, drifting community structure.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::TemporalGraph;
use crate::rng::{derive_seed, stream_rng};

const SYNTH_TAG: u64 = 0x7379_6e74;

/// Nodes belong to `communities` groups. At `switch_fraction` of the stream
/// the groups are redrawn, so late edges follow a different partition than
/// early ones. Edge `i` has timestamp `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct CommunityStreamConfig {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub communities: usize,
    pub switch_fraction: f64,
    /// Probability an edge stays inside its source's community.
    pub p_intra: f64,
    /// Zipf exponent of per-node activity, applied to both endpoints;
    /// 0 makes all nodes equally active.
    pub activity_skew: f64,
    pub seed: u64,
}

impl Default for CommunityStreamConfig {
    fn default() -> Self {
        CommunityStreamConfig {
            n_nodes: 200,
            n_edges: 5000,
            communities: 2,
            switch_fraction: 0.5,
            p_intra: 1.0,
            activity_skew: 1.0,
            seed: 0,
        }
    }
}

/// Balanced assignment of `n` nodes to `k` groups in random order.
fn partition<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut group = vec![0; n];
    for (rank, v) in order.into_iter().enumerate() {
        group[v] = rank % k;
    }
    group
}

pub fn community_stream(cfg: &CommunityStreamConfig) -> Result<TemporalGraph> {
    let (n, k) = (cfg.n_nodes, cfg.communities);
    if k < 2 || n < 2 * k {
        return Err(Error::InvalidConfig(format!("need at least two nodes in each of {k} (>= 2) communities, got {n} nodes")));
    }
    if !(0.0..=1.0).contains(&cfg.p_intra) || !(0.0..=1.0).contains(&cfg.switch_fraction) {
        return Err(Error::InvalidConfig("probabilities must lie in [0, 1]".into()));
    }
    let mut rng = stream_rng(derive_seed(cfg.seed, SYNTH_TAG), 0);
    let before = partition(n, k, &mut rng);
    let after = partition(n, k, &mut rng);
    let activity: Vec<f64> = {
        let mut ranks: Vec<usize> = (0..n).collect();
        ranks.shuffle(&mut rng);
        ranks.iter().map(|&r| ((r + 1) as f64).powf(-cfg.activity_skew)).collect()
    };
    let pick = WeightedIndex::new(&activity).expect("positive activity weights");
    let members = |groups: &[usize]| -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); k];
        for (v, &c) in groups.iter().enumerate() {
            m[c].push(v);
        }
        m
    };
    let (members_before, members_after) = (members(&before), members(&after));
    let pickers = |m: &[Vec<usize>]| -> Vec<WeightedIndex<f64>> {
        m.iter()
            .map(|g| WeightedIndex::new(g.iter().map(|&v| activity[v])).expect("positive activity weights"))
            .collect()
    };
    let (pick_before, pick_after) = (pickers(&members_before), pickers(&members_after));
    let switch = (cfg.switch_fraction * cfg.n_edges as f64).round() as usize;

    let mut edges = Vec::with_capacity(cfg.n_edges);
    for i in 0..cfg.n_edges {
        let (groups, members, within) = if i < switch {
            (&before, &members_before, &pick_before)
        } else {
            (&after, &members_after, &pick_after)
        };
        let src = pick.sample(&mut rng);
        let own = groups[src];
        let target = if rng.random_bool(cfg.p_intra) {
            own
        } else {
            (own + rng.random_range(1..k)) % k
        };
        let pool = &members[target];
        let dst = loop {
            let d = pool[within[target].sample(&mut rng)];
            if d != src {
                break d;
            }
        };
        edges.push((format!("n{src}"), format!("n{dst}"), i as i64));
    }
    Ok(TemporalGraph::from_labeled_edges(edges, false))
}
