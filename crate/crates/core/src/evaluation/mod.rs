//! Temporal link prediction: time-ordered split, sampled negatives, edge
//! features, a logistic classifier and ROC AUC.

mod classifier;
mod snapshots;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use crate::embedder::{train, EmbeddingMatrix, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::{NodeId, TemporalGraph};
use crate::rng::{derive_seed, stream_rng};
use crate::walker::{generate_walks, static_walks, WalkConfig};

pub use classifier::{log_loss, stratified_holdout, LogisticRegression, DEFAULT_L2};
pub use snapshots::{dtdne_baseline, dtdne_embeddings, snapshot_edges, InactivePolicy, SnapshotConfig, SnapshotMode};

const SPLIT_TAG: u64 = 0x7370_6c69;
const HOLDOUT_TAG: u64 = 0x686f_6c64;
/// Below this many candidate pairs negatives are drawn by enumeration.
const ENUMERATE_PAIRS: u64 = 1 << 20;

/// Unordered node pair, stored with the smaller id first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodePair(pub NodeId, pub NodeId);

impl NodePair {
    pub fn new(a: NodeId, b: NodeId) -> Self {
        if a <= b {
            NodePair(a, b)
        } else {
            NodePair(b, a)
        }
    }
}

/// Which edges a negative pair must avoid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NegativeExclusion {
    /// Pairs adjacent at any time in the full graph.
    #[default]
    FullGraph,
    /// Only training pairs and positives.
    TrainOnly,
}

impl FromStr for NegativeExclusion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" | "full-graph" => Ok(NegativeExclusion::FullGraph),
            "train" | "train-only" => Ok(NegativeExclusion::TrainOnly),
            _ => Err(Error::InvalidConfig(format!("unknown negative exclusion {s:?}"))),
        }
    }
}

impl fmt::Display for NegativeExclusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NegativeExclusion::FullGraph => "full-graph",
            NegativeExclusion::TrainOnly => "train-only",
        })
    }
}

#[derive(Clone, Debug)]
pub struct EvalSplit {
    /// Earliest edges, over the full node set.
    pub train_graph: TemporalGraph,
    /// Later pairs never seen in training, in order of first appearance.
    pub positives: Vec<NodePair>,
    pub negatives: Vec<NodePair>,
    pub split_fraction: f64,
}

/// Train on the first `fraction` of edges by time, test on the new pairs
/// among the rest against an equal number of non-adjacent pairs.
pub fn temporal_split(g: &TemporalGraph, fraction: f64, seed: u64, exclusion: NegativeExclusion) -> Result<EvalSplit> {
    let m = g.n_edges();
    if m < 4 {
        return Err(Error::InvalidConfig(format!("link prediction needs at least 4 edges, got {m}")));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("split fraction must be in (0, 1), got {fraction}")));
    }
    let n_train = ((fraction * m as f64).floor() as usize).clamp(1, m - 1);
    let (train_edges, test_edges) = g.edges().split_at(n_train);
    let train_pairs: HashSet<NodePair> = train_edges.iter().map(|e| NodePair::new(e.src, e.dst)).collect();

    let mut seen = HashSet::new();
    let mut positives = Vec::new();
    for e in test_edges {
        let pair = NodePair::new(e.src, e.dst);
        if pair.0 != pair.1 && !train_pairs.contains(&pair) && seen.insert(pair) {
            positives.push(pair);
        }
    }
    if positives.is_empty() {
        return Err(Error::NoPositives);
    }

    let mut excluded = train_pairs;
    excluded.extend(positives.iter().copied());
    if exclusion == NegativeExclusion::FullGraph {
        excluded.extend(test_edges.iter().map(|e| NodePair::new(e.src, e.dst)));
    }
    let mut rng = stream_rng(derive_seed(seed, SPLIT_TAG), 0);
    let negatives = sample_non_adjacent(g.n_nodes(), &excluded, positives.len(), &mut rng)?;
    Ok(EvalSplit {
        train_graph: g.with_edges(train_edges.iter().copied()),
        positives,
        negatives,
        split_fraction: fraction,
    })
}

fn sample_non_adjacent<R: Rng + ?Sized>(
    n: usize,
    excluded: &HashSet<NodePair>,
    needed: usize,
    rng: &mut R,
) -> Result<Vec<NodePair>> {
    let total = n as u64 * (n as u64).saturating_sub(1) / 2;
    let blocked = excluded.iter().filter(|p| p.0 != p.1).count() as u64;
    let available = total - blocked;
    if (available as usize) < needed {
        return Err(Error::NotEnoughNegatives {
            needed,
            available: available as usize,
        });
    }
    if total <= ENUMERATE_PAIRS {
        let mut candidates = Vec::with_capacity(available as usize);
        for a in 0..n as NodeId {
            for b in a + 1..n as NodeId {
                let pair = NodePair(a, b);
                if !excluded.contains(&pair) {
                    candidates.push(pair);
                }
            }
        }
        return Ok(index::sample(rng, candidates.len(), needed)
            .into_iter()
            .map(|i| candidates[i])
            .collect());
    }
    let mut chosen = HashSet::with_capacity(needed);
    let mut out = Vec::with_capacity(needed);
    while out.len() < needed {
        let a = rng.random_range(0..n as NodeId);
        let b = rng.random_range(0..n as NodeId);
        if a == b {
            continue;
        }
        let pair = NodePair::new(a, b);
        if !excluded.contains(&pair) && chosen.insert(pair) {
            out.push(pair);
        }
    }
    Ok(out)
}

/// Binary operator turning two node vectors into one edge feature vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeOperator {
    Mean,
    Hadamard,
    AbsDiff,
    SquaredDiff,
}

impl EdgeOperator {
    pub const ALL: [EdgeOperator; 4] = [
        EdgeOperator::Mean,
        EdgeOperator::Hadamard,
        EdgeOperator::AbsDiff,
        EdgeOperator::SquaredDiff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EdgeOperator::Mean => "mean",
            EdgeOperator::Hadamard => "hadamard",
            EdgeOperator::AbsDiff => "abs-diff",
            EdgeOperator::SquaredDiff => "squared-diff",
        }
    }

    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            EdgeOperator::Mean => (a + b) / 2.0,
            EdgeOperator::Hadamard => a * b,
            EdgeOperator::AbsDiff => (a - b).abs(),
            EdgeOperator::SquaredDiff => (a - b) * (a - b),
        }
    }
}

impl fmt::Display for EdgeOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EdgeOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EdgeOperator::ALL
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown edge operator {s:?}")))
    }
}

pub fn edge_embedding(zi: &[f64], zj: &[f64], op: EdgeOperator) -> Result<Vec<f64>> {
    if zi.len() != zj.len() {
        return Err(Error::DimensionMismatch {
            left: zi.len(),
            right: zj.len(),
        });
    }
    Ok(zi.iter().zip(zj).map(|(&a, &b)| op.apply(a, b)).collect())
}

/// ROC AUC as the Mann-Whitney statistic; tied scores count one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidConfig("AUC scores contain NaN".into()));
    }
    let p = labels.iter().filter(|&&y| y).count() as u64;
    let n = labels.len() as u64 - p;
    if p == 0 || n == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the positive rank sum, using average ranks for ties.
    let mut rank_sum2: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let tied_pos = order[i..j].iter().filter(|&&k| labels[k]).count() as u64;
        rank_sum2 += tied_pos * (i as u64 + 1 + j as u64);
        i = j;
    }
    let u2 = rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * n) as f64)
}

/// How node embeddings are produced from the training graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WalkMode {
    /// Temporal walks with the walk config's start and neighbor biases.
    Temporal,
    /// Time-ignoring walks under the same budget.
    Static,
}

#[derive(Clone, Debug)]
pub struct LinkPredictionConfig {
    pub walk: WalkConfig,
    pub mode: WalkMode,
    pub train: TrainConfig,
    pub split_fraction: f64,
    pub holdout: f64,
    pub exclusion: NegativeExclusion,
    pub l2: f64,
    pub seeds: Vec<u64>,
    /// Run seeds on the rayon pool. Each seed stays single-writer.
    pub parallel: bool,
}

impl LinkPredictionConfig {
    pub fn new(walk: WalkConfig, train: TrainConfig) -> Self {
        LinkPredictionConfig {
            walk,
            mode: WalkMode::Temporal,
            train,
            split_fraction: 0.75,
            holdout: 0.25,
            exclusion: NegativeExclusion::FullGraph,
            l2: DEFAULT_L2,
            seeds: (0..10).collect(),
            parallel: false,
        }
    }

    /// Walk and training configs for one seed repetition.
    pub fn for_seed(&self, seed: u64) -> (WalkConfig, TrainConfig) {
        let mut walk = self.walk;
        walk.seed = seed;
        walk.parallel = false;
        let mut train = self.train.clone();
        train.seed = seed;
        train.threads = 1;
        (walk, train)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorScores {
    /// Operator with the best hold-out AUC (first in [`EdgeOperator::ALL`] on ties).
    pub best: EdgeOperator,
    pub auc: f64,
    pub per_operator: Vec<(EdgeOperator, f64)>,
}

/// Scores every operator on one stratified hold-out of the labeled pairs.
pub fn score_operators(z: &EmbeddingMatrix, split: &EvalSplit, holdout: f64, l2: f64, seed: u64) -> Result<OperatorScores> {
    let pairs: Vec<NodePair> = split.positives.iter().chain(&split.negatives).copied().collect();
    let labels: Vec<bool> = (0..pairs.len()).map(|i| i < split.positives.len()).collect();
    let mut rng = stream_rng(derive_seed(seed, HOLDOUT_TAG), 0);
    let (fit, hold) = stratified_holdout(&labels, holdout, &mut rng)?;
    let hold_labels: Vec<bool> = hold.iter().map(|&i| labels[i]).collect();
    let fit_labels: Vec<bool> = fit.iter().map(|&i| labels[i]).collect();
    let mut per_operator = Vec::with_capacity(EdgeOperator::ALL.len());
    for op in EdgeOperator::ALL {
        let features = pairs
            .iter()
            .map(|p| edge_embedding(z.vector(p.0), z.vector(p.1), op))
            .collect::<Result<Vec<_>>>()?;
        let fit_x: Vec<Vec<f64>> = fit.iter().map(|&i| features[i].clone()).collect();
        let model = LogisticRegression::fit(&fit_x, &fit_labels, l2)?;
        let scores: Vec<f64> = hold.iter().map(|&i| model.predict_proba(&features[i])).collect();
        per_operator.push((op, auc(&scores, &hold_labels)?));
    }
    let (best, best_auc) = per_operator
        .iter()
        .copied()
        .fold((EdgeOperator::Mean, f64::NEG_INFINITY), |acc, (op, a)| if a > acc.1 { (op, a) } else { acc });
    Ok(OperatorScores {
        best,
        auc: best_auc,
        per_operator,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    pub operator: EdgeOperator,
    pub auc: f64,
    pub n_positives: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkPredictionReport {
    pub mean_auc: f64,
    /// Sample standard deviation over seeds; zero for a single seed.
    pub std_auc: f64,
    pub per_seed: Vec<SeedResult>,
    /// Most frequent winning operator across seeds.
    pub operator: EdgeOperator,
}

impl LinkPredictionReport {
    pub fn from_seeds(per_seed: Vec<SeedResult>) -> Self {
        let aucs: Vec<f64> = per_seed.iter().map(|r| r.auc).collect();
        let (mean_auc, std_auc) = mean_std(&aucs);
        let mut votes: HashMap<EdgeOperator, usize> = HashMap::new();
        for r in &per_seed {
            *votes.entry(r.operator).or_default() += 1;
        }
        let operator = EdgeOperator::ALL
            .into_iter()
            .max_by_key(|op| (votes.get(op).copied().unwrap_or(0), std::cmp::Reverse(*op)))
            .expect("non-empty operator set");
        LinkPredictionReport {
            mean_auc,
            std_auc,
            per_seed,
            operator,
        }
    }
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs split, embedding and scoring for every seed in `cfg`, with
/// `embed(split, seed)` supplying the node embeddings.
pub fn run_protocol<F>(g: &TemporalGraph, cfg: &LinkPredictionConfig, embed: F) -> Result<LinkPredictionReport>
where
    F: Fn(&EvalSplit, u64) -> Result<EmbeddingMatrix> + Sync,
{
    if cfg.seeds.is_empty() {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    let one = |&seed: &u64| -> Result<SeedResult> {
        let split = temporal_split(g, cfg.split_fraction, seed, cfg.exclusion)?;
        let z = embed(&split, seed)?;
        let scores = score_operators(&z, &split, cfg.holdout, cfg.l2, seed)?;
        Ok(SeedResult {
            seed,
            operator: scores.best,
            auc: scores.auc,
            n_positives: split.positives.len(),
        })
    };
    let per_seed = if cfg.parallel {
        cfg.seeds.par_iter().map(one).collect::<Result<Vec<_>>>()?
    } else {
        cfg.seeds.iter().map(one).collect::<Result<Vec<_>>>()?
    };
    Ok(LinkPredictionReport::from_seeds(per_seed))
}

/// Embeds one training graph with temporal or static walks.
pub fn embed_graph(g: &TemporalGraph, mode: WalkMode, walk: &WalkConfig, train_cfg: &TrainConfig) -> Result<EmbeddingMatrix> {
    let walks = match mode {
        WalkMode::Temporal => generate_walks(g, walk)?,
        WalkMode::Static => static_walks(g, &walk.budget, walk.seed, walk.parallel)?,
    };
    train(&walks, g.labels(), train_cfg)
}

pub fn run_link_prediction(g: &TemporalGraph, cfg: &LinkPredictionConfig) -> Result<LinkPredictionReport> {
    run_protocol(g, cfg, |split, seed| {
        let (walk, train_cfg) = cfg.for_seed(seed);
        embed_graph(&split.train_graph, cfg.mode, &walk, &train_cfg)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_one_split() {
        let g = TemporalGraph::from_labeled_edges(
            [
                ("v1", "v2", 1),
                ("v2", "v3", 2),
                ("v3", "v4", 3),
                ("v4", "v1", 4),
                ("v3", "v5", 5),
                ("v2", "v6", 6),
                ("v2", "v5", 8),
                ("v6", "v3", 10),
            ],
            false,
        );
        let split = temporal_split(&g, 0.75, 1, NegativeExclusion::FullGraph).unwrap();
        assert_eq!(split.train_graph.n_edges(), 6);
        assert_eq!(split.train_graph.n_nodes(), 6);
        let id = |l: &str| g.vocab().id(l).unwrap();
        assert_eq!(
            split.positives,
            vec![NodePair::new(id("v2"), id("v5")), NodePair::new(id("v6"), id("v3"))]
        );
        assert_eq!(split.negatives.len(), 2);
        let adjacent: HashSet<_> = g.edges().iter().map(|e| NodePair::new(e.src, e.dst)).collect();
        assert!(split.negatives.iter().all(|p| !adjacent.contains(p) && p.0 != p.1));
    }

    #[test]
    fn repeated_pairs_leave_no_positives() {
        let g = TemporalGraph::from_labeled_edges([("a", "b", 1), ("b", "c", 2), ("c", "d", 3), ("b", "a", 4)], false);
        assert!(matches!(temporal_split(&g, 0.75, 0, NegativeExclusion::FullGraph), Err(Error::NoPositives)));
    }

    #[test]
    fn split_rejects_bad_input() {
        let tiny = TemporalGraph::from_labeled_edges([("a", "b", 1), ("b", "c", 2)], false);
        assert!(temporal_split(&tiny, 0.5, 0, NegativeExclusion::FullGraph).is_err());
        let path = TemporalGraph::from_labeled_edges([("a", "b", 1), ("b", "c", 2), ("c", "a", 3), ("a", "d", 4)], false);
        assert!(temporal_split(&path, 1.0, 0, NegativeExclusion::FullGraph).is_err());
        assert!(temporal_split(&path, 0.0, 0, NegativeExclusion::FullGraph).is_err());
        let full = TemporalGraph::from_labeled_edges(
            [("a", "b", 1), ("b", "c", 2), ("c", "a", 3), ("a", "d", 4), ("b", "d", 5), ("c", "d", 6)],
            false,
        );
        assert!(matches!(
            temporal_split(&full, 0.5, 0, NegativeExclusion::FullGraph),
            Err(Error::NotEnoughNegatives { available: 0, .. })
        ));
    }

    #[test]
    fn operators_match_hand_values() {
        let (a, b) = ([1.0, 3.0], [3.0, 1.0]);
        let expect = [
            (EdgeOperator::Mean, [2.0, 2.0]),
            (EdgeOperator::Hadamard, [3.0, 3.0]),
            (EdgeOperator::AbsDiff, [2.0, 2.0]),
            (EdgeOperator::SquaredDiff, [4.0, 4.0]),
        ];
        for (op, v) in expect {
            assert_eq!(edge_embedding(&a, &b, op).unwrap(), v);
            assert_eq!(edge_embedding(&b, &a, op).unwrap(), v);
            assert_eq!(op.name().parse::<EdgeOperator>().unwrap(), op);
        }
        assert_eq!(edge_embedding(&a, &a, EdgeOperator::AbsDiff).unwrap(), [0.0, 0.0]);
        assert_eq!(edge_embedding(&a, &a, EdgeOperator::SquaredDiff).unwrap(), [0.0, 0.0]);
        assert!(matches!(edge_embedding(&a, &[1.0], EdgeOperator::Mean), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn auc_hand_cases() {
        let labels = [true, true, false, false];
        assert_eq!(auc(&[0.9, 0.8, 0.3, 0.1], &labels).unwrap(), 1.0);
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &labels).unwrap(), 0.0);
        assert_eq!(auc(&[0.5; 4], &labels).unwrap(), 0.5);
        assert!(matches!(auc(&[0.1, 0.2], &[true, true]), Err(Error::SingleClass)));
        assert!(auc(&[f64::NAN, 0.2], &[true, false]).is_err());
    }

    #[test]
    fn report_summary() {
        let per_seed = vec![
            SeedResult { seed: 0, operator: EdgeOperator::Hadamard, auc: 0.8, n_positives: 3 },
            SeedResult { seed: 1, operator: EdgeOperator::Mean, auc: 0.6, n_positives: 3 },
            SeedResult { seed: 2, operator: EdgeOperator::Hadamard, auc: 0.7, n_positives: 3 },
        ];
        let report = LinkPredictionReport::from_seeds(per_seed);
        assert!((report.mean_auc - 0.7).abs() < 1e-12);
        assert!((report.std_auc - 0.1).abs() < 1e-12);
        assert_eq!(report.operator, EdgeOperator::Hadamard);
        assert_eq!(mean_std(&[0.5]), (0.5, 0.0));
    }
}
