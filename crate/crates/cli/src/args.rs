use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Parser)]
#[command(name = "ctdne", version, about = "Temporal random-walk node embeddings for edge streams")]
pub struct Cli {
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate temporal walks, train embeddings and write walk statistics.
    Train {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Replay the edge list as a stream with online updates per edge.
    Stream {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        stream: StreamArgs,
    },
    /// Temporal link prediction over several seeds.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Compare snapshot embeddings with continuous-time embeddings.
    Snapshots {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        eval: EvalArgs,
        #[command(flatten)]
        snap: SnapshotArgs,
    },
    /// Generate walks and write length, occurrence and start histograms.
    Stats {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Write a synthetic edge stream with drifting communities.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Edge list: `src dst time` or `src dst weight time` per line, optionally gzipped.
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// `key = value` file or a JSON run manifest.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Name used in result files; defaults to the input file stem.
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub directed: bool,
    /// Input time units per second.
    #[arg(long)]
    pub unit_scale: Option<f64>,
    /// Start edge distribution: uniform, linear or exponential.
    #[arg(long)]
    pub fs: Option<String>,
    /// Neighbor distribution: uniform, linear or exponential.
    #[arg(long)]
    pub fg: Option<String>,
    #[arg(long)]
    pub exp_scale: Option<f64>,
    #[arg(long)]
    pub linear_favor: Option<String>,
    #[arg(long)]
    pub exp_favor: Option<String>,
    /// Context window size.
    #[arg(long)]
    pub omega: Option<usize>,
    /// Maximum walk length.
    #[arg(long, visible_alias = "L")]
    pub max_len: Option<usize>,
    /// Total context windows to collect.
    #[arg(long, conflicts_with = "walks_per_node")]
    pub beta: Option<u64>,
    /// Budget expressed as walks per node.
    #[arg(long, visible_alias = "R")]
    pub walks_per_node: Option<u64>,
    /// Do not add time-ignoring walks for nodes no temporal walk reached.
    #[arg(long)]
    pub no_relax: bool,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Negative samples per context pair.
    #[arg(long)]
    pub negatives: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub lr_min: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads. Above one, training is no longer bit-reproducible.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct StreamArgs {
    #[arg(long)]
    pub walks_per_edge: Option<usize>,
    /// Fraction of edges batch-trained before streaming starts.
    #[arg(long)]
    pub warmup: Option<f64>,
    #[arg(long)]
    pub online_lr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Number of seeds, counting up from --seed.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Fraction of edges, by time, used for training.
    #[arg(long)]
    pub split: Option<f64>,
    /// Fraction of labeled pairs held out for scoring.
    #[arg(long)]
    pub holdout: Option<f64>,
    /// Negatives avoid all edges (full-graph) or only train and test pairs (train-only).
    #[arg(long)]
    pub negatives_from: Option<String>,
    /// Sweep all nine start/neighbor distribution pairs.
    #[arg(long)]
    pub all_variants: bool,
    /// Also evaluate time-ignoring walks.
    #[arg(long)]
    pub static_baseline: bool,
}

#[derive(Debug, Args)]
pub struct SnapshotArgs {
    /// Number of snapshots; must divide --dim.
    #[arg(long)]
    pub snapshots: Option<usize>,
    /// equal-time or equal-count.
    #[arg(long)]
    pub snapshot_mode: Option<String>,
    /// zeros, last-active or mean-active.
    #[arg(long)]
    pub inactive_policy: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output edge list path.
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub nodes: usize,
    #[arg(long, default_value_t = 5000)]
    pub edges: usize,
    #[arg(long, default_value_t = 2)]
    pub communities: usize,
    /// Position in the stream, as a fraction, where communities are redrawn.
    #[arg(long, default_value_t = 0.5)]
    pub switch: f64,
    #[arg(long, default_value_t = 1.0)]
    pub p_intra: f64,
    /// Zipf exponent of node activity.
    #[arg(long, default_value_t = 1.0)]
    pub skew: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn put<T: Serialize>(map: &mut Map<String, Value>, key: &str, value: &Option<T>) {
    if let Some(v) = value {
        map.insert(key.to_owned(), serde_json::to_value(v).expect("flag value serializes"));
    }
}

fn put_flag(map: &mut Map<String, Value>, key: &str, set: bool, value: bool) {
    if set {
        map.insert(key.to_owned(), Value::Bool(value));
    }
}

impl CommonArgs {
    pub fn write(&self, m: &mut Map<String, Value>) {
        put(m, "input", &self.input);
        put(m, "out", &self.out);
        put(m, "dataset", &self.dataset);
        put_flag(m, "directed", self.directed, true);
        put(m, "unit_scale", &self.unit_scale);
        put(m, "fs", &self.fs);
        put(m, "fg", &self.fg);
        put(m, "exp_scale", &self.exp_scale);
        put(m, "linear_favor", &self.linear_favor);
        put(m, "exp_favor", &self.exp_favor);
        put(m, "omega", &self.omega);
        put(m, "max_len", &self.max_len);
        put(m, "beta", &self.beta);
        put(m, "walks_per_node", &self.walks_per_node);
        put_flag(m, "relax", self.no_relax, false);
        put(m, "dim", &self.dim);
        put(m, "negatives", &self.negatives);
        put(m, "lr", &self.lr);
        put(m, "lr_min", &self.lr_min);
        put(m, "epochs", &self.epochs);
        put(m, "seed", &self.seed);
        put(m, "threads", &self.threads);
    }
}

impl StreamArgs {
    pub fn write(&self, m: &mut Map<String, Value>) {
        put(m, "walks_per_edge", &self.walks_per_edge);
        put(m, "warmup", &self.warmup);
        put(m, "online_lr", &self.online_lr);
    }
}

impl EvalArgs {
    pub fn write(&self, m: &mut Map<String, Value>) {
        put(m, "seeds", &self.seeds);
        put(m, "split", &self.split);
        put(m, "holdout", &self.holdout);
        put(m, "negatives_from", &self.negatives_from);
        put_flag(m, "all_variants", self.all_variants, true);
        put_flag(m, "static_baseline", self.static_baseline, true);
    }
}

impl SnapshotArgs {
    pub fn write(&self, m: &mut Map<String, Value>) {
        put(m, "snapshots", &self.snapshots);
        put(m, "snapshot_mode", &self.snapshot_mode);
        put(m, "inactive_policy", &self.inactive_policy);
    }
}
