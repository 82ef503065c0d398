use std::fs;
use std::path::Path;
use std::time::Instant;

use ctdne::embedder::{train, write_embeddings, EmbeddingMatrix, OnlineTrainer};
use ctdne::evaluation::{dtdne_baseline, run_link_prediction};
use ctdne::graph::load_edge_list;
use ctdne::rng::{derive_seed, stream_rng};
use ctdne::sampling::NeighborBias;
use ctdne::synthetic::{community_stream, CommunityStreamConfig};
use ctdne::walker::{backward_walks_for_edge, generate_walks, TemporalWalk, WalkStats};
use ctdne::{BiasKind, LinkPredictionReport, LoadOptions, TemporalGraph, WalkMode};
use serde::Serialize;
use serde_json::Value;

use crate::args::SynthArgs;
use crate::config::RunConfig;
use crate::error::{at, CliError, CliResult};
use crate::report::{ctdne_variant, results_csv, rows_from_report, snapshot_csv, Summary, STATIC_VARIANT};

const STREAM_TAG: u64 = 0x7374_726d;

pub const EMBEDDINGS_FILE: &str = "embeddings.txt";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const RESULTS_FILE: &str = "results.csv";
pub const SEEDS_FILE: &str = "seeds.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const LATENCY_FILE: &str = "latency.json";
pub const LENGTHS_FILE: &str = "stats_lengths.csv";
pub const OCCURRENCES_FILE: &str = "stats_occurrences.csv";
pub const STARTS_FILE: &str = "stats_starts.csv";

#[derive(Debug, Serialize)]
struct Resolved {
    n_nodes: usize,
    n_edges: usize,
    beta: u64,
    seeds: Vec<u64>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a RunConfig,
    resolved: Resolved,
    outputs: Vec<&'a str>,
}

/// Wall-clock milliseconds per named stage.
#[derive(Debug, Default)]
struct Timings(Vec<(&'static str, f64)>);

impl Timings {
    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.push((stage, start.elapsed().as_secs_f64() * 1e3));
        out
    }

    fn to_value(&self) -> Value {
        Value::Object(self.0.iter().map(|(k, v)| ((*k).to_owned(), Value::from(*v))).collect())
    }
}

fn write_file(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::output(path, e))
}

fn prepare_out(cfg: &RunConfig) -> CliResult<&Path> {
    let dir = cfg.out_dir()?;
    fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))?;
    Ok(dir)
}

pub fn load_graph(cfg: &RunConfig) -> CliResult<TemporalGraph> {
    let opts = LoadOptions {
        directed: cfg.directed,
        unit_scale: cfg.unit_scale,
    };
    load_edge_list(cfg.input()?, &opts).map_err(at("load"))
}

/// Writes manifest.json and timings.json, then prints both to stdout.
fn finish(
    dir: &Path,
    command: &str,
    cfg: &RunConfig,
    g: &TemporalGraph,
    mut outputs: Vec<&str>,
    timings: &Timings,
) -> CliResult<()> {
    outputs.push(MANIFEST_FILE);
    outputs.push(TIMINGS_FILE);
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        resolved: Resolved {
            n_nodes: g.n_nodes(),
            n_edges: g.n_edges(),
            beta: cfg.budget(g.n_nodes()).beta,
            seeds: cfg.seed_list(),
        },
        outputs,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_file(dir, MANIFEST_FILE, &text)?;
    let timings = timings.to_value();
    write_file(dir, TIMINGS_FILE, format!("{timings:#}\n"))?;
    let mut printed = serde_json::to_value(&manifest).expect("manifest serializes");
    printed["timings_ms"] = timings;
    println!("{printed:#}");
    Ok(())
}

fn write_stats(dir: &Path, walks: &[TemporalWalk], g: &TemporalGraph) -> CliResult<()> {
    let stats = WalkStats::from_walks(walks, g.n_nodes()).map_err(at("stats"))?;
    let mut buf = Vec::new();
    stats.write_lengths_csv(&mut buf).expect("in-memory write");
    write_file(dir, LENGTHS_FILE, &buf)?;
    buf.clear();
    stats.write_occurrences_csv(&mut buf, g.labels()).expect("in-memory write");
    write_file(dir, OCCURRENCES_FILE, &buf)?;
    buf.clear();
    stats.write_starts_csv(&mut buf, g.labels()).expect("in-memory write");
    write_file(dir, STARTS_FILE, &buf)
}

fn embeddings_text(z: &EmbeddingMatrix) -> Vec<u8> {
    let mut buf = Vec::new();
    write_embeddings(z, &mut buf).expect("in-memory write");
    buf
}

pub fn cmd_train(cfg: &RunConfig) -> CliResult<()> {
    let dir = prepare_out(cfg)?;
    let mut timings = Timings::default();
    let g = timings.time("load", || load_graph(cfg))?;
    let walks = timings.time("walks", || generate_walks(&g, &cfg.walk_config(g.n_nodes()))).map_err(at("walks"))?;
    let z = timings.time("train", || train(&walks, g.labels(), &cfg.train_config())).map_err(at("train"))?;
    timings.time("write", || -> CliResult<()> {
        write_file(dir, EMBEDDINGS_FILE, embeddings_text(&z))?;
        write_stats(dir, &walks, &g)
    })?;
    let outputs = vec![EMBEDDINGS_FILE, LENGTHS_FILE, OCCURRENCES_FILE, STARTS_FILE];
    finish(dir, "train", cfg, &g, outputs, &timings)
}

pub fn cmd_stats(cfg: &RunConfig) -> CliResult<()> {
    let dir = prepare_out(cfg)?;
    let mut timings = Timings::default();
    let g = timings.time("load", || load_graph(cfg))?;
    let walks = timings.time("walks", || generate_walks(&g, &cfg.walk_config(g.n_nodes()))).map_err(at("walks"))?;
    timings.time("write", || write_stats(dir, &walks, &g))?;
    finish(dir, "stats", cfg, &g, vec![LENGTHS_FILE, OCCURRENCES_FILE, STARTS_FILE], &timings)
}

/// Variants requested by the config, as (name, mode, start, neighbor).
fn variants(cfg: &RunConfig) -> Vec<(String, WalkMode, BiasKind, BiasKind)> {
    let mut out = Vec::new();
    if cfg.all_variants {
        for fs in BiasKind::ALL {
            for fg in BiasKind::ALL {
                out.push((ctdne_variant(fs, fg), WalkMode::Temporal, fs, fg));
            }
        }
    } else {
        out.push((ctdne_variant(cfg.fs, cfg.fg), WalkMode::Temporal, cfg.fs, cfg.fg));
    }
    if cfg.static_baseline {
        out.push((STATIC_VARIANT.to_owned(), WalkMode::Static, BiasKind::Uniform, BiasKind::Uniform));
    }
    out
}

pub fn evaluate_variant(g: &TemporalGraph, cfg: &RunConfig, mode: WalkMode, fs: BiasKind, fg: BiasKind) -> CliResult<LinkPredictionReport> {
    let mut lp = cfg.link_prediction(g.n_nodes());
    lp.mode = mode;
    lp.walk.fs = fs;
    lp.walk.fg = fg;
    run_link_prediction(g, &lp).map_err(at("eval"))
}

pub fn cmd_eval(cfg: &RunConfig) -> CliResult<()> {
    let dir = prepare_out(cfg)?;
    let mut timings = Timings::default();
    let g = timings.time("load", || load_graph(cfg))?;
    let dataset = cfg.dataset_name();
    let mut rows = Vec::new();
    timings.time("eval", || -> CliResult<()> {
        for (name, mode, fs, fg) in variants(cfg) {
            let report = evaluate_variant(&g, cfg, mode, fs, fg)?;
            log::info!("{dataset} {name}: mean AUC {:.4} +- {:.4}", report.mean_auc, report.std_auc);
            rows.extend(rows_from_report(&dataset, &name, &report));
        }
        Ok(())
    })?;
    write_file(dir, RESULTS_FILE, results_csv(&rows))?;
    write_file(dir, SUMMARY_FILE, Summary::from_rows(&rows).to_json())?;
    finish(dir, "eval", cfg, &g, vec![RESULTS_FILE, SUMMARY_FILE], &timings)
}

pub fn cmd_snapshots(cfg: &RunConfig) -> CliResult<()> {
    let snap = cfg.snapshot_config()?;
    let dir = prepare_out(cfg)?;
    let mut timings = Timings::default();
    let g = timings.time("load", || load_graph(cfg))?;
    let dataset = cfg.dataset_name();
    let lp = cfg.link_prediction(g.n_nodes());
    let dtdne = timings.time("dtdne", || dtdne_baseline(&g, &lp, &snap)).map_err(at("dtdne"))?;
    let ctdne = timings.time("ctdne", || run_link_prediction(&g, &lp)).map_err(at("ctdne"))?;
    let mut rows = rows_from_report(&dataset, &format!("dtdne-t{}", snap.count), &dtdne);
    rows.extend(rows_from_report(&dataset, &ctdne_variant(cfg.fs, cfg.fg), &ctdne));
    write_file(dir, RESULTS_FILE, snapshot_csv(&dataset, snap.count, dtdne.mean_auc, ctdne.mean_auc))?;
    write_file(dir, SEEDS_FILE, results_csv(&rows))?;
    write_file(dir, SUMMARY_FILE, Summary::from_rows(&rows).to_json())?;
    finish(dir, "snapshots", cfg, &g, vec![RESULTS_FILE, SEEDS_FILE, SUMMARY_FILE], &timings)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LatencyReport {
    pub edges: usize,
    pub walks_per_edge: usize,
    pub mean_ms: Option<f64>,
    pub median_ms: Option<f64>,
    pub p99_ms: Option<f64>,
}

impl LatencyReport {
    pub fn from_samples(samples_ms: &[f64], walks_per_edge: usize) -> Self {
        let mut sorted = samples_ms.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let (mean_ms, median_ms, p99_ms) = if n == 0 {
            (None, None, None)
        } else {
            let median = if n % 2 == 1 {
                sorted[n / 2]
            } else {
                (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
            };
            let p99 = sorted[((0.99 * n as f64).ceil() as usize).clamp(1, n) - 1];
            (Some(sorted.iter().sum::<f64>() / n as f64), Some(median), Some(p99))
        };
        LatencyReport {
            edges: n,
            walks_per_edge,
            mean_ms,
            median_ms,
            p99_ms,
        }
    }
}

#[derive(Debug)]
pub struct StreamOutcome {
    pub graph: TemporalGraph,
    pub embeddings: EmbeddingMatrix,
    /// Per streamed edge: insert, backward walks and online update.
    pub latencies_ms: Vec<f64>,
}

/// Batch-trains on the first `warmup` fraction of `full`, then feeds the
/// remaining edges one at a time.
pub fn replay_stream(full: &TemporalGraph, cfg: &RunConfig) -> CliResult<StreamOutcome> {
    let m = full.n_edges();
    let warm = ((cfg.warmup * m as f64).floor() as usize).min(m);
    let mut g = TemporalGraph::new(full.is_directed()).with_time_unit(full.units_per_second());
    for e in &full.edges()[..warm] {
        g.add_edge(full.label(e.src), full.label(e.dst), e.time);
    }
    let train_cfg = cfg.train_config();
    let mut online = OnlineTrainer::new(train_cfg.clone()).map_err(at("stream"))?;
    let mut z = if warm > 0 {
        let walks = generate_walks(&g, &cfg.walk_config(g.n_nodes())).map_err(at("warmup"))?;
        online.observe(&walks);
        train(&walks, g.labels(), &train_cfg).map_err(at("warmup"))?
    } else {
        EmbeddingMatrix::from_rows(Vec::new(), cfg.dim, Vec::new()).map_err(at("stream"))?
    };
    let fg = NeighborBias::new(cfg.fg, &cfg.bias(), full);
    let mut rng = stream_rng(derive_seed(cfg.seed, STREAM_TAG), 0);
    let mut latencies_ms = Vec::with_capacity(m - warm);
    for e in &full.edges()[warm..] {
        let (src, dst) = (full.label(e.src), full.label(e.dst));
        let start = Instant::now();
        let added = g.add_edge(src, dst, e.time);
        let walks = backward_walks_for_edge(&g, added, cfg.walks_per_edge, cfg.max_len, &fg, &mut rng)
            .map_err(at("stream"))?;
        online.update(&mut z, g.labels(), &walks);
        latencies_ms.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(StreamOutcome {
        graph: g,
        embeddings: z,
        latencies_ms,
    })
}

pub fn cmd_stream(cfg: &RunConfig) -> CliResult<()> {
    let dir = prepare_out(cfg)?;
    let mut timings = Timings::default();
    let full = timings.time("load", || load_graph(cfg))?;
    let outcome = timings.time("stream", || replay_stream(&full, cfg))?;
    let latency = LatencyReport::from_samples(&outcome.latencies_ms, cfg.walks_per_edge);
    write_file(dir, EMBEDDINGS_FILE, embeddings_text(&outcome.embeddings))?;
    let latency_json = serde_json::to_string_pretty(&latency).expect("latency serializes");
    write_file(dir, LATENCY_FILE, format!("{latency_json}\n"))?;
    eprintln!("{latency_json}");
    finish(dir, "stream", cfg, &full, vec![EMBEDDINGS_FILE, LATENCY_FILE], &timings)
}

pub fn cmd_synth(args: &SynthArgs) -> CliResult<()> {
    let cfg = CommunityStreamConfig {
        n_nodes: args.nodes,
        n_edges: args.edges,
        communities: args.communities,
        switch_fraction: args.switch,
        p_intra: args.p_intra,
        activity_skew: args.skew,
        seed: args.seed,
    };
    let g = community_stream(&cfg).map_err(at("synth"))?;
    let mut text = String::with_capacity(g.n_edges() * 16);
    for e in g.edges() {
        text.push_str(&format!("{} {} {}\n", g.label(e.src), g.label(e.dst), e.time));
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::output(parent, e))?;
    }
    fs::write(&args.out, text).map_err(|e| CliError::output(&args.out, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latency_summary() {
        let r = LatencyReport::from_samples(&[4.0, 1.0, 3.0, 2.0], 10);
        assert_eq!((r.mean_ms, r.median_ms, r.p99_ms), (Some(2.5), Some(2.5), Some(4.0)));
        let empty = LatencyReport::from_samples(&[], 10);
        assert_eq!((empty.edges, empty.mean_ms), (0, None));
    }
}
