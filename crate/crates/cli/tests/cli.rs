use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ctdne_cli::report::{parse_results_csv, summary_from_results_csv, Summary};
use serde_json::Value;
use tempfile::TempDir;

const FIG1: &str = "1 2 1\n2 3 2\n3 4 3\n4 1 4\n3 4 5\n5 3 7\n2 5 8\n6 3 10\n";

fn ctdne(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctdne"))
        .args(args)
        .env_remove("CTDNE_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = ctdne(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn synth(dir: &TempDir, nodes: usize, edges: usize) -> PathBuf {
    let path = dir.path().join("synth.edges");
    ok(&["synth", "--out", s(&path), "--nodes", &nodes.to_string(), "--edges", &edges.to_string()]);
    path
}

#[test]
fn fig1_train_writes_embeddings_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let input = write(&tmp, "fig1.edges", FIG1);
    let out = tmp.path().join("run");
    let stdout = ok(&["train", "-i", s(&input), "-o", s(&out), "--omega", "2", "--beta", "10", "--dim", "8"]).stdout;
    let text = fs::read_to_string(out.join("embeddings.txt")).unwrap();
    assert_eq!(text.lines().next(), Some("6 8"));
    assert_eq!(text.lines().count(), 7);
    let m = manifest(&out);
    assert_eq!(m["command"], "train");
    assert_eq!(m["resolved"]["n_nodes"], 6);
    assert_eq!(m["resolved"]["n_edges"], 8);
    for file in m["outputs"].as_array().unwrap() {
        assert!(out.join(file.as_str().unwrap()).is_file());
    }
    assert!(m.get("timings_ms").is_none());
    let printed: Value = serde_json::from_slice(&stdout).unwrap();
    assert!(printed["timings_ms"].is_object());
}

#[test]
fn walks_per_node_resolves_to_window_budget() {
    let tmp = TempDir::new().unwrap();
    let ring: String = (0..100).map(|i| format!("r{i} r{} {i}\n", (i + 1) % 100)).collect();
    let input = write(&tmp, "ring.edges", &ring);
    let out = tmp.path().join("run");
    ok(&["stats", "-i", s(&input), "-o", s(&out), "--walks-per-node", "10", "--max-len", "80", "--omega", "10"]);
    let m = manifest(&out);
    assert_eq!(m["resolved"]["n_nodes"], 100);
    assert_eq!(m["resolved"]["beta"], 71_000);
}

#[test]
fn invalid_omega_is_a_usage_error_before_any_work() {
    let tmp = TempDir::new().unwrap();
    let input = write(&tmp, "fig1.edges", FIG1);
    let out = tmp.path().join("never");
    let res = ctdne(&["train", "-i", s(&input), "-o", s(&out), "--omega", "1"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(!out.exists());
    assert_eq!(ctdne(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(ctdne(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_input_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    let res = ctdne(&["train", "-i", s(&tmp.path().join("absent.edges")), "-o", s(&tmp.path().join("o"))]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).starts_with("error:"));
}

#[test]
fn all_variants_sweep_round_trips_through_csv() {
    let tmp = TempDir::new().unwrap();
    let input = synth(&tmp, 60, 600);
    let out = tmp.path().join("eval");
    ok(&[
        "eval", "-i", s(&input), "-o", s(&out), "--all-variants", "--seeds", "2", "--dim", "8", "--omega", "3", "--max-len",
        "10",
    ]);
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    let rows = parse_results_csv(&csv).unwrap();
    assert_eq!(rows.len(), 18);
    assert!(rows.iter().all(|r| r.dataset == "synth" && (0.0..=1.0).contains(&r.auc)));
    let summary: Summary = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.variants.len(), 9);
    assert_eq!(summary.best.len(), 1);
    assert_eq!(summary_from_results_csv(&csv).unwrap(), summary);
}

#[test]
fn snapshot_count_must_divide_dimension() {
    let tmp = TempDir::new().unwrap();
    let input = write(&tmp, "fig1.edges", FIG1);
    let out = tmp.path().join("snap");
    let res = ctdne(&["snapshots", "-i", s(&input), "-o", s(&out), "--snapshots", "3", "--dim", "8"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn snapshots_report_gain() {
    let tmp = TempDir::new().unwrap();
    let input = synth(&tmp, 60, 600);
    let out = tmp.path().join("snap");
    ok(&[
        "snapshots", "-i", s(&input), "-o", s(&out), "--snapshots", "2", "--dim", "8", "--seeds", "2", "--omega", "3",
        "--max-len", "10",
    ]);
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("dataset,T,dtdne_auc,ctdne_auc,gain_pct"));
    let f: Vec<&str> = lines.next().unwrap().split(',').collect();
    let (d, c, gain): (f64, f64, f64) = (f[2].parse().unwrap(), f[3].parse().unwrap(), f[4].parse().unwrap());
    assert_eq!(f[1], "2");
    assert!((gain - (c - d) / d * 100.0).abs() < 1e-9);
    let seeds = parse_results_csv(&fs::read_to_string(out.join("seeds.csv")).unwrap()).unwrap();
    assert_eq!(seeds.len(), 4);
    assert!(seeds.iter().any(|r| r.variant == "dtdne-t2"));
}

#[test]
fn full_warmup_stream_matches_batch_training() {
    let tmp = TempDir::new().unwrap();
    let input = synth(&tmp, 40, 300);
    let common = ["-i", s(&input), "--omega", "3", "--max-len", "10", "--dim", "8", "--seed", "3"];
    let (a, b) = (tmp.path().join("train"), tmp.path().join("stream"));
    ok(&[&["train", "-o", s(&a)][..], &common].concat());
    ok(&[&["stream", "-o", s(&b), "--warmup", "1.0"][..], &common].concat());
    assert_eq!(fs::read(a.join("embeddings.txt")).unwrap(), fs::read(b.join("embeddings.txt")).unwrap());
    let latency: Value = serde_json::from_str(&fs::read_to_string(b.join("latency.json")).unwrap()).unwrap();
    assert_eq!(latency["edges"], 0);
}

#[test]
fn streaming_replay_reports_latency() {
    let tmp = TempDir::new().unwrap();
    let input = synth(&tmp, 40, 300);
    let out = tmp.path().join("stream");
    let res = ok(&[
        "stream", "-i", s(&input), "-o", s(&out), "--omega", "3", "--max-len", "10", "--dim", "8", "--warmup", "0.5",
        "--walks-per-edge", "4",
    ]);
    let latency: Value = serde_json::from_str(&fs::read_to_string(out.join("latency.json")).unwrap()).unwrap();
    assert_eq!(latency["edges"], 150);
    assert_eq!(latency["walks_per_edge"], 4);
    assert!(String::from_utf8_lossy(&res.stderr).contains("mean_ms"));
    let text = fs::read_to_string(out.join("embeddings.txt")).unwrap();
    assert!(text.starts_with(&format!("{} 8", text.lines().count() - 1)));
}

fn csv_column(path: &Path) -> Vec<(String, u64)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let (k, v) = l.split_once(',').unwrap();
            (k.to_owned(), v.parse().unwrap())
        })
        .collect()
}

#[test]
fn walk_statistics_are_consistent() {
    let tmp = TempDir::new().unwrap();
    let input = synth(&tmp, 40, 300);
    let out = tmp.path().join("stats");
    ok(&["stats", "-i", s(&input), "-o", s(&out), "--omega", "3", "--max-len", "10", "--no-relax"]);
    let lengths = csv_column(&out.join("stats_lengths.csv"));
    let walks: u64 = lengths.iter().map(|(_, c)| c).sum();
    let positions: u64 = lengths.iter().map(|(l, c)| l.parse::<u64>().unwrap() * c).sum();
    let occurrences: u64 = csv_column(&out.join("stats_occurrences.csv")).iter().map(|(_, c)| c).sum();
    let starts: u64 = csv_column(&out.join("stats_starts.csv")).iter().map(|(_, c)| c).sum();
    assert_eq!(positions, occurrences);
    assert_eq!(walks, starts);
    assert!(lengths.iter().all(|(l, _)| (3..=10).contains(&l.parse::<usize>().unwrap())));
}

#[test]
fn flags_override_config_file_and_environment() {
    let tmp = TempDir::new().unwrap();
    let input = write(&tmp, "fig1.edges", FIG1);
    let conf = write(&tmp, "run.conf", "# overrides\nseed = 5\ndim = 4\nomega = 2\nbeta = 10\n");
    let out = tmp.path().join("run");
    let run = |extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_ctdne"));
        cmd.args(["train", "-i", s(&input), "-o", s(&out), "--config", s(&conf)]).args(extra);
        match env {
            Some(v) => cmd.env("CTDNE_SEED", v),
            None => cmd.env_remove("CTDNE_SEED"),
        };
        assert!(cmd.output().unwrap().status.success());
        manifest(&out)["config"].clone()
    };
    let cfg = run(&[], Some("9"));
    assert_eq!((cfg["seed"].as_u64(), cfg["dim"].as_u64()), (Some(5), Some(4)));
    let cfg = run(&["--seed", "11"], Some("9"));
    assert_eq!(cfg["seed"].as_u64(), Some(11));

    // A manifest is itself a valid config file.
    let replay = tmp.path().join("replay");
    ok(&["train", "-i", s(&input), "-o", s(&replay), "--config", s(&out.join("manifest.json"))]);
    assert_eq!(fs::read(out.join("embeddings.txt")).unwrap(), fs::read(replay.join("embeddings.txt")).unwrap());
}
