//! Run configuration resolved from defaults, `CTDNE_SEED`, a config file and
//! command-line flags, in increasing precedence.

use std::path::{Path, PathBuf};

use ctdne::evaluation::{InactivePolicy, NegativeExclusion, SnapshotConfig, SnapshotMode};
use ctdne::{BiasConfig, BiasKind, Favor, LinkPredictionConfig, TrainConfig, WalkBudget, WalkConfig};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "CTDNE_SEED";

/// Serializes enums through their `Display` / `FromStr` names.
mod text {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(value: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(value)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub dataset: Option<String>,
    pub directed: bool,
    pub unit_scale: Option<f64>,
    #[serde(with = "text")]
    pub fs: BiasKind,
    #[serde(with = "text")]
    pub fg: BiasKind,
    pub exp_scale: Option<f64>,
    #[serde(with = "text")]
    pub linear_favor: Favor,
    #[serde(with = "text")]
    pub exp_favor: Favor,
    pub omega: usize,
    pub max_len: usize,
    /// Context-window budget. Exclusive with `walks_per_node`.
    pub beta: Option<u64>,
    /// Walks per node, converted to a budget over the graph's node count.
    pub walks_per_node: Option<u64>,
    pub relax: bool,
    pub dim: usize,
    pub negatives: usize,
    pub lr: f64,
    pub lr_min: f64,
    pub epochs: usize,
    pub online_lr: Option<f64>,
    pub seed: u64,
    pub seeds: usize,
    pub threads: usize,
    pub split: f64,
    pub holdout: f64,
    #[serde(with = "text")]
    pub negatives_from: NegativeExclusion,
    pub snapshots: usize,
    #[serde(with = "text")]
    pub snapshot_mode: SnapshotMode,
    #[serde(with = "text")]
    pub inactive_policy: InactivePolicy,
    pub walks_per_edge: usize,
    pub warmup: f64,
    pub all_variants: bool,
    pub static_baseline: bool,
}

pub const DEFAULT_WALKS_PER_NODE: u64 = 10;

impl Default for RunConfig {
    fn default() -> Self {
        let bias = BiasConfig::default();
        let train = TrainConfig::default();
        RunConfig {
            input: None,
            out: None,
            dataset: None,
            directed: false,
            unit_scale: None,
            fs: BiasKind::Uniform,
            fg: BiasKind::Uniform,
            exp_scale: None,
            linear_favor: bias.linear_favor,
            exp_favor: bias.exp_favor,
            omega: 10,
            max_len: 80,
            beta: None,
            walks_per_node: None,
            relax: true,
            dim: train.dim,
            negatives: train.negatives,
            lr: train.lr0,
            lr_min: train.lr_min,
            epochs: train.epochs,
            online_lr: None,
            seed: 0,
            seeds: 10,
            threads: 1,
            split: 0.75,
            holdout: 0.25,
            negatives_from: NegativeExclusion::FullGraph,
            snapshots: 4,
            snapshot_mode: SnapshotMode::EqualTime,
            inactive_policy: InactivePolicy::Zeros,
            walks_per_edge: 10,
            warmup: 0.0,
            all_variants: false,
            static_baseline: false,
        }
    }
}

/// Keys whose values stay strings even when they look like numbers.
const STRING_KEYS: [&str; 3] = ["input", "out", "dataset"];

/// Reads a config file: either a JSON object (a run manifest's `config`
/// member is used when present) or `key = value` lines with `#` comments.
pub fn read_config_file(path: &Path) -> CliResult<Map<String, Value>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: invalid JSON: {e}", path.display())))?;
        let object = match value {
            Value::Object(mut o) => match o.remove("config") {
                Some(Value::Object(inner)) => inner,
                Some(_) => return Err(CliError::Usage(format!("{}: `config` must be an object", path.display()))),
                None => o,
            },
            _ => return Err(CliError::Usage(format!("{}: expected a JSON object", path.display()))),
        };
        return Ok(object);
    }
    let mut map = Map::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("{}:{}: expected key = value", path.display(), i + 1)));
        };
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let parsed = if STRING_KEYS.contains(&key.as_str()) {
            Value::String(value.to_owned())
        } else {
            serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_owned()))
        };
        map.insert(key, parsed);
    }
    Ok(map)
}

fn overlay(base: &mut Map<String, Value>, layer: Map<String, Value>, source: &str) -> CliResult<()> {
    let has = |k: &str| layer.get(k).is_some_and(|v| !v.is_null());
    match (has("beta"), has("walks_per_node")) {
        (true, true) => {
            return Err(CliError::Usage(format!("{source}: beta and walks-per-node are mutually exclusive")));
        }
        (true, false) => {
            base.insert("walks_per_node".into(), Value::Null);
        }
        (false, true) => {
            base.insert("beta".into(), Value::Null);
        }
        (false, false) => {}
    }
    for (k, v) in layer {
        base.insert(k, v);
    }
    Ok(())
}

/// Merges the layers and validates the result.
pub fn resolve(
    config_file: Option<&Path>,
    env_seed: Option<&str>,
    flags: Map<String, Value>,
) -> CliResult<RunConfig> {
    let mut merged = match serde_json::to_value(RunConfig::default()) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("RunConfig serializes to an object"),
    };
    if let Some(raw) = env_seed {
        let seed: u64 = raw
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV} must be an unsigned integer, got {raw:?}")))?;
        merged.insert("seed".into(), seed.into());
    }
    if let Some(path) = config_file {
        let layer = read_config_file(path)?;
        overlay(&mut merged, layer, &path.display().to_string())?;
    }
    overlay(&mut merged, flags, "flags")?;
    let cfg: RunConfig = serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        let fail = |msg: String| Err(CliError::Usage(msg));
        if self.omega < 2 {
            return fail(format!("omega must be at least 2, got {}", self.omega));
        }
        if self.max_len < self.omega {
            return fail(format!("max-len ({}) must be at least omega ({})", self.max_len, self.omega));
        }
        if self.beta == Some(0) || self.walks_per_node == Some(0) {
            return fail("beta and walks-per-node must be positive".into());
        }
        if self.beta.is_some() && self.walks_per_node.is_some() {
            return fail("beta and walks-per-node are mutually exclusive".into());
        }
        if self.exp_scale.is_some_and(|s| !(s > 0.0)) {
            return fail("exp-scale must be positive".into());
        }
        if self.unit_scale.is_some_and(|s| !(s > 0.0)) {
            return fail("unit-scale must be positive".into());
        }
        if self.seeds == 0 || self.threads == 0 || self.walks_per_edge == 0 || self.snapshots == 0 {
            return fail("seeds, threads, walks-per-edge and snapshots must be positive".into());
        }
        if !(self.split > 0.0 && self.split < 1.0) || !(self.holdout > 0.0 && self.holdout < 1.0) {
            return fail("split and holdout fractions must lie strictly between 0 and 1".into());
        }
        if !(0.0..=1.0).contains(&self.warmup) {
            return fail(format!("warmup must lie in [0, 1], got {}", self.warmup));
        }
        self.train_config().validate().map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn input(&self) -> CliResult<&Path> {
        self.input.as_deref().ok_or_else(|| CliError::Usage("an input edge list is required (--input)".into()))
    }

    pub fn out_dir(&self) -> CliResult<&Path> {
        self.out.as_deref().ok_or_else(|| CliError::Usage("an output directory is required (--out)".into()))
    }

    pub fn dataset_name(&self) -> String {
        if let Some(name) = &self.dataset {
            return name.clone();
        }
        self.input
            .as_deref()
            .and_then(|p| p.file_name())
            .map(|n| {
                let n = n.to_string_lossy();
                let n = n.strip_suffix(".gz").unwrap_or(&n);
                n.rsplit_once('.').map_or(n, |(stem, _)| stem).to_owned()
            })
            .unwrap_or_else(|| "dataset".into())
    }

    /// Budget for a graph with `n_nodes` nodes.
    pub fn budget(&self, n_nodes: usize) -> WalkBudget {
        match self.beta {
            Some(beta) => WalkBudget {
                beta,
                omega: self.omega,
                max_len: self.max_len,
                relax: self.relax,
            },
            None => {
                let r = self.walks_per_node.unwrap_or(DEFAULT_WALKS_PER_NODE);
                WalkBudget {
                    relax: self.relax,
                    ..WalkBudget::matching_fixed_walks(r, n_nodes, self.max_len, self.omega)
                }
            }
        }
    }

    pub fn bias(&self) -> BiasConfig {
        BiasConfig {
            exp_scale: self.exp_scale,
            linear_favor: self.linear_favor,
            exp_favor: self.exp_favor,
        }
    }

    pub fn walk_config(&self, n_nodes: usize) -> WalkConfig {
        WalkConfig {
            budget: self.budget(n_nodes),
            fs: self.fs,
            fg: self.fg,
            bias: self.bias(),
            seed: self.seed,
            parallel: self.threads > 1,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            dim: self.dim,
            omega: self.omega,
            negatives: self.negatives,
            lr0: self.lr,
            lr_min: self.lr_min,
            epochs: self.epochs,
            seed: self.seed,
            shrink_window: false,
            online_lr: self.online_lr,
            threads: self.threads,
        }
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| self.seed.wrapping_add(i)).collect()
    }

    pub fn link_prediction(&self, n_nodes: usize) -> LinkPredictionConfig {
        let mut lp = LinkPredictionConfig::new(self.walk_config(n_nodes), self.train_config());
        lp.split_fraction = self.split;
        lp.holdout = self.holdout;
        lp.exclusion = self.negatives_from;
        lp.seeds = self.seed_list();
        lp.parallel = self.threads > 1;
        lp
    }

    pub fn snapshot_config(&self) -> CliResult<SnapshotConfig> {
        let snap = SnapshotConfig {
            count: self.snapshots,
            mode: self.snapshot_mode,
            inactive: self.inactive_policy,
        };
        snap.block_dim(self.dim).map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(snap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn flags(pairs: &[(&str, Value)]) -> Map<String, Value> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn precedence_is_flag_file_env_default() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "# comment\nomega = 5\nfs = exp\nseed = 3\ninput = 123").unwrap();
        let cfg = resolve(Some(file.path()), Some("9"), flags(&[("omega", 4.into())])).unwrap();
        assert_eq!(cfg.omega, 4);
        assert_eq!(cfg.fs, BiasKind::Exponential);
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.input.as_deref(), Some(Path::new("123")));
        assert_eq!(resolve(None, Some("9"), Map::new()).unwrap().seed, 9);
        assert_eq!(resolve(None, None, Map::new()).unwrap(), RunConfig::default());
    }

    #[test]
    fn budget_choice_is_exclusive_per_layer() {
        let both = flags(&[("beta", 10.into()), ("walks_per_node", 2.into())]);
        assert!(matches!(resolve(None, None, both), Err(CliError::Usage(_))));
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "beta = 500").unwrap();
        let cfg = resolve(Some(file.path()), None, flags(&[("walks_per_node", 2.into())])).unwrap();
        assert_eq!((cfg.beta, cfg.walks_per_node), (None, Some(2)));
    }

    #[test]
    fn derived_budget() {
        let cfg = resolve(
            None,
            None,
            flags(&[("walks_per_node", 10.into()), ("max_len", 80.into()), ("omega", 10.into())]),
        )
        .unwrap();
        assert_eq!(cfg.budget(100).beta, 71_000);
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        for bad in [("omega", Value::from(1)), ("fs", "bogus".into()), ("nonsense", 1.into()), ("split", 1.0.into())] {
            assert!(matches!(resolve(None, None, flags(&[bad.clone()])), Err(CliError::Usage(_))), "{bad:?}");
        }
        assert!(resolve(None, Some("x"), Map::new()).is_err());
        let cfg = resolve(None, None, flags(&[("snapshots", 3.into())])).unwrap();
        assert!(cfg.snapshot_config().is_err());
    }

    #[test]
    fn manifest_json_is_accepted() {
        let mut cfg = RunConfig::default();
        cfg.omega = 6;
        cfg.beta = Some(77);
        let manifest = serde_json::json!({ "command": "train", "config": cfg });
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(file, "{manifest}").unwrap();
        assert_eq!(resolve(Some(file.path()), None, Map::new()).unwrap(), cfg);
    }

    #[test]
    fn dataset_name_from_input() {
        let cfg = RunConfig {
            input: Some("data/ia-contact.edges.gz".into()),
            ..RunConfig::default()
        };
        assert_eq!(cfg.dataset_name(), "ia-contact");
    }
}
