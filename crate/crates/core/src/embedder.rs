//! Skip-gram with negative sampling over walk corpora.
//!
//! Every node owns an input vector (the embedding) and a context vector.
//! For each walk position and each other position within `omega` of it, the
//! pair gets one positive update and `negatives` updates against nodes drawn
//! from the unigram^0.75 distribution of walk occurrences.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use flate2::read::MultiGzDecoder;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng, Rng as StreamRng};
use crate::walker::TemporalWalk;

const INIT_TAG: u64 = 0x696e_6974;
const SGD_TAG: u64 = 0x7367_6421;
const NOISE_POWER: f64 = 0.75;
/// Online mode rebuilds the noise table after this many pair updates.
pub const NOISE_REFRESH_INTERVAL: u64 = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub omega: usize,
    pub negatives: usize,
    pub lr0: f64,
    pub lr_min: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Sample a per-position window in `1..=omega` instead of always using `omega`.
    pub shrink_window: bool,
    /// Fixed step size for online updates; `None` means `lr0 / 10`.
    pub online_lr: Option<f64>,
    /// Worker count for batch training. Above one, workers update shared
    /// rows without locking and results are no longer deterministic.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 128,
            omega: 10,
            negatives: 5,
            lr0: 0.025,
            lr_min: 1e-4,
            epochs: 1,
            seed: 0,
            shrink_window: false,
            online_lr: None,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.dim == 0 {
            return bad("dimension must be at least 1".into());
        }
        if self.omega == 0 {
            return bad("omega must be at least 1".into());
        }
        if self.negatives == 0 {
            return bad("negatives must be at least 1".into());
        }
        if !(self.lr_min > 0.0 && self.lr_min <= self.lr0) {
            return bad(format!("need 0 < lr_min ({}) <= lr0 ({})", self.lr_min, self.lr0));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if let Some(lr) = self.online_lr {
            if !(lr > 0.0) {
                return bad(format!("online learning rate must be positive, got {lr}"));
            }
        }
        Ok(())
    }

    pub fn resolved_online_lr(&self) -> f64 {
        self.online_lr.unwrap_or(self.lr0 / 10.0)
    }
}

/// Input and context vectors for every node, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    labels: Vec<String>,
    dim: usize,
    input: Vec<f64>,
    context: Vec<f64>,
}

impl EmbeddingMatrix {
    /// Input rows uniform in `[-0.5/D, 0.5/D]`, context rows zero.
    pub fn random<R: Rng + ?Sized>(labels: Vec<String>, dim: usize, rng: &mut R) -> Self {
        let n = labels.len();
        let half = 0.5 / dim as f64;
        let input = (0..n * dim).map(|_| rng.random_range(-half..half)).collect();
        EmbeddingMatrix {
            labels,
            dim,
            input,
            context: vec![0.0; n * dim],
        }
    }

    /// Matrix with the given input rows and zero context rows.
    pub fn from_rows(labels: Vec<String>, dim: usize, input: Vec<f64>) -> Result<Self> {
        if input.len() != labels.len() * dim {
            return Err(Error::DimensionMismatch {
                left: input.len(),
                right: labels.len() * dim,
            });
        }
        let context = vec![0.0; input.len()];
        Ok(EmbeddingMatrix {
            labels,
            dim,
            input,
            context,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn vector(&self, node: u32) -> &[f64] {
        let at = node as usize * self.dim;
        &self.input[at..at + self.dim]
    }

    pub fn vector_mut(&mut self, node: u32) -> &mut [f64] {
        let at = node as usize * self.dim;
        &mut self.input[at..at + self.dim]
    }

    pub fn context_vector(&self, node: u32) -> &[f64] {
        let at = node as usize * self.dim;
        &self.context[at..at + self.dim]
    }

    pub fn input_data(&self) -> &[f64] {
        &self.input
    }

    /// `σ(z_a · z'_b)`: how strongly `b` is predicted as context of `a`.
    pub fn score(&self, a: u32, b: u32) -> f64 {
        sigmoid(dot(self.vector(a), self.context_vector(b)))
    }

    pub fn is_finite(&self) -> bool {
        self.input.iter().chain(&self.context).all(|x| x.is_finite())
    }

    /// Appends freshly initialized rows for labels beyond the current row count.
    /// Returns the number of rows added.
    pub fn grow<R: Rng + ?Sized>(&mut self, labels: &[String], rng: &mut R) -> usize {
        let before = self.labels.len();
        if labels.len() <= before {
            return 0;
        }
        let half = 0.5 / self.dim as f64;
        for label in &labels[before..] {
            self.labels.push(label.clone());
            self.input.extend((0..self.dim).map(|_| rng.random_range(-half..half)));
            self.context.extend(std::iter::repeat_n(0.0, self.dim));
        }
        labels.len() - before
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four independent accumulators let the compiler vectorize the loop.
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Loss and gradients of `-log σ(u_o·v) - Σ log σ(-u_n·v)` for one center
/// vector `v`, one context vector `u_o` and the negative context vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct PairGradient {
    pub loss: f64,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn negative_sampling_gradient(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> PairGradient {
    let dim = center.len();
    let pos = dot(center, context);
    let g_pos = sigmoid(pos) - 1.0;
    // -log σ(x) = log(1 + e^-x), written to stay finite for large |x|.
    let softplus = |x: f64| if x > 0.0 { x + (-x).exp().ln_1p() } else { x.exp().ln_1p() };
    let mut loss = softplus(-pos);
    let mut grad_center: Vec<f64> = context.iter().map(|u| g_pos * u).collect();
    let grad_context: Vec<f64> = center.iter().map(|v| g_pos * v).collect();
    let mut grad_negatives = Vec::with_capacity(negatives.len());
    for neg in negatives {
        let s = dot(center, neg);
        loss += softplus(s);
        let g = sigmoid(s);
        for k in 0..dim {
            grad_center[k] += g * neg[k];
        }
        grad_negatives.push(center.iter().map(|v| g * v).collect());
    }
    PairGradient {
        loss,
        center: grad_center,
        context: grad_context,
        negatives: grad_negatives,
    }
}

/// Row access shared by the exclusive and the lock-free parameter stores.
trait RowStore {
    fn read_input(&self, row: usize, out: &mut [f64]);
    fn write_input(&mut self, row: usize, data: &[f64]);
    /// Runs `f` on context row `row`, staging it in `scratch` if needed.
    fn update_context<F: FnOnce(&mut [f64])>(&mut self, row: usize, scratch: &mut [f64], f: F);
}

impl RowStore for EmbeddingMatrix {
    fn read_input(&self, row: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.input[row * self.dim..(row + 1) * self.dim]);
    }
    fn write_input(&mut self, row: usize, data: &[f64]) {
        self.input[row * self.dim..(row + 1) * self.dim].copy_from_slice(data);
    }
    fn update_context<F: FnOnce(&mut [f64])>(&mut self, row: usize, _scratch: &mut [f64], f: F) {
        f(&mut self.context[row * self.dim..(row + 1) * self.dim]);
    }
}

/// f64 bits in relaxed atomics; concurrent writers may overwrite each other.
struct SharedRows {
    dim: usize,
    input: Vec<AtomicU64>,
    context: Vec<AtomicU64>,
}

impl SharedRows {
    fn from_matrix(z: &EmbeddingMatrix) -> Self {
        let wrap = |v: &[f64]| v.iter().map(|x| AtomicU64::new(x.to_bits())).collect();
        SharedRows {
            dim: z.dim,
            input: wrap(&z.input),
            context: wrap(&z.context),
        }
    }

    fn copy_into(&self, z: &mut EmbeddingMatrix) {
        for (dst, src) in z.input.iter_mut().zip(&self.input) {
            *dst = f64::from_bits(src.load(Ordering::Relaxed));
        }
        for (dst, src) in z.context.iter_mut().zip(&self.context) {
            *dst = f64::from_bits(src.load(Ordering::Relaxed));
        }
    }
}

fn load_row(cells: &[AtomicU64], out: &mut [f64]) {
    for (o, c) in out.iter_mut().zip(cells) {
        *o = f64::from_bits(c.load(Ordering::Relaxed));
    }
}

fn store_row(cells: &[AtomicU64], data: &[f64]) {
    for (c, d) in cells.iter().zip(data) {
        c.store(d.to_bits(), Ordering::Relaxed);
    }
}

impl RowStore for &SharedRows {
    fn read_input(&self, row: usize, out: &mut [f64]) {
        load_row(&self.input[row * self.dim..(row + 1) * self.dim], out);
    }
    fn write_input(&mut self, row: usize, data: &[f64]) {
        store_row(&self.input[row * self.dim..(row + 1) * self.dim], data);
    }
    fn update_context<F: FnOnce(&mut [f64])>(&mut self, row: usize, scratch: &mut [f64], f: F) {
        let cells = &self.context[row * self.dim..(row + 1) * self.dim];
        load_row(cells, scratch);
        f(scratch);
        store_row(cells, scratch);
    }
}

/// Unigram^0.75 noise over walk occurrence counts.
#[derive(Clone, Debug)]
struct NoiseTable {
    dist: WeightedIndex<f64>,
}

impl NoiseTable {
    fn from_counts(counts: &[u64]) -> Option<Self> {
        let weights = counts.iter().map(|&c| (c as f64).powf(NOISE_POWER));
        WeightedIndex::new(weights).ok().map(|dist| NoiseTable { dist })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.dist.sample(rng) as u32
    }
}

fn occurrence_counts(walks: &[TemporalWalk], n_nodes: usize) -> Vec<u64> {
    let mut counts = vec![0u64; n_nodes];
    for w in walks {
        for &v in &w.nodes {
            counts[v as usize] += 1;
        }
    }
    counts
}

/// Scratch buffers for one training worker.
struct Worker {
    center: Vec<f64>,
    target: Vec<f64>,
    grad: Vec<f64>,
}

impl Worker {
    fn new(dim: usize) -> Self {
        Worker {
            center: vec![0.0; dim],
            target: vec![0.0; dim],
            grad: vec![0.0; dim],
        }
    }

    /// One positive and `k` negative SGD steps for `(center, context)`.
    /// Negatives equal to the context node are skipped.
    fn train_pair<S: RowStore, R: Rng + ?Sized>(
        &mut self,
        store: &mut S,
        center: u32,
        context: u32,
        negatives: usize,
        noise: &NoiseTable,
        lr: f64,
        rng: &mut R,
    ) {
        store.read_input(center as usize, &mut self.center);
        self.grad.iter_mut().for_each(|x| *x = 0.0);
        self.step(store, context, 1.0, lr);
        for _ in 0..negatives {
            let neg = noise.sample(rng);
            if neg == context {
                continue;
            }
            self.step(store, neg, 0.0, lr);
        }
        for (c, g) in self.center.iter_mut().zip(&self.grad) {
            *c += g;
        }
        store.write_input(center as usize, &self.center);
    }

    fn step<S: RowStore>(&mut self, store: &mut S, target: u32, label: f64, lr: f64) {
        let Worker { center, target: scratch, grad } = self;
        store.update_context(target as usize, scratch, |u| {
            let g = (label - sigmoid(dot(center, u))) * lr;
            for ((gk, uk), ck) in grad.iter_mut().zip(u.iter_mut()).zip(center.iter()) {
                *gk += g * *uk;
                *uk += g * ck;
            }
        });
    }
}

/// Calls `f(center, context)` for every skip-gram pair of `walk`.
fn for_each_pair<R: Rng + ?Sized>(
    walk: &[u32],
    omega: usize,
    shrink: bool,
    rng: &mut R,
    mut f: impl FnMut(u32, u32, &mut R),
) {
    for i in 0..walk.len() {
        let window = if shrink { rng.random_range(1..=omega) } else { omega };
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(walk.len() - 1);
        for j in lo..=hi {
            if j != i {
                f(walk[i], walk[j], rng);
            }
        }
    }
}

fn pair_count(walk_len: usize, omega: usize) -> u64 {
    (0..walk_len)
        .map(|i| (i.saturating_sub(omega)..=(i + omega).min(walk_len - 1)).count() as u64 - 1)
        .sum()
}

fn check_walks(walks: &[TemporalWalk], n_nodes: usize) -> Result<()> {
    if walks.is_empty() {
        return Err(Error::NoWalks);
    }
    for w in walks {
        if w.len() < 2 {
            return Err(Error::InvalidConfig("walks must have at least two nodes".into()));
        }
        if let Some(&v) = w.nodes.iter().find(|&&v| v as usize >= n_nodes) {
            return Err(Error::NodeOutOfRange { node: v, n_nodes });
        }
    }
    Ok(())
}

/// Batch skip-gram training; one row per entry of `labels`.
pub fn train(walks: &[TemporalWalk], labels: &[String], cfg: &TrainConfig) -> Result<EmbeddingMatrix> {
    let mut init_rng = stream_rng(derive_seed(cfg.seed, INIT_TAG), 0);
    let mut z = EmbeddingMatrix::random(labels.to_vec(), cfg.dim, &mut init_rng);
    train_into(&mut z, walks, cfg)?;
    Ok(z)
}

/// Batch training starting from an existing matrix.
pub fn train_into(z: &mut EmbeddingMatrix, walks: &[TemporalWalk], cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    if z.dim != cfg.dim {
        return Err(Error::DimensionMismatch {
            left: z.dim,
            right: cfg.dim,
        });
    }
    check_walks(walks, z.n_nodes())?;
    let noise = NoiseTable::from_counts(&occurrence_counts(walks, z.n_nodes())).ok_or(Error::NoWalks)?;
    let per_epoch: u64 = walks.iter().map(|w| pair_count(w.len(), cfg.omega)).sum();
    let total = (per_epoch * cfg.epochs as u64).max(1) as f64;
    let lr_at = |done: u64| (cfg.lr0 - (cfg.lr0 - cfg.lr_min) * done as f64 / total).max(cfg.lr_min);
    let sgd_seed = derive_seed(cfg.seed, SGD_TAG);

    if cfg.threads <= 1 {
        let mut rng = stream_rng(sgd_seed, 0);
        let mut worker = Worker::new(cfg.dim);
        let mut done = 0u64;
        for _ in 0..cfg.epochs {
            for w in walks {
                for_each_pair(&w.nodes, cfg.omega, cfg.shrink_window, &mut rng, |c, o, rng| {
                    worker.train_pair(z, c, o, cfg.negatives, &noise, lr_at(done), rng);
                    done += 1;
                });
            }
        }
        return Ok(());
    }

    let shared = SharedRows::from_matrix(z);
    let progress = AtomicUsize::new(0);
    let chunk = walks.len().div_ceil(cfg.threads);
    for epoch in 0..cfg.epochs {
        walks.par_chunks(chunk).enumerate().for_each(|(part, slice)| {
            let mut rng: StreamRng = stream_rng(sgd_seed, (epoch * cfg.threads + part) as u64);
            let mut worker = Worker::new(cfg.dim);
            let mut store = &shared;
            for w in slice {
                for_each_pair(&w.nodes, cfg.omega, cfg.shrink_window, &mut rng, |c, o, rng| {
                    let done = progress.fetch_add(1, Ordering::Relaxed) as u64;
                    worker.train_pair(&mut store, c, o, cfg.negatives, &noise, lr_at(done), rng);
                });
            }
        });
    }
    shared.copy_into(z);
    Ok(())
}

/// Incremental updates from small walk sets as edges arrive.
///
/// Uses a fixed step size. The noise table tracks cumulative occurrence
/// counts and is rebuilt every [`NOISE_REFRESH_INTERVAL`] pair updates.
#[derive(Debug)]
pub struct OnlineTrainer {
    cfg: TrainConfig,
    lr: f64,
    counts: Vec<u64>,
    noise: Option<NoiseTable>,
    since_refresh: u64,
    rng: StreamRng,
    worker: Worker,
}

impl std::fmt::Debug for Worker {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Worker").field("dim", &self.center.len()).finish()
    }
}

impl OnlineTrainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let rng = stream_rng(derive_seed(cfg.seed, SGD_TAG), u64::MAX);
        Ok(OnlineTrainer {
            lr: cfg.resolved_online_lr(),
            worker: Worker::new(cfg.dim),
            cfg,
            counts: Vec::new(),
            noise: None,
            since_refresh: 0,
            rng,
        })
    }

    /// Adds walk occurrences to the noise counts without training on them.
    pub fn observe(&mut self, walks: &[TemporalWalk]) {
        for w in walks {
            for &v in &w.nodes {
                let v = v as usize;
                if v >= self.counts.len() {
                    self.counts.resize(v + 1, 0);
                }
                self.counts[v] += 1;
            }
        }
        self.noise = NoiseTable::from_counts(&self.counts);
        self.since_refresh = 0;
    }

    /// Grows `z` to cover `labels`, then applies the pair updates of `walks`.
    /// Walks that are too short or reference unknown nodes are skipped.
    pub fn update(&mut self, z: &mut EmbeddingMatrix, labels: &[String], walks: &[TemporalWalk]) {
        z.grow(labels, &mut self.rng);
        if walks.is_empty() {
            return;
        }
        for w in walks {
            for &v in &w.nodes {
                let v = v as usize;
                if v >= self.counts.len() {
                    self.counts.resize(v + 1, 0);
                }
                self.counts[v] += 1;
            }
        }
        if self.noise.is_none() {
            self.noise = NoiseTable::from_counts(&self.counts);
        }
        let Some(noise) = self.noise.as_ref() else { return };
        let n = z.n_nodes();
        let mut updates = 0u64;
        for w in walks {
            if w.len() < 2 || w.nodes.iter().any(|&v| v as usize >= n) {
                continue;
            }
            let (lr, k, worker) = (self.lr, self.cfg.negatives, &mut self.worker);
            for_each_pair(&w.nodes, self.cfg.omega, self.cfg.shrink_window, &mut self.rng, |c, o, rng| {
                worker.train_pair(z, c, o, k, noise, lr, rng);
                updates += 1;
            });
        }
        self.since_refresh += updates;
        if self.since_refresh >= NOISE_REFRESH_INTERVAL {
            self.noise = NoiseTable::from_counts(&self.counts);
            self.since_refresh = 0;
        }
    }
}

/// Writes `N D` then `label v1 .. vD` per node. Values use the shortest
/// decimal that parses back to the same f64.
pub fn save_embeddings(z: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_embeddings(z, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_embeddings(z: &EmbeddingMatrix, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{} {}", z.n_nodes(), z.dim)?;
    for (i, label) in z.labels.iter().enumerate() {
        out.write_all(label.as_bytes())?;
        for x in z.vector(i as u32) {
            write!(out, " {x}")?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_embeddings(reader: impl BufRead, path: &Path) -> Result<EmbeddingMatrix> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::parse(path, 1, "missing header")),
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (n, dim) = match fields[..] {
        [n, d] => match (n.parse::<usize>(), d.parse::<usize>()) {
            (Ok(n), Ok(d)) if d > 0 => (n, d),
            _ => return Err(Error::parse(path, 1, format!("malformed header {header:?}"))),
        },
        _ => return Err(Error::parse(path, 1, format!("malformed header {header:?}"))),
    };
    let mut labels = Vec::with_capacity(n);
    let mut input = Vec::with_capacity(n * dim);
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let label = parts.next().expect("non-empty line");
        let before = input.len();
        for value in parts {
            let x: f64 = value
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("row {label}: invalid value {value:?}")))?;
            input.push(x);
        }
        let got = input.len() - before;
        if got != dim {
            return Err(Error::parse(
                path,
                lineno,
                format!("row {label} has {got} values, header says {dim}"),
            ));
        }
        labels.push(label.to_owned());
    }
    if labels.len() != n {
        return Err(Error::parse(
            path,
            1,
            format!("header says {n} rows, found {}", labels.len()),
        ));
    }
    EmbeddingMatrix::from_rows(labels, dim, input)
}

/// Reads the embedding text format; `.gz` files are decompressed.
/// Context vectors are not stored and come back as zeros.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader: Box<dyn Read> = if path.extension().is_some_and(|ext| ext == "gz") {
        Box::new(MultiGzDecoder::new(file))
    } else {
        Box::new(file)
    };
    read_embeddings(BufReader::new(reader), path)
}
