//! Initial-edge and temporal-neighbor distributions.
//!
//! Initial edges are drawn from a cumulative table by binary search. Neighbor
//! weights depend on the current time so they are recomputed per step from
//! the time gaps between the current node and each candidate.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Neighbor, TemporalEdge, TemporalGraph, Timestamp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BiasKind {
    Uniform,
    Linear,
    Exponential,
}

impl BiasKind {
    pub const ALL: [BiasKind; 3] = [BiasKind::Uniform, BiasKind::Linear, BiasKind::Exponential];

    pub fn short_name(self) -> &'static str {
        match self {
            BiasKind::Uniform => "unif",
            BiasKind::Linear => "lin",
            BiasKind::Exponential => "exp",
        }
    }
}

impl fmt::Display for BiasKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for BiasKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unif" | "uniform" => Ok(BiasKind::Uniform),
            "lin" | "linear" => Ok(BiasKind::Linear),
            "exp" | "exponential" => Ok(BiasKind::Exponential),
            other => Err(Error::InvalidConfig(format!("unknown distribution {other:?}"))),
        }
    }
}

/// Which end of the time axis a biased neighbor distribution prefers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Favor {
    /// Smallest time gap gets the most mass.
    Early,
    /// Largest time gap gets the most mass.
    Late,
}

impl fmt::Display for Favor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Favor::Early => "early",
            Favor::Late => "late",
        })
    }
}

impl FromStr for Favor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "early" => Ok(Favor::Early),
            "late" => Ok(Favor::Late),
            other => Err(Error::InvalidConfig(format!("unknown favor {other:?}"))),
        }
    }
}

/// Knobs shared by the biased distributions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiasConfig {
    /// Multiplier applied to time differences inside exponentials.
    /// `None` means `1 / (t_max - t_min)` of the graph being walked.
    pub exp_scale: Option<f64>,
    pub linear_favor: Favor,
    pub exp_favor: Favor,
}

impl Default for BiasConfig {
    fn default() -> Self {
        BiasConfig {
            exp_scale: None,
            linear_favor: Favor::Early,
            exp_favor: Favor::Late,
        }
    }
}

impl BiasConfig {
    /// The exponent scale for `g`; zero when the graph spans a single instant.
    pub fn resolve_scale(&self, g: &TemporalGraph) -> f64 {
        let span = match (g.t_min(), g.t_max()) {
            (Some(lo), Some(hi)) => (hi - lo) as f64,
            _ => 0.0,
        };
        match self.exp_scale {
            Some(s) => s,
            None if span > 0.0 => 1.0 / span,
            None => 0.0,
        }
    }
}

/// Cumulative distribution over the time-sorted edge array.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeCdf {
    cumulative: Vec<f64>,
    kind: BiasKind,
}

impl EdgeCdf {
    /// Builds the initial-edge distribution of `kind` over `g.edges()`.
    ///
    /// `exp_scale` overrides the default `1 / (t_max - t_min)` factor; the
    /// exponential weights are computed as `exp((T(e) - t_min) * s - c_max)`
    /// so the largest exponent is zero.
    pub fn build(g: &TemporalGraph, kind: BiasKind, exp_scale: Option<f64>) -> Result<Self> {
        let edges = g.edges();
        let m = edges.len();
        if m == 0 {
            return Err(Error::NoEdges);
        }
        let weights: Vec<f64> = match kind {
            BiasKind::Uniform => vec![1.0; m],
            BiasKind::Linear => (1..=m).map(|rank| rank as f64).collect(),
            BiasKind::Exponential => {
                let t_min = edges[0].time;
                let span = (edges[m - 1].time - t_min) as f64;
                let scale = match exp_scale {
                    Some(s) => s,
                    None if span > 0.0 => 1.0 / span,
                    None => 0.0,
                };
                let c_max = span * scale;
                edges
                    .iter()
                    .map(|e| ((e.time - t_min) as f64 * scale - c_max).exp())
                    .collect()
            }
        };
        Self::from_weights(&weights, kind)
    }

    /// Normalizes arbitrary non-negative weights into a cumulative table.
    pub fn from_weights(weights: &[f64], kind: BiasKind) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::NoEdges);
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidConfig("weights must be finite and non-negative".into()));
        }
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in weights {
            acc += w;
            cumulative.push(acc);
        }
        if acc <= 0.0 {
            return Err(Error::InvalidConfig("weights sum to zero".into()));
        }
        for c in &mut cumulative {
            *c /= acc;
        }
        // Pin the top so draws in [0, 1) always land inside the table.
        let last = cumulative.len() - 1;
        cumulative[last] = 1.0;
        Ok(EdgeCdf { cumulative, kind })
    }

    pub fn kind(&self) -> BiasKind {
        self.kind
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.cumulative
            .iter()
            .map(|&c| {
                let p = c - prev;
                prev = c;
                p
            })
            .collect()
    }

    /// Index drawn in `O(log M)`.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative.partition_point(|&c| c <= u)
    }

    pub fn sample<R: Rng + ?Sized>(&self, g: &TemporalGraph, rng: &mut R) -> TemporalEdge {
        g.edges()[self.sample_index(rng)]
    }
}

/// Neighbor-selection distribution resolved against one graph's time scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeighborBias {
    pub kind: BiasKind,
    pub exp_scale: f64,
    pub linear_favor: Favor,
    pub exp_favor: Favor,
}

impl NeighborBias {
    pub fn new(kind: BiasKind, cfg: &BiasConfig, g: &TemporalGraph) -> Self {
        NeighborBias {
            kind,
            exp_scale: cfg.resolve_scale(g),
            linear_favor: cfg.linear_favor,
            exp_favor: cfg.exp_favor,
        }
    }

    pub fn uniform() -> Self {
        NeighborBias {
            kind: BiasKind::Uniform,
            exp_scale: 0.0,
            linear_favor: Favor::Early,
            exp_favor: Favor::Late,
        }
    }

    /// Fills `out` with normalized weights for candidates at the given
    /// non-negative time gaps. Gaps must be listed in ascending order; ranks
    /// for the linear kind follow list position.
    pub fn fill_weights(&self, gaps: impl ExactSizeIterator<Item = i64>, out: &mut Vec<f64>) {
        out.clear();
        let k = gaps.len();
        match self.kind {
            BiasKind::Uniform => out.extend(std::iter::repeat_n(1.0 / k as f64, k)),
            BiasKind::Linear => {
                let total = (k * (k + 1) / 2) as f64;
                out.extend((0..k).map(|i| {
                    let rank = match self.linear_favor {
                        Favor::Early => k - i,
                        Favor::Late => i + 1,
                    };
                    rank as f64 / total
                }));
            }
            BiasKind::Exponential => {
                let sign = match self.exp_favor {
                    Favor::Late => 1.0,
                    Favor::Early => -1.0,
                };
                out.extend(gaps.map(|gap| sign * gap as f64 * self.exp_scale));
                let shift = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for x in out.iter_mut() {
                    *x = (*x - shift).exp();
                    total += *x;
                }
                for x in out.iter_mut() {
                    *x /= total;
                }
            }
        }
    }

    /// Draws an index among `k` candidates. Uniform skips the weight table.
    pub fn choose<R: Rng + ?Sized>(
        &self,
        gaps: impl ExactSizeIterator<Item = i64>,
        rng: &mut R,
        scratch: &mut Vec<f64>,
    ) -> usize {
        let k = gaps.len();
        debug_assert!(k > 0);
        if self.kind == BiasKind::Uniform {
            return rng.random_range(0..k);
        }
        self.fill_weights(gaps, scratch);
        scan_pick(scratch, rng)
    }
}

/// Linear CDF scan over weights summing to one.
fn scan_pick<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Probabilities for moving from the current node at time `t` to each entry
/// of its temporal neighborhood.
pub fn neighbor_weights(neighbors: &[Neighbor], t: Timestamp, bias: &NeighborBias) -> Result<Vec<f64>> {
    if neighbors.is_empty() {
        return Err(Error::EmptyNeighborhood);
    }
    let mut out = Vec::with_capacity(neighbors.len());
    bias.fill_weights(neighbors.iter().map(|n| n.time - t), &mut out);
    Ok(out)
}

/// Draws one neighbor. Uniform ignores `weights` and picks an index directly.
pub fn sample_neighbor<R: Rng + ?Sized>(
    weights: &[f64],
    neighbors: &[Neighbor],
    kind: BiasKind,
    rng: &mut R,
) -> Neighbor {
    let idx = match kind {
        BiasKind::Uniform => rng.random_range(0..neighbors.len()),
        _ => scan_pick(weights, rng),
    };
    neighbors[idx]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn chain(times: &[Timestamp]) -> TemporalGraph {
        let edges: Vec<(String, String, Timestamp)> = times
            .iter()
            .enumerate()
            .map(|(i, &t)| (format!("n{i}"), format!("n{}", i + 1), t))
            .collect();
        TemporalGraph::from_labeled_edges(edges, false)
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn parse_kinds() {
        assert_eq!("unif".parse::<BiasKind>().unwrap(), BiasKind::Uniform);
        assert_eq!("Exponential".parse::<BiasKind>().unwrap(), BiasKind::Exponential);
        assert!("gauss".parse::<BiasKind>().is_err());
        assert_eq!("late".parse::<Favor>().unwrap(), Favor::Late);
    }

    #[test]
    fn initial_edge_formulas() {
        let g = chain(&[1, 2, 3]);
        let lin = EdgeCdf::build(&g, BiasKind::Linear, None).unwrap();
        assert!(close(&lin.probabilities(), &[1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0], 1e-12));

        let e = std::f64::consts::E;
        let z = 1.0 + e + e * e;
        let exp = EdgeCdf::build(&g, BiasKind::Exponential, Some(1.0)).unwrap();
        assert!(close(&exp.probabilities(), &[1.0 / z, e / z, e * e / z], 1e-12));

        let unif = EdgeCdf::build(&chain(&[1, 2, 3, 4, 5, 7, 8, 10]), BiasKind::Uniform, None).unwrap();
        assert!(unif.probabilities().iter().all(|p| (p - 0.125).abs() < 1e-12));
    }

    #[test]
    fn linear_ties_still_get_distinct_ranks() {
        let g = chain(&[5, 5, 5]);
        let lin = EdgeCdf::build(&g, BiasKind::Linear, None).unwrap();
        assert!(close(&lin.probabilities(), &[1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0], 1e-12));
    }

    #[test]
    fn exponential_single_instant_is_uniform() {
        let g = chain(&[9, 9, 9, 9]);
        let cdf = EdgeCdf::build(&g, BiasKind::Exponential, None).unwrap();
        assert!(cdf.probabilities().iter().all(|p| (p - 0.25).abs() < 1e-12));
    }

    #[test]
    fn exponential_survives_huge_ranges() {
        let g = chain(&[0, 1 << 40, 1 << 62]);
        for scale in [None, Some(1.0), Some(1e-30)] {
            let cdf = EdgeCdf::build(&g, BiasKind::Exponential, scale).unwrap();
            let p = cdf.probabilities();
            assert!(p.iter().all(|x| x.is_finite() && *x >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p[2] > 0.0);
        }
    }

    #[test]
    fn degenerate_cdf_always_hits_the_weighted_edge() {
        let cdf = EdgeCdf::from_weights(&[0.0, 0.0, 1.0, 0.0], BiasKind::Uniform).unwrap();
        let mut rng = stream_rng(1, 0);
        assert!((0..1000).all(|_| cdf.sample_index(&mut rng) == 2));
        assert!(EdgeCdf::from_weights(&[], BiasKind::Uniform).is_err());
        assert!(EdgeCdf::from_weights(&[0.0], BiasKind::Uniform).is_err());
        assert!(EdgeCdf::build(&TemporalGraph::new(false), BiasKind::Uniform, None).is_err());
    }

    fn neighbors_at(times: &[Timestamp]) -> Vec<Neighbor> {
        times
            .iter()
            .enumerate()
            .map(|(i, &time)| Neighbor { node: i as u32, time })
            .collect()
    }

    #[test]
    fn neighbor_formulas() {
        let nbrs = neighbors_at(&[7, 8, 9, 10]);
        let lin = NeighborBias {
            kind: BiasKind::Linear,
            ..NeighborBias::uniform()
        };
        assert!(close(&neighbor_weights(&nbrs, 6, &lin).unwrap(), &[0.4, 0.3, 0.2, 0.1], 1e-12));
        let late = NeighborBias {
            linear_favor: Favor::Late,
            ..lin
        };
        assert!(close(&neighbor_weights(&nbrs, 6, &late).unwrap(), &[0.1, 0.2, 0.3, 0.4], 1e-12));

        let unif = NeighborBias::uniform();
        assert!(close(&neighbor_weights(&nbrs, 6, &unif).unwrap(), &[0.25; 4], 1e-12));

        let exp = NeighborBias {
            kind: BiasKind::Exponential,
            exp_scale: 1.0,
            ..NeighborBias::uniform()
        };
        let raw: Vec<f64> = [1.0f64, 2.0, 3.0, 4.0].iter().map(|g| g.exp()).collect();
        let z: f64 = raw.iter().sum();
        let want: Vec<f64> = raw.iter().map(|x| x / z).collect();
        assert!(close(&neighbor_weights(&nbrs, 6, &exp).unwrap(), &want, 1e-12));
        let early = NeighborBias {
            exp_favor: Favor::Early,
            ..exp
        };
        let rev: Vec<f64> = want.iter().rev().copied().collect();
        assert!(close(&neighbor_weights(&nbrs, 6, &early).unwrap(), &rev, 1e-12));

        for bias in [unif, lin, exp] {
            assert_eq!(neighbor_weights(&nbrs[..1], 6, &bias).unwrap(), vec![1.0]);
        }
        assert!(matches!(neighbor_weights(&[], 6, &lin), Err(Error::EmptyNeighborhood)));
    }

    #[test]
    fn sample_neighbor_respects_point_mass() {
        let nbrs = neighbors_at(&[7, 8, 9, 10]);
        let mut rng = stream_rng(3, 0);
        for _ in 0..1000 {
            let n = sample_neighbor(&[0.0, 0.0, 1.0, 0.0], &nbrs, BiasKind::Linear, &mut rng);
            assert_eq!(n.time, 9);
        }
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let g = chain(&[1, 2, 3, 4, 5]);
        let cdf = EdgeCdf::build(&g, BiasKind::Exponential, None).unwrap();
        let draw = |seed| {
            let mut rng = stream_rng(seed, 0);
            (0..100).map(|_| cdf.sample_index(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(11), draw(11));
    }
}
