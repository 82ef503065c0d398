//! Continuous-time dynamic network store.
//!
//! Edges are kept in one globally time-sorted array and, per node, in a
//! time-sorted adjacency list so that the temporal neighborhood of a node at
//! time `t` is a contiguous suffix found by binary search.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::MultiGzDecoder;

use crate::error::{Error, Result};

/// Dense node index in `0..n_nodes`.
pub type NodeId = u32;

/// Edge time in source units (seconds unless configured otherwise).
pub type Timestamp = i64;

const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TemporalEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub time: Timestamp,
}

impl TemporalEdge {
    pub fn new(src: NodeId, dst: NodeId, time: Timestamp) -> Self {
        TemporalEdge { src, dst, time }
    }
}

/// One adjacency entry: the node on the other side of an edge and the edge time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Neighbor {
    pub node: NodeId,
    pub time: Timestamp,
}

/// Bidirectional map between external labels and dense ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocab {
    labels: Vec<String>,
    index: HashMap<String, NodeId>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id of `label`, assigning the next free id if unseen.
    pub fn intern(&mut self, label: &str) -> NodeId {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = self.labels.len() as NodeId;
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), id);
        id
    }

    pub fn id(&self, label: &str) -> Option<NodeId> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: NodeId) -> Option<&str> {
        self.labels.get(id as usize).map(String::as_str)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadOptions {
    pub directed: bool,
    /// Number of timestamp units per second, e.g. `1000` for millisecond data.
    /// Only affects reported time spans; stored timestamps stay exact.
    pub unit_scale: Option<f64>,
}


#[derive(Clone, Debug, PartialEq)]
pub struct GraphStats {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub mean_degree: f64,
    pub max_degree: usize,
    pub timespan_days: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemporalGraph {
    vocab: Vocab,
    edges: Vec<TemporalEdge>,
    out_adj: Vec<Vec<Neighbor>>,
    // Only populated for directed graphs; undirected graphs read `out_adj`.
    in_adj: Vec<Vec<Neighbor>>,
    directed: bool,
    units_per_second: f64,
}

/// Index of the first entry whose time is strictly greater than `t`.
fn first_after<T>(items: &[T], t: Timestamp, time: impl Fn(&T) -> Timestamp) -> usize {
    items.partition_point(|x| time(x) <= t)
}

fn insert_sorted(list: &mut Vec<Neighbor>, n: Neighbor) {
    match list.last() {
        Some(last) if last.time > n.time => {
            let at = first_after(list, n.time, |x| x.time);
            list.insert(at, n);
        }
        _ => list.push(n),
    }
}

impl TemporalGraph {
    pub fn new(directed: bool) -> Self {
        TemporalGraph {
            vocab: Vocab::new(),
            edges: Vec::new(),
            out_adj: Vec::new(),
            in_adj: Vec::new(),
            directed,
            units_per_second: 1.0,
        }
    }

    /// Bulk construction from labeled edges.
    ///
    /// The result does not depend on the order of `edges`: records are sorted
    /// by `(time, src label, dst label)` and ids are handed out in order of
    /// first appearance in that sorted stream.
    pub fn from_labeled_edges<S: AsRef<str>>(
        edges: impl IntoIterator<Item = (S, S, Timestamp)>,
        directed: bool,
    ) -> Self {
        let mut records: Vec<(S, S, Timestamp)> = edges.into_iter().collect();
        records.sort_by(|a, b| {
            a.2.cmp(&b.2)
                .then_with(|| a.0.as_ref().cmp(b.0.as_ref()))
                .then_with(|| a.1.as_ref().cmp(b.1.as_ref()))
        });
        let mut g = TemporalGraph::new(directed);
        g.edges.reserve(records.len());
        for (src, dst, time) in &records {
            let src = g.vocab.intern(src.as_ref());
            let dst = g.vocab.intern(dst.as_ref());
            g.grow_adjacency();
            g.edges.push(TemporalEdge { src, dst, time: *time });
            g.link(TemporalEdge { src, dst, time: *time });
        }
        g
    }

    /// A graph over the same node set holding only `edges`.
    pub fn with_edges(&self, edges: impl IntoIterator<Item = TemporalEdge>) -> Self {
        let mut edges: Vec<TemporalEdge> = edges.into_iter().collect();
        edges.sort_by_key(|e| e.time);
        let n = self.n_nodes();
        let mut g = TemporalGraph {
            vocab: self.vocab.clone(),
            edges: Vec::with_capacity(edges.len()),
            out_adj: vec![Vec::new(); n],
            in_adj: if self.directed { vec![Vec::new(); n] } else { Vec::new() },
            directed: self.directed,
            units_per_second: self.units_per_second,
        };
        for e in edges {
            assert!((e.src as usize) < n && (e.dst as usize) < n, "edge outside node set");
            g.edges.push(e);
            g.link(e);
        }
        g
    }

    pub fn with_time_unit(mut self, units_per_second: f64) -> Self {
        self.units_per_second = units_per_second;
        self
    }

    fn grow_adjacency(&mut self) {
        let n = self.vocab.len();
        if self.out_adj.len() < n {
            self.out_adj.resize_with(n, Vec::new);
            if self.directed {
                self.in_adj.resize_with(n, Vec::new);
            }
        }
    }

    fn link(&mut self, e: TemporalEdge) {
        let (s, d) = (e.src as usize, e.dst as usize);
        insert_sorted(&mut self.out_adj[s], Neighbor { node: e.dst, time: e.time });
        if self.directed {
            insert_sorted(&mut self.in_adj[d], Neighbor { node: e.src, time: e.time });
        } else if s != d {
            insert_sorted(&mut self.out_adj[d], Neighbor { node: e.src, time: e.time });
        }
    }

    /// Streaming insert by label. Unseen labels extend the node set.
    pub fn add_edge(&mut self, src: &str, dst: &str, time: Timestamp) -> TemporalEdge {
        let src = self.vocab.intern(src);
        let dst = self.vocab.intern(dst);
        self.grow_adjacency();
        let e = TemporalEdge { src, dst, time };
        self.insert_edge(e);
        e
    }

    fn insert_edge(&mut self, e: TemporalEdge) {
        match self.edges.last() {
            Some(last) if last.time > e.time => {
                let at = first_after(&self.edges, e.time, |x| x.time);
                self.edges.insert(at, e);
            }
            _ => self.edges.push(e),
        }
        self.link(e);
    }

    pub fn n_nodes(&self) -> usize {
        self.vocab.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn edges(&self) -> &[TemporalEdge] {
        &self.edges
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn labels(&self) -> &[String] {
        self.vocab.labels()
    }

    pub fn label(&self, id: NodeId) -> &str {
        self.vocab.label(id).expect("node id in range")
    }

    pub fn units_per_second(&self) -> f64 {
        self.units_per_second
    }

    pub fn t_min(&self) -> Option<Timestamp> {
        self.edges.first().map(|e| e.time)
    }

    pub fn t_max(&self) -> Option<Timestamp> {
        self.edges.last().map(|e| e.time)
    }

    fn check_node(&self, v: NodeId) -> Result<()> {
        if (v as usize) < self.n_nodes() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                node: v,
                n_nodes: self.n_nodes(),
            })
        }
    }

    /// Full time-sorted adjacency of `v` (out-neighbors when directed).
    pub fn neighbors(&self, v: NodeId) -> Result<&[Neighbor]> {
        self.check_node(v)?;
        Ok(&self.out_adj[v as usize])
    }

    /// Time-sorted in-adjacency of `v`; equals [`neighbors`](Self::neighbors) when undirected.
    pub fn in_neighbors(&self, v: NodeId) -> Result<&[Neighbor]> {
        self.check_node(v)?;
        if self.directed {
            Ok(&self.in_adj[v as usize])
        } else {
            Ok(&self.out_adj[v as usize])
        }
    }

    /// Temporal neighborhood: every `(w, t')` with an edge `(v, w, t')` and `t' > t`,
    /// ascending by time, duplicates kept.
    pub fn temporal_neighbors(&self, v: NodeId, t: Timestamp) -> Result<&[Neighbor]> {
        let adj = self.neighbors(v)?;
        Ok(&adj[first_after(adj, t, |n| n.time)..])
    }

    /// Mirror of [`temporal_neighbors`](Self::temporal_neighbors) for walking
    /// backward: every `(w, t')` with an edge `(w, v, t')` and `t' < t`.
    pub fn temporal_predecessors(&self, v: NodeId, t: Timestamp) -> Result<&[Neighbor]> {
        let adj = self.in_neighbors(v)?;
        Ok(&adj[..adj.partition_point(|n| n.time < t)])
    }

    /// Whether `e` is stored. Undirected graphs match either orientation.
    pub fn contains_edge(&self, e: &TemporalEdge) -> bool {
        let lo = self.edges.partition_point(|x| x.time < e.time);
        let hi = first_after(&self.edges, e.time, |x| x.time);
        self.edges[lo..hi].iter().any(|x| {
            (x.src == e.src && x.dst == e.dst)
                || (!self.directed && x.src == e.dst && x.dst == e.src)
        })
    }

    pub fn stats(&self) -> Result<GraphStats> {
        let (t_min, t_max) = match (self.t_min(), self.t_max()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::NoEdges),
        };
        let total: usize = self.out_adj.iter().map(Vec::len).sum();
        let max_degree = self.out_adj.iter().map(Vec::len).max().unwrap_or(0);
        Ok(GraphStats {
            n_nodes: self.n_nodes(),
            n_edges: self.n_edges(),
            mean_degree: total as f64 / self.n_nodes() as f64,
            max_degree,
            timespan_days: (t_max - t_min) as f64 / self.units_per_second / SECONDS_PER_DAY,
        })
    }
}

fn parse_timestamp(field: &str) -> Option<Timestamp> {
    if let Ok(t) = field.parse::<Timestamp>() {
        return Some(t);
    }
    // Some exports write integral times as floats ("1.0", "1e9").
    let f = field.parse::<f64>().ok()?;
    if f.is_finite() && f.fract() == 0.0 && f.abs() < 9.2e18 {
        Some(f as Timestamp)
    } else {
        None
    }
}

/// Parses edge-list text: `src dst time` or `src dst weight time` per line,
/// separated by whitespace or commas. Lines starting with `%` or `#` are skipped.
pub fn parse_edge_list(
    reader: impl BufRead,
    path: &Path,
    opts: &LoadOptions,
) -> Result<TemporalGraph> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        let time_field = match fields.len() {
            0..=2 => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected at least 3 fields, found {}", fields.len()),
                ))
            }
            3 => fields[2],
            _ => fields[3],
        };
        let time = parse_timestamp(time_field).ok_or_else(|| {
            Error::parse(path, lineno, format!("invalid timestamp {time_field:?}"))
        })?;
        if time < 0 {
            return Err(Error::parse(path, lineno, format!("negative timestamp {time}")));
        }
        records.push((fields[0].to_owned(), fields[1].to_owned(), time));
    }
    if records.is_empty() {
        return Err(Error::NoEdges);
    }
    let g = TemporalGraph::from_labeled_edges(records, opts.directed);
    Ok(match opts.unit_scale {
        Some(scale) => g.with_time_unit(scale),
        None => g,
    })
}

/// Loads an edge list from disk, transparently decompressing `.gz` files.
pub fn load_edge_list(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<TemporalGraph> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader: Box<dyn Read> = if path.extension().is_some_and(|ext| ext == "gz") {
        Box::new(MultiGzDecoder::new(file))
    } else {
        Box::new(file)
    };
    parse_edge_list(BufReader::new(reader), path, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1: &str = "1 2 1\n2 3 2\n3 4 3\n4 1 4\n3 4 5\n5 3 7\n2 5 8\n6 3 10\n";

    fn parse(text: &str, directed: bool) -> Result<TemporalGraph> {
        let opts = LoadOptions {
            directed,
            ..LoadOptions::default()
        };
        parse_edge_list(text.as_bytes(), Path::new("mem"), &opts)
    }

    fn id(g: &TemporalGraph, label: &str) -> NodeId {
        g.vocab().id(label).unwrap()
    }

    fn nb(g: &TemporalGraph, label: &str, time: Timestamp) -> Neighbor {
        Neighbor { node: id(g, label), time }
    }

    #[test]
    fn loads_edge_stream() {
        let g = parse(FIG1, false).unwrap();
        assert_eq!(g.n_nodes(), 6);
        assert_eq!(g.n_edges(), 8);
        assert_eq!(g.t_min(), Some(1));
        assert_eq!(g.t_max(), Some(10));
    }

    #[test]
    fn weight_column_is_ignored() {
        let g = parse("a,b,0.5,3\n% comment\n# another\n\nb c 1 2\n", true).unwrap();
        assert_eq!(g.n_edges(), 2);
        assert_eq!(g.edges()[0].time, 2);
        assert_eq!(g.edges()[1].time, 3);
    }

    #[test]
    fn self_loop_is_stored_once() {
        for directed in [false, true] {
            let g = parse("7 7 0\n", directed).unwrap();
            assert_eq!(g.n_nodes(), 1);
            assert_eq!(g.n_edges(), 1);
            assert_eq!(g.neighbors(0).unwrap(), &[Neighbor { node: 0, time: 0 }]);
        }
    }

    #[test]
    fn load_errors() {
        match parse("1 2 3\n1 2\n", false) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("% only comments\n", false), Err(Error::NoEdges)));
        assert!(matches!(parse("1 2 -4\n", false), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("1 2 x\n", false), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn shuffled_input_gives_identical_store() {
        let sorted = parse(FIG1, false).unwrap();
        let mut lines: Vec<&str> = FIG1.lines().collect();
        lines.reverse();
        lines.swap(1, 5);
        let shuffled = parse(&lines.join("\n"), false).unwrap();
        assert_eq!(sorted, shuffled);
    }

    #[test]
    fn add_edge_completes_graph() {
        let full = parse(FIG1, false).unwrap();
        let without = FIG1.lines().take(7).collect::<Vec<_>>().join("\n");
        let mut g = parse(&without, false).unwrap();
        g.add_edge("6", "3", 10);
        assert_eq!(g, full);
    }

    #[test]
    fn add_edge_new_labels_and_out_of_order() {
        let mut g = parse(FIG1, false).unwrap();
        g.add_edge("1", "99", 11);
        assert_eq!(g.n_nodes(), 7);
        g.add_edge("100", "101", 12);
        assert_eq!(g.n_nodes(), 9);
        g.add_edge("1", "3", 6);
        assert!(g.edges().windows(2).all(|w| w[0].time <= w[1].time));
        for v in 0..g.n_nodes() as NodeId {
            assert!(g.neighbors(v).unwrap().windows(2).all(|w| w[0].time <= w[1].time));
        }
        assert_eq!(g.edges()[5].time, 6);
    }

    #[test]
    fn temporal_neighborhood_of_v2_at_6() {
        // v2 with incident edges at times 1, 4, 6, 7, 8, 9, 10.
        let text = "2 6 1\n2 8 4\n1 2 6\n2 4 7\n2 3 8\n2 5 9\n2 3 10\n";
        let g = parse(text, false).unwrap();
        let got = g.temporal_neighbors(id(&g, "2"), 6).unwrap();
        let want = [nb(&g, "4", 7), nb(&g, "3", 8), nb(&g, "5", 9), nb(&g, "3", 10)];
        assert_eq!(got, want);
    }

    #[test]
    fn temporal_neighbors_matches_filter() {
        let g = parse(FIG1, false).unwrap();
        let v3 = id(&g, "3");
        let got = g.temporal_neighbors(v3, 2).unwrap();
        let want = [nb(&g, "4", 3), nb(&g, "4", 5), nb(&g, "5", 7), nb(&g, "6", 10)];
        assert_eq!(got, want);
        for v in 0..g.n_nodes() as NodeId {
            assert!(g.temporal_neighbors(v, 10).unwrap().is_empty());
        }
        assert!(matches!(
            g.temporal_neighbors(6, 0),
            Err(Error::NodeOutOfRange { node: 6, n_nodes: 6 })
        ));
    }

    #[test]
    fn predecessors_are_strictly_earlier() {
        let g = parse(FIG1, false).unwrap();
        let v2 = id(&g, "2");
        let got = g.temporal_predecessors(v2, 8).unwrap();
        assert_eq!(got, [nb(&g, "1", 1), nb(&g, "3", 2)]);

        let d = parse(FIG1, true).unwrap();
        let v3 = id(&d, "3");
        assert_eq!(d.temporal_predecessors(v3, 10).unwrap(), [nb(&d, "2", 2), nb(&d, "5", 7)]);
        assert_eq!(d.temporal_neighbors(v3, 0).unwrap(), [nb(&d, "4", 3), nb(&d, "4", 5)]);
    }

    #[test]
    fn contains_edge_checks_orientation() {
        let g = parse(FIG1, false).unwrap();
        let d = parse(FIG1, true).unwrap();
        let e = TemporalEdge::new(id(&g, "5"), id(&g, "2"), 8);
        assert!(g.contains_edge(&e));
        assert!(!d.contains_edge(&e));
        assert!(!g.contains_edge(&TemporalEdge::new(e.src, e.dst, 9)));
    }

    #[test]
    fn stats_match_hand_count() {
        let g = parse(FIG1, false).unwrap();
        let s = g.stats().unwrap();
        assert_eq!(s.n_edges, 8);
        assert!((s.mean_degree - 16.0 / 6.0).abs() < 1e-12);
        // v3 touches the edges at t = 2, 3, 5, 7, 10.
        assert_eq!(s.max_degree, 5);
        assert_eq!(g.neighbors(id(&g, "3")).unwrap().len(), 5);

        let single = parse("u v 0\n", false).unwrap().stats().unwrap();
        assert_eq!(single.mean_degree, 1.0);
        assert_eq!(single.max_degree, 1);
        assert_eq!(single.timespan_days, 0.0);

        assert!(matches!(TemporalGraph::new(false).stats(), Err(Error::NoEdges)));
    }

    #[test]
    fn timespan_honors_unit_scale() {
        let opts = LoadOptions {
            directed: false,
            unit_scale: Some(1000.0),
        };
        let g = parse_edge_list("a b 0\nb c 172800000\n".as_bytes(), Path::new("mem"), &opts)
            .unwrap();
        assert_eq!(g.stats().unwrap().timespan_days, 2.0);
    }

    #[test]
    fn gzip_is_decompressed() {
        use flate2::write::GzEncoder;
        use flate2::Compression;
        use std::io::Write;

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fig1.edges.gz");
        let mut enc = GzEncoder::new(File::create(&path).unwrap(), Compression::default());
        enc.write_all(FIG1.as_bytes()).unwrap();
        enc.finish().unwrap();
        let g = load_edge_list(&path, &LoadOptions::default()).unwrap();
        assert_eq!(g, parse(FIG1, false).unwrap());
    }
}
