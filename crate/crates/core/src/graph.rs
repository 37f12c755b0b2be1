//! Symmetric directed graphs, all-pairs shortest paths and budget reachability.
//!
//! Vertices are stored 0-based; vertex `0` is the depot. Every surface that
//! leaves the process (instance files, plan files, CLI output, error
//! messages) renders vertices 1-based so the depot reads as `1`.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Vertex index (0-based internally).
pub type Vertex = usize;

/// The depot every route starts and ends at.
pub const DEPOT: Vertex = 0;

/// Tolerance used when matching path lengths against the distance matrix.
const PATH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: Vertex,
    pub to: Vertex,
    pub length: f64,
}

/// A directed graph that is expected to be symmetric (see [`Graph::validate`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_vertices: usize,
    edges: Vec<Edge>,
    out: Vec<Vec<usize>>,
    index: HashMap<(Vertex, Vertex), usize>,
    positions: Option<Vec<[f64; 2]>>,
}

/// First invariant a graph breaks.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    VertexOutOfRange { from: Vertex, to: Vertex },
    SelfLoop { vertex: Vertex },
    NonPositiveLength { from: Vertex, to: Vertex, length: f64 },
    DuplicateEdge { from: Vertex, to: Vertex },
    MissingReverse { from: Vertex, to: Vertex },
    AsymmetricLength { from: Vertex, to: Vertex },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::VertexOutOfRange { from, to } => {
                write!(f, "edge ({},{}) references a vertex out of range", from + 1, to + 1)
            }
            Violation::SelfLoop { vertex } => write!(f, "self-loop at vertex {}", vertex + 1),
            Violation::NonPositiveLength { from, to, length } => {
                write!(f, "non-positive length {length} on edge ({},{})", from + 1, to + 1)
            }
            Violation::DuplicateEdge { from, to } => {
                write!(f, "duplicate edge ({},{})", from + 1, to + 1)
            }
            // Reported as the edge that is absent.
            Violation::MissingReverse { from, to } => {
                write!(f, "missing reverse edge ({},{})", to + 1, from + 1)
            }
            Violation::AsymmetricLength { from, to } => {
                write!(f, "asymmetric length between ({},{}) and its reverse", from + 1, to + 1)
            }
        }
    }
}

impl Graph {
    /// Builds a graph from directed edges exactly as given. No invariant is
    /// enforced here; call [`Graph::validate`] before planning on it.
    pub fn new(num_vertices: usize, mut edges: Vec<Edge>) -> Self {
        edges.sort_by(|a, b| (a.from, a.to).cmp(&(b.from, b.to)));
        let mut out = vec![Vec::new(); num_vertices];
        let mut index = HashMap::with_capacity(edges.len());
        for (k, e) in edges.iter().enumerate() {
            if e.from < num_vertices {
                out[e.from].push(k);
            }
            index.entry((e.from, e.to)).or_insert(k);
        }
        Graph { num_vertices, edges, out, index, positions: None }
    }

    /// Builds a symmetric graph from undirected `(i, j, length)` triples; each
    /// pair contributes both directions with the identical length.
    pub fn from_undirected(num_vertices: usize, pairs: &[(Vertex, Vertex, f64)]) -> Self {
        let edges = pairs
            .iter()
            .flat_map(|&(i, j, length)| {
                [Edge { from: i, to: j, length }, Edge { from: j, to: i, length }]
            })
            .collect();
        Graph::new(num_vertices, edges)
    }

    pub fn with_positions(mut self, positions: Vec<[f64; 2]>) -> Self {
        assert_eq!(positions.len(), self.num_vertices, "one position per vertex");
        self.positions = Some(positions);
        self
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, k: usize) -> &Edge {
        &self.edges[k]
    }

    pub fn positions(&self) -> Option<&[[f64; 2]]> {
        self.positions.as_deref()
    }

    /// Indices (into [`Graph::edges`]) of the edges leaving `v`, ordered by head.
    pub fn out_edges(&self, v: Vertex) -> &[usize] {
        &self.out[v]
    }

    pub fn edge_index(&self, from: Vertex, to: Vertex) -> Option<usize> {
        self.index.get(&(from, to)).copied()
    }

    pub fn length(&self, from: Vertex, to: Vertex) -> Option<f64> {
        self.edge_index(from, to).map(|k| self.edges[k].length)
    }

    /// Shortest edge length, `None` for an edgeless graph.
    pub fn min_edge_length(&self) -> Option<f64> {
        self.edges.iter().map(|e| e.length).min_by(f64::total_cmp)
    }

    /// Undirected view: each unordered pair once, `i < j`.
    pub fn undirected_edges(&self) -> Vec<(Vertex, Vertex, f64)> {
        self.edges
            .iter()
            .filter(|e| e.from < e.to)
            .map(|e| (e.from, e.to, e.length))
            .collect()
    }

    /// Checks the symmetric-directed invariants and reports the first one broken.
    pub fn validate(&self) -> Result<(), Violation> {
        let n = self.num_vertices;
        let mut seen = HashMap::with_capacity(self.edges.len());
        for e in &self.edges {
            if e.from >= n || e.to >= n {
                return Err(Violation::VertexOutOfRange { from: e.from, to: e.to });
            }
            if e.from == e.to {
                return Err(Violation::SelfLoop { vertex: e.from });
            }
            if !(e.length > 0.0) || !e.length.is_finite() {
                return Err(Violation::NonPositiveLength { from: e.from, to: e.to, length: e.length });
            }
            if seen.insert((e.from, e.to), e.length).is_some() {
                return Err(Violation::DuplicateEdge { from: e.from, to: e.to });
            }
        }
        for e in &self.edges {
            match seen.get(&(e.to, e.from)) {
                None => return Err(Violation::MissingReverse { from: e.from, to: e.to }),
                Some(&l) if l.to_bits() != e.length.to_bits() => {
                    return Err(Violation::AsymmetricLength { from: e.from, to: e.to })
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

/// All-pairs shortest distances with `f64::INFINITY` for unreachable pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    dist: Vec<f64>,
    // pred[s * n + t]: predecessor of t on the chosen shortest s -> t path.
    pred: Vec<Option<Vertex>>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: Vertex, j: Vertex) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn round_trip(&self, v: Vertex) -> f64 {
        self.get(DEPOT, v) + self.get(v, DEPOT)
    }

    /// Vertex sequence of the shortest path `from -> to`, both ends included.
    /// Among equal-length paths the lowest-index predecessor is taken at
    /// every step back from `to`.
    pub fn path(&self, from: Vertex, to: Vertex) -> Option<Vec<Vertex>> {
        if !self.get(from, to).is_finite() {
            return None;
        }
        let mut rev = vec![to];
        let mut cur = to;
        while cur != from {
            cur = self.pred[from * self.n + cur]?;
            rev.push(cur);
        }
        rev.reverse();
        Some(rev)
    }
}

/// Floyd-Warshall over the directed edge set.
pub fn all_pairs_shortest(graph: &Graph) -> DistanceMatrix {
    let n = graph.num_vertices();
    let mut dist = vec![f64::INFINITY; n * n];
    for i in 0..n {
        dist[i * n + i] = 0.0;
    }
    for e in graph.edges() {
        let slot = &mut dist[e.from * n + e.to];
        if e.length < *slot {
            *slot = e.length;
        }
    }
    for k in 0..n {
        for i in 0..n {
            let dik = dist[i * n + k];
            if !dik.is_finite() {
                continue;
            }
            for j in 0..n {
                let cand = dik + dist[k * n + j];
                if cand < dist[i * n + j] {
                    dist[i * n + j] = cand;
                }
            }
        }
    }

    let mut pred = vec![None; n * n];
    for s in 0..n {
        for e in graph.edges() {
            let (u, t) = (e.from, e.to);
            if t == s {
                continue;
            }
            let target = dist[s * n + t];
            let via = dist[s * n + u] + e.length;
            if !via.is_finite() || (via - target).abs() > PATH_TOL * target.max(1.0) {
                continue;
            }
            let slot = &mut pred[s * n + t];
            if slot.is_none_or(|p| u < p) {
                *slot = Some(u);
            }
        }
    }
    DistanceMatrix { n, dist, pred }
}

/// Vertices whose depot round trip fits in `l_max`, ascending; always has the depot.
pub fn reachable_round_trip(dist: &DistanceMatrix, l_max: f64) -> Vec<Vertex> {
    (0..dist.len())
        .filter(|&v| v == DEPOT || dist.round_trip(v) <= l_max)
        .collect()
}
