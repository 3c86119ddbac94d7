//! MST and PMFG backbones of a correlation network.
//!
//! Edges carry the correlation as `weight` and `1 - weight` as `distance`.
//! Candidates are visited by descending correlation, ties broken by
//! `(min node, max node)`.

mod planarity;

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::CorrMatrix;

pub use planarity::is_planar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
    pub distance: f64,
}

impl Edge {
    pub fn new(a: usize, b: usize, weight: f64) -> Edge {
        Edge {
            i: a.min(b),
            j: a.max(b),
            weight,
            distance: 1.0 - weight,
        }
    }

    pub fn key(&self) -> (usize, usize) {
        (self.i, self.j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterMethod {
    Mst,
    Pmfg,
}

impl std::str::FromStr for FilterMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mst" => Ok(FilterMethod::Mst),
            "pmfg" => Ok(FilterMethod::Pmfg),
            other => Err(Error::Config(format!("unknown filter method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
    pub method: FilterMethod,
}

/// All `i < j` pairs of a complete-or-partial matrix, distance `1 - C_ij`.
/// Missing pairs are omitted.
pub fn adjacency_from_correlation(corr: &CorrMatrix) -> Vec<Edge> {
    let n = corr.n();
    let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            if let Some(c) = corr.get(i, j) {
                edges.push(Edge::new(i, j, c));
            }
        }
    }
    edges
}

fn candidate_order(a: &Edge, b: &Edge) -> Ordering {
    b.weight
        .total_cmp(&a.weight)
        .then(a.i.cmp(&b.i))
        .then(a.j.cmp(&b.j))
}

fn sorted_candidates(edges: &[Edge], n: usize) -> Result<Vec<Edge>> {
    let mut seen = std::collections::HashSet::with_capacity(edges.len());
    for e in edges {
        if e.i >= n || e.j >= n {
            return Err(Error::Integrity(format!(
                "edge ({}, {}) out of range",
                e.i, e.j
            )));
        }
        if e.i == e.j {
            return Err(Error::Integrity(format!("self-loop at {}", e.i)));
        }
        if e.weight.is_nan() {
            return Err(Error::Integrity(format!(
                "NaN weight on ({}, {})",
                e.i, e.j
            )));
        }
        if !seen.insert(e.key()) {
            return Err(Error::Integrity(format!(
                "duplicate edge ({}, {})",
                e.i, e.j
            )));
        }
    }
    let mut sorted: Vec<Edge> = edges
        .iter()
        .map(|e| Edge::new(e.i, e.j, e.weight))
        .collect();
    sorted.sort_by(candidate_order);
    Ok(sorted)
}

/// Disjoint-set forest with path halving.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        true
    }
}

/// Number of connected components of the graph on `n` nodes.
pub fn component_count(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> usize {
    let mut uf = UnionFind::new(n);
    let mut count = n;
    for (a, b) in edges {
        if uf.union(a, b) {
            count -= 1;
        }
    }
    count
}

fn default_nodes(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

/// Kruskal spanning tree maximizing total correlation.
pub fn mst(edges: &[Edge], n: usize) -> Result<FilteredGraph> {
    let candidates = sorted_candidates(edges, n)?;
    let mut uf = UnionFind::new(n);
    let mut kept = Vec::with_capacity(n.saturating_sub(1));
    for e in candidates {
        if uf.union(e.i, e.j) {
            kept.push(e);
            if kept.len() + 1 == n {
                break;
            }
        }
    }
    if n > 0 && kept.len() + 1 != n {
        return Err(Error::Disconnected {
            components: n - kept.len(),
        });
    }
    Ok(FilteredGraph {
        nodes: default_nodes(n),
        edges: kept,
        method: FilterMethod::Mst,
    })
}

/// Planar maximally filtered graph: greedy insertion by descending
/// correlation, keeping an edge iff the kept set stays planar. Stops at
/// `3n - 6` edges or when candidates run out.
pub fn pmfg(edges: &[Edge], n: usize) -> Result<FilteredGraph> {
    if n < 3 {
        return Err(Error::Domain(format!(
            "PMFG needs at least 3 nodes, got {n}"
        )));
    }
    let candidates = sorted_candidates(edges, n)?;
    let components = component_count(n, candidates.iter().map(Edge::key));
    if components > 1 {
        return Err(Error::Disconnected { components });
    }
    let target = 3 * n - 6;
    let mut kept: Vec<Edge> = Vec::with_capacity(target);
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(target);
    for e in candidates {
        if kept.len() == target {
            break;
        }
        pairs.push(e.key());
        if is_planar(n, &pairs) {
            kept.push(e);
        } else {
            pairs.pop();
        }
    }
    Ok(FilteredGraph {
        nodes: default_nodes(n),
        edges: kept,
        method: FilterMethod::Pmfg,
    })
}

impl FilteredGraph {
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn with_nodes(mut self, nodes: Vec<String>) -> Result<Self> {
        if nodes.len() != self.nodes.len() {
            return Err(Error::Integrity(format!(
                "{} node names for a graph on {} nodes",
                nodes.len(),
                self.nodes.len()
            )));
        }
        self.nodes = nodes;
        Ok(self)
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    pub fn is_connected(&self) -> bool {
        component_count(self.n(), self.edges.iter().map(Edge::key)) <= 1
    }

    /// Undirected DOT with `weight` and `distance` edge attributes.
    pub fn to_dot(&self, name: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "graph \"{}\" {{", escape(name));
        let _ = writeln!(s, "  graph [method=\"{:?}\"];", self.method);
        for node in &self.nodes {
            let _ = writeln!(s, "  \"{}\";", escape(node));
        }
        for e in &self.edges {
            let _ = writeln!(
                s,
                "  \"{}\" -- \"{}\" [weight={}, distance={}];",
                escape(&self.nodes[e.i]),
                escape(&self.nodes[e.j]),
                e.weight,
                e.distance
            );
        }
        s.push_str("}\n");
        s
    }
}

pub(crate) fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;
    use rand::Rng;

    fn k(n: usize, mut w: impl FnMut(usize, usize) -> f64) -> Vec<Edge> {
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| Edge::new(i, j, w(i, j)))
            .collect()
    }

    #[test]
    fn adjacency_distances() {
        let corr = CorrMatrix::from_values(
            vec!["a".into(), "b".into(), "c".into()],
            crate::spectral::CorrKind::Raw,
            vec![1.0, 1.0, -1.0, 1.0, 1.0, 0.5, -1.0, 0.5, 1.0],
            vec![0; 9],
        )
        .unwrap();
        let e = adjacency_from_correlation(&corr);
        assert_eq!(e.len(), 3);
        assert_eq!(e[0].distance, 0.0);
        assert_eq!(e[1].distance, 2.0);
    }

    #[test]
    fn mst_of_triangle() {
        // A=0, B=1, C=2: AB=0.9, BC=0.8, AC=0.5
        let edges = vec![
            Edge::new(0, 1, 0.9),
            Edge::new(1, 2, 0.8),
            Edge::new(0, 2, 0.5),
        ];
        let g = mst(&edges, 3).unwrap();
        let keys: Vec<_> = g.edges.iter().map(Edge::key).collect();
        assert_eq!(keys, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn mst_equal_weights_is_a_tree() {
        let g = mst(&k(6, |_, _| 0.3), 6).unwrap();
        assert_eq!(g.edges.len(), 5);
        assert!(g.is_connected());
    }

    #[test]
    fn mst_disconnected_errors() {
        let err = mst(&[Edge::new(0, 1, 0.5), Edge::new(2, 3, 0.5)], 4).unwrap_err();
        assert!(matches!(err, Error::Disconnected { components: 2 }));
    }

    #[test]
    fn duplicate_and_loop_rejected() {
        assert!(mst(&[Edge::new(0, 1, 0.5), Edge::new(1, 0, 0.4)], 2).is_err());
        let lp = Edge {
            i: 1,
            j: 1,
            weight: 0.2,
            distance: 0.8,
        };
        assert!(mst(&[lp], 2).is_err());
    }

    #[test]
    fn pmfg_keeps_all_of_k4() {
        let g = pmfg(&k(4, |i, j| 0.1 * (i + 2 * j) as f64), 4).unwrap();
        assert_eq!(g.edges.len(), 6);
    }

    #[test]
    fn pmfg_of_k5_drops_weakest() {
        let edges = k(5, |i, j| 1.0 - 0.01 * (i * 5 + j) as f64);
        let weakest = edges
            .iter()
            .min_by(|a, b| a.weight.total_cmp(&b.weight))
            .unwrap()
            .key();
        let g = pmfg(&edges, 5).unwrap();
        assert_eq!(g.edges.len(), 9);
        assert!(g.edges.iter().all(|e| e.key() != weakest));
    }

    #[test]
    fn pmfg_size_and_planarity_on_random_graphs() {
        let mut rng = seeds::rng(99);
        for n in [8, 12, 20, 30] {
            let edges = k(n, |_, _| rng.random_range(-0.5..1.0));
            let g = pmfg(&edges, n).unwrap();
            assert_eq!(g.edges.len(), 3 * n - 6);
            let pairs: Vec<_> = g.edges.iter().map(Edge::key).collect();
            assert!(is_planar(n, &pairs));
            assert!(g.is_connected());
        }
    }

    #[test]
    fn dot_is_deterministic() {
        let g = mst(&[Edge::new(0, 1, 0.25)], 2)
            .unwrap()
            .with_nodes(vec!["A".into(), "B\"x".into()])
            .unwrap();
        let dot = g.to_dot("mst");
        assert!(dot.contains("\"A\" -- \"B\\\"x\" [weight=0.25, distance=0.75];"));
        assert_eq!(dot, g.to_dot("mst"));
    }
}
