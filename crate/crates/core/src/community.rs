//! Two-level map-equation community detection on a filtered graph.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netfilter::FilteredGraph;
use crate::seeds::{self, Stream};

pub const DEFAULT_TELEPORT: f64 = 0.15;
pub const DEFAULT_ATTEMPTS: usize = 10;
const PAGERANK_TOL: f64 = 1e-12;
const PAGERANK_MAX_ITER: usize = 10_000;
const MOVE_TOL: f64 = 1e-12;

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

/// Non-negative symmetric adjacency of a graph, negative weights clipped.
fn walk_adjacency(graph: &FilteredGraph) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); graph.n()];
    let mut clipped = 0;
    for e in &graph.edges {
        let w = if e.weight < 0.0 {
            clipped += 1;
            0.0
        } else {
            e.weight
        };
        if w > 0.0 {
            adj[e.i].push((e.j, w));
            adj[e.j].push((e.i, w));
        }
    }
    if clipped > 0 {
        log::warn!("clipped {clipped} negative edge weights to 0 for the random walk");
    }
    adj
}

fn pagerank(adj: &[Vec<(usize, f64)>], teleport: f64) -> Result<Vec<f64>> {
    let n = adj.len();
    let strength: Vec<f64> = adj.iter().map(|a| a.iter().map(|(_, w)| w).sum()).collect();
    let uniform = 1.0 / n as f64;
    let mut p = vec![uniform; n];
    let mut next = vec![0.0; n];
    for _ in 0..PAGERANK_MAX_ITER {
        let dangling: f64 = (0..n).filter(|&a| strength[a] == 0.0).map(|a| p[a]).sum();
        let base = teleport * uniform + (1.0 - teleport) * dangling * uniform;
        next.iter_mut().for_each(|v| *v = base);
        for a in 0..n {
            if strength[a] > 0.0 {
                let share = (1.0 - teleport) * p[a] / strength[a];
                for &(b, w) in &adj[a] {
                    next[b] += share * w;
                }
            }
        }
        let z: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= z);
        let diff: f64 = p.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut p, &mut next);
        if diff <= PAGERANK_TOL {
            return Ok(p);
        }
    }
    Err(Error::Numeric(format!(
        "stationary distribution did not converge in {PAGERANK_MAX_ITER} iterations"
    )))
}

/// Visit rates of the walk that follows edges proportionally to weight and
/// teleports uniformly with probability `teleport`.
pub fn stationary_distribution(graph: &FilteredGraph, teleport: f64) -> Result<Vec<f64>> {
    check_walk(graph, teleport)?;
    pagerank(&walk_adjacency(graph), teleport)
}

fn check_walk(graph: &FilteredGraph, teleport: f64) -> Result<()> {
    if graph.n() == 0 {
        return Err(Error::EmptyPanel("graph has no nodes".into()));
    }
    if !(teleport > 0.0 && teleport < 1.0) {
        return Err(Error::Domain(format!(
            "teleport must lie in (0, 1), got {teleport}"
        )));
    }
    Ok(())
}

/// Node visit rates and directed link flows `p_a w_ab / s_a`; teleportation
/// steps are not coded.
#[derive(Debug, Clone)]
struct FlowGraph {
    node_flow: Vec<f64>,
    /// Per node: `(neighbour, flow out to it, flow in from it)`.
    links: Vec<Vec<(usize, f64, f64)>>,
    node_entropy_term: f64,
}

impl FlowGraph {
    fn new(graph: &FilteredGraph, teleport: f64) -> Result<Self> {
        let adj = walk_adjacency(graph);
        let p = pagerank(&adj, teleport)?;
        let strength: Vec<f64> = adj.iter().map(|a| a.iter().map(|(_, w)| w).sum()).collect();
        let links = (0..adj.len())
            .map(|a| {
                adj[a]
                    .iter()
                    .map(|&(b, w)| (b, p[a] * w / strength[a], p[b] * w / strength[b]))
                    .collect()
            })
            .collect();
        let node_entropy_term = p.iter().map(|&v| plogp(v)).sum();
        Ok(FlowGraph {
            node_flow: p,
            links,
            node_entropy_term,
        })
    }

    fn n(&self) -> usize {
        self.node_flow.len()
    }

    fn codelength(&self, assignment: &[usize]) -> f64 {
        let k = assignment.iter().max().map_or(0, |m| m + 1);
        let mut modules = vec![Module::default(); k];
        for a in 0..self.n() {
            let m = &mut modules[assignment[a]];
            m.flow += self.node_flow[a];
            for &(b, out, inn) in &self.links[a] {
                if assignment[b] != assignment[a] {
                    m.exit += out;
                    m.enter += inn;
                }
            }
        }
        Totals::from_modules(&modules).codelength(self.node_entropy_term)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Module {
    flow: f64,
    exit: f64,
    enter: f64,
}

impl Module {
    /// This module's contribution to the three module-dependent sums.
    fn terms(&self) -> (f64, f64, f64) {
        (
            self.enter,
            plogp(self.enter) + plogp(self.exit),
            plogp(self.exit + self.flow),
        )
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Totals {
    enter: f64,
    enter_exit: f64,
    exit_flow: f64,
}

impl Totals {
    fn from_modules(modules: &[Module]) -> Self {
        let mut t = Totals::default();
        for m in modules {
            t.add(m, 1.0);
        }
        t
    }

    fn add(&mut self, m: &Module, sign: f64) {
        let (e, ee, ef) = m.terms();
        self.enter += sign * e;
        self.enter_exit += sign * ee;
        self.exit_flow += sign * ef;
    }

    fn codelength(&self, node_entropy_term: f64) -> f64 {
        plogp(self.enter) - self.enter_exit + self.exit_flow - node_entropy_term
    }
}

/// Two-level map equation `L(M)` in bits for a node → module assignment.
///
/// Module ids need not be contiguous; modules are the distinct ids used.
pub fn map_equation(graph: &FilteredGraph, assignment: &[usize], teleport: f64) -> Result<f64> {
    check_walk(graph, teleport)?;
    if assignment.len() != graph.n() {
        return Err(Error::Integrity(format!(
            "assignment covers {} nodes, graph has {}",
            assignment.len(),
            graph.n()
        )));
    }
    let flows = FlowGraph::new(graph, teleport)?;
    Ok(flows.codelength(&contiguous(assignment)))
}

/// Relabels ids contiguously in order of each module's smallest node.
fn contiguous(assignment: &[usize]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    assignment
        .iter()
        .map(|&m| {
            let next = map.len();
            *map.entry(m).or_insert(next)
        })
        .collect()
}

/// A node → community assignment with its map-equation codelength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub nodes: Vec<String>,
    pub assignment: Vec<usize>,
    pub communities: Vec<Vec<usize>>,
    pub codelength: f64,
}

impl Partition {
    fn from_assignment(nodes: Vec<String>, assignment: &[usize], codelength: f64) -> Self {
        let assignment = contiguous(assignment);
        let k = assignment.iter().max().map_or(0, |m| m + 1);
        let mut communities = vec![Vec::new(); k];
        for (a, &m) in assignment.iter().enumerate() {
            communities[m].push(a);
        }
        Partition {
            nodes,
            assignment,
            communities,
            codelength,
        }
    }

    /// Builds a partition of `graph` from any assignment and scores it.
    pub fn evaluate(graph: &FilteredGraph, assignment: &[usize], teleport: f64) -> Result<Self> {
        let codelength = map_equation(graph, assignment, teleport)?;
        Ok(Self::from_assignment(
            graph.nodes.clone(),
            assignment,
            codelength,
        ))
    }

    pub fn n_communities(&self) -> usize {
        self.communities.len()
    }

    /// Most frequent label among a community's members; ties go to the
    /// lexicographically smallest label.
    pub fn dominant_label(
        &self,
        community: usize,
        labels: &BTreeMap<String, String>,
    ) -> Option<String> {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for &a in &self.communities[community] {
            if let Some(l) = labels.get(&self.nodes[a]) {
                *counts.entry(l).or_default() += 1;
            }
        }
        let best = counts.values().copied().max()?;
        counts
            .into_iter()
            .find(|&(_, c)| c == best)
            .map(|(l, _)| l.to_string())
    }

    /// `ticker,community_id[,label]`, one row per node in node order.
    pub fn write_csv<W: std::io::Write>(
        &self,
        writer: W,
        labels: Option<&BTreeMap<String, String>>,
    ) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        match labels {
            Some(_) => w.write_record(["ticker", "community_id", "label"])?,
            None => w.write_record(["ticker", "community_id"])?,
        }
        for (node, &m) in self.nodes.iter().zip(&self.assignment) {
            let id = m.to_string();
            match labels {
                Some(l) => {
                    let label = l.get(node).map(String::as_str).unwrap_or("");
                    w.write_record([node.as_str(), &id, label])?
                }
                None => w.write_record([node.as_str(), &id])?,
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub teleport: f64,
    pub attempts: usize,
    pub seed: u64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            teleport: DEFAULT_TELEPORT,
            attempts: DEFAULT_ATTEMPTS,
            seed: 0,
        }
    }
}

/// A partition with the codelength after every accepted move of the
/// attempt that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub partition: Partition,
    pub trace: Vec<f64>,
}

/// Aggregated level of the optimizer: super-nodes with summed flows.
struct Level {
    flow: Vec<f64>,
    links: Vec<Vec<(usize, f64, f64)>>,
}

impl Level {
    fn n(&self) -> usize {
        self.flow.len()
    }

    fn aggregate(&self, assignment: &[usize], k: usize) -> Level {
        let mut flow = vec![0.0; k];
        let mut merged: Vec<BTreeMap<usize, (f64, f64)>> = vec![BTreeMap::new(); k];
        for a in 0..self.n() {
            let ma = assignment[a];
            flow[ma] += self.flow[a];
            for &(b, out, inn) in &self.links[a] {
                let mb = assignment[b];
                if ma != mb {
                    let e = merged[ma].entry(mb).or_insert((0.0, 0.0));
                    e.0 += out;
                    e.1 += inn;
                }
            }
        }
        let links = merged
            .into_iter()
            .map(|m| m.into_iter().map(|(b, (o, i))| (b, o, i)).collect())
            .collect();
        Level { flow, links }
    }
}

/// One seeded Louvain-style run: node moves, then aggregation, until a
/// pass moves nothing.
fn optimize(flows: &FlowGraph, seed: u64) -> (Vec<usize>, Vec<f64>) {
    let mut rng = seeds::rng(seed);
    let mut level = Level {
        flow: flows.node_flow.clone(),
        links: flows.links.clone(),
    };
    let mut membership: Vec<usize> = (0..flows.n()).collect();
    let mut trace = vec![flows.codelength(&membership)];
    loop {
        let n = level.n();
        let mut assign: Vec<usize> = (0..n).collect();
        let mut modules: Vec<Module> = (0..n)
            .map(|a| Module {
                flow: level.flow[a],
                exit: level.links[a].iter().map(|l| l.1).sum(),
                enter: level.links[a].iter().map(|l| l.2).sum(),
            })
            .collect();
        let mut totals = Totals::from_modules(&modules);
        let mut current = *trace.last().unwrap();
        let mut moved_any = false;
        let mut order: Vec<usize> = (0..n).collect();
        loop {
            order.shuffle(&mut rng);
            let mut moved = false;
            for &a in &order {
                let out_a: f64 = level.links[a].iter().map(|l| l.1).sum();
                let in_a: f64 = level.links[a].iter().map(|l| l.2).sum();
                let mut to_module: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
                for &(b, out, inn) in &level.links[a] {
                    let e = to_module.entry(assign[b]).or_insert((0.0, 0.0));
                    e.0 += out;
                    e.1 += inn;
                }
                let old = assign[a];
                let (out_old, in_old) = to_module.get(&old).copied().unwrap_or((0.0, 0.0));
                let old_after = Module {
                    flow: modules[old].flow - level.flow[a],
                    exit: modules[old].exit - (out_a - out_old) + in_old,
                    enter: modules[old].enter - (in_a - in_old) + out_old,
                };
                let mut base = totals;
                base.add(&modules[old], -1.0);
                base.add(&old_after, 1.0);
                let mut best: Option<(f64, usize, Module, Totals)> = None;
                for (&m, &(out_m, in_m)) in &to_module {
                    if m == old {
                        continue;
                    }
                    let new_after = Module {
                        flow: modules[m].flow + level.flow[a],
                        exit: modules[m].exit + (out_a - out_m) - in_m,
                        enter: modules[m].enter + (in_a - in_m) - out_m,
                    };
                    let mut t = base;
                    t.add(&modules[m], -1.0);
                    t.add(&new_after, 1.0);
                    let delta = t.codelength(flows.node_entropy_term) - current;
                    if best.as_ref().is_none_or(|b| delta < b.0) {
                        best = Some((delta, m, new_after, t));
                    }
                }
                if let Some((delta, m, new_after, t)) = best {
                    if delta < -MOVE_TOL {
                        modules[old] = old_after;
                        modules[m] = new_after;
                        assign[a] = m;
                        totals = t;
                        current += delta;
                        trace.push(current);
                        moved = true;
                    }
                }
            }
            if !moved {
                break;
            }
            moved_any = true;
        }
        if !moved_any {
            break;
        }
        let assign = contiguous(&assign);
        let k = assign.iter().max().map_or(0, |m| m + 1);
        for m in membership.iter_mut() {
            *m = assign[*m];
        }
        if k == 1 {
            break;
        }
        level = level.aggregate(&assign, k);
        // recomputed from scratch so rounding does not accumulate across levels
        trace.push(flows.codelength(&membership));
    }
    (membership, trace)
}

/// Minimizes the map equation over `attempts` seeded runs and keeps the
/// shortest codelength, also considering the one-community and singleton
/// partitions.
pub fn detect_communities_traced(
    graph: &FilteredGraph,
    config: &DetectConfig,
) -> Result<Detection> {
    check_walk(graph, config.teleport)?;
    if !graph.is_connected() {
        let parts =
            crate::netfilter::component_count(graph.n(), graph.edges.iter().map(|e| e.key()));
        return Err(Error::Disconnected { components: parts });
    }
    if config.attempts == 0 {
        return Err(Error::Domain("at least one attempt is required".into()));
    }
    let flows = FlowGraph::new(graph, config.teleport)?;
    let n = graph.n();
    let run = |k: usize| {
        let (assign, trace) = optimize(
            &flows,
            seeds::sub_seed(config.seed, Stream::Community, k as u64),
        );
        let l = flows.codelength(&assign);
        (assign, trace, l)
    };
    #[cfg(feature = "parallel")]
    let runs: Vec<_> = {
        use rayon::prelude::*;
        (0..config.attempts).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<_> = (0..config.attempts).map(run).collect();

    let mut best: Option<(Vec<usize>, Vec<f64>, f64)> = None;
    let trivial = [vec![0; n], (0..n).collect::<Vec<_>>()];
    let candidates = runs.into_iter().chain(trivial.into_iter().map(|a| {
        let l = flows.codelength(&a);
        (a, vec![l], l)
    }));
    for cand in candidates {
        if best.as_ref().is_none_or(|b| cand.2 < b.2 - MOVE_TOL) {
            best = Some(cand);
        }
    }
    let (assign, trace, length) = best.unwrap();
    Ok(Detection {
        partition: Partition::from_assignment(graph.nodes.clone(), &assign, length),
        trace,
    })
}

pub fn detect_communities(graph: &FilteredGraph, seed: u64, teleport: f64) -> Result<Partition> {
    let config = DetectConfig {
        teleport,
        seed,
        ..Default::default()
    };
    Ok(detect_communities_traced(graph, &config)?.partition)
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Integrity("labelings differ in length".into()));
    }
    let n = a.len();
    let pairs = |c: usize| (c * c.saturating_sub(1) / 2) as f64;
    let mut table: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut ra: BTreeMap<usize, usize> = BTreeMap::new();
    let mut rb: BTreeMap<usize, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *ra.entry(x).or_default() += 1;
        *rb.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| pairs(c)).sum();
    let sa: f64 = ra.values().map(|&c| pairs(c)).sum();
    let sb: f64 = rb.values().map(|&c| pairs(c)).sum();
    let total = pairs(n);
    let expected = if total > 0.0 { sa * sb / total } else { 0.0 };
    let max = (sa + sb) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netfilter::{Edge, FilterMethod};

    fn graph(n: usize, edges: &[(usize, usize, f64)]) -> FilteredGraph {
        FilteredGraph {
            nodes: (0..n).map(|k| format!("N{k}")).collect(),
            edges: edges.iter().map(|&(a, b, w)| Edge::new(a, b, w)).collect(),
            method: FilterMethod::Pmfg,
        }
    }

    fn two_cliques(k: usize, inner: f64, bridge: f64) -> FilteredGraph {
        let mut e = Vec::new();
        for off in [0, k] {
            for a in 0..k {
                for b in a + 1..k {
                    e.push((off + a, off + b, inner));
                }
            }
        }
        e.push((k - 1, k, bridge));
        graph(2 * k, &e)
    }

    /// Every set partition of `0..n` as restricted growth strings.
    fn all_partitions(n: usize) -> Vec<Vec<usize>> {
        fn rec(cur: &mut Vec<usize>, max: usize, n: usize, out: &mut Vec<Vec<usize>>) {
            if cur.len() == n {
                out.push(cur.clone());
                return;
            }
            for m in 0..=max + 1 {
                cur.push(m);
                rec(cur, max.max(m), n, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(&mut vec![0], 0, n, &mut out);
        out
    }

    fn exhaustive_best(g: &FilteredGraph) -> (Vec<usize>, f64) {
        all_partitions(g.n())
            .into_iter()
            .map(|a| {
                let l = map_equation(g, &a, DEFAULT_TELEPORT).unwrap();
                (a, l)
            })
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap()
    }

    #[test]
    fn stationary_examples() {
        let cycle = graph(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 1.0)]);
        let p = stationary_distribution(&cycle, 0.15).unwrap();
        assert!(p.iter().all(|v| (v - 0.25).abs() < 1e-12));
        let single = graph(2, &[(0, 1, 0.3)]);
        let p = stationary_distribution(&single, 0.15).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn weighted_star_matches_linear_solve() {
        let w = [0.9, 0.4, 0.2];
        let g = graph(4, &[(0, 1, w[0]), (0, 2, w[1]), (0, 3, w[2])]);
        let tau = 0.15;
        let p = stationary_distribution(&g, tau).unwrap();
        // (I - (1 - tau) P^T) p = tau / n, solved with nalgebra
        let mut adj = nalgebra::DMatrix::<f64>::zeros(4, 4);
        for (k, &wk) in w.iter().enumerate() {
            adj[(0, k + 1)] = wk;
            adj[(k + 1, 0)] = wk;
        }
        let mut m = nalgebra::DMatrix::<f64>::identity(4, 4);
        for a in 0..4 {
            let s: f64 = adj.row(a).sum();
            for b in 0..4 {
                m[(b, a)] -= (1.0 - tau) * adj[(a, b)] / s;
            }
        }
        let rhs = nalgebra::DVector::from_element(4, tau / 4.0);
        let exact = m.lu().solve(&rhs).unwrap();
        for a in 0..4 {
            assert!((p[a] - exact[a]).abs() < 1e-12);
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_module_codelength_is_visit_entropy() {
        let g = two_cliques(3, 1.0, 0.1);
        let p = stationary_distribution(&g, DEFAULT_TELEPORT).unwrap();
        let h: f64 = -p.iter().map(|&v| v * v.log2()).sum::<f64>();
        let l = map_equation(&g, &[0; 6], DEFAULT_TELEPORT).unwrap();
        assert!((l - h).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_oracle_two_cliques() {
        for k in [3, 4] {
            let g = two_cliques(k, 1.0, 0.1);
            let (best, best_l) = exhaustive_best(&g);
            let want: Vec<usize> = (0..2 * k).map(|a| a / k).collect();
            assert_eq!(best, want);
            let one = map_equation(&g, &vec![0; 2 * k], DEFAULT_TELEPORT).unwrap();
            let single: Vec<usize> = (0..2 * k).collect();
            let single = map_equation(&g, &single, DEFAULT_TELEPORT).unwrap();
            assert!(best_l < one && best_l < single);
            let det = detect_communities_traced(&g, &DetectConfig::default()).unwrap();
            assert_eq!(det.partition.assignment, want);
            assert!((det.partition.codelength - best_l).abs() < 1e-9);
            assert!(det.trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }

    #[test]
    fn complete_graph_is_one_community() {
        for n in [4, 6, 8] {
            let mut e = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    e.push((a, b, 0.5));
                }
            }
            let g = graph(n, &e);
            if n <= 6 {
                assert_eq!(exhaustive_best(&g).0, vec![0; n]);
            }
            let p = detect_communities(&g, 3, DEFAULT_TELEPORT).unwrap();
            assert_eq!(p.n_communities(), 1);
        }
    }

    #[test]
    fn disconnected_is_rejected() {
        let g = graph(4, &[(0, 1, 1.0), (2, 3, 1.0)]);
        assert!(matches!(
            detect_communities(&g, 0, DEFAULT_TELEPORT),
            Err(Error::Disconnected { components: 2 })
        ));
    }

    #[test]
    fn rescaling_and_determinism() {
        let g = two_cliques(4, 0.8, 0.2);
        let mut scaled = g.clone();
        for e in &mut scaled.edges {
            e.weight *= 0.25;
        }
        let a = detect_communities(&g, 5, DEFAULT_TELEPORT).unwrap();
        let b = detect_communities(&scaled, 5, DEFAULT_TELEPORT).unwrap();
        assert_eq!(a.assignment, b.assignment);
        assert!((a.codelength - b.codelength).abs() < 1e-9);
        assert_eq!(a, detect_communities(&g, 5, DEFAULT_TELEPORT).unwrap());
    }

    #[test]
    fn codelength_matches_map_equation() {
        let g = two_cliques(4, 1.0, 0.3);
        let p = detect_communities(&g, 1, DEFAULT_TELEPORT).unwrap();
        let l = map_equation(&g, &p.assignment, DEFAULT_TELEPORT).unwrap();
        assert!((p.codelength - l).abs() < 1e-9);
    }

    #[test]
    fn negative_weights_are_clipped() {
        let g = graph(3, &[(0, 1, 1.0), (1, 2, -0.5)]);
        let p = stationary_distribution(&g, 0.15).unwrap();
        // node 2 is dangling: p2 = (tau + (1 - tau) p2) / 3
        let want = 0.15 / 3.0 / (1.0 - 0.85 / 3.0);
        assert!((p[2] - want).abs() < 1e-12);
    }

    #[test]
    fn ari_examples() {
        assert_eq!(
            adjusted_rand_index(&[0, 0, 1, 1], &[5, 5, 2, 2]).unwrap(),
            1.0
        );
        let r = adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();
        assert!((r - -0.5).abs() < 1e-12);
    }

    #[test]
    fn csv_export() {
        let g = two_cliques(3, 1.0, 0.1);
        let p = detect_communities(&g, 0, DEFAULT_TELEPORT).unwrap();
        let mut labels = BTreeMap::new();
        labels.insert("N0".to_string(), "tech".to_string());
        let mut out = Vec::new();
        p.write_csv(&mut out, Some(&labels)).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next(), Some("ticker,community_id,label"));
        assert_eq!(text.lines().nth(1), Some("N0,0,tech"));
        assert_eq!(p.dominant_label(0, &labels).as_deref(), Some("tech"));
    }
}
