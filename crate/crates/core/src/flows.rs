//! Community-level transfer-entropy flows, their significance and the
//! market summary row.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::community::Partition;
use crate::error::{Error, Result};
use crate::infodyn::TeTable;
use crate::ingest::ReturnPanel;
use crate::netfilter::escape;
use crate::spectral::{mean_lagged_correlation, CorrMatrix};

pub const DEFAULT_PERCENTILE: f64 = 0.95;
const MIN_REPLICATES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityInfo {
    pub id: usize,
    pub members: Vec<String>,
    pub label: Option<String>,
}

/// Mean TE from one community to another at one order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub source: usize,
    pub target: usize,
    pub q: f64,
    pub mean_te: f64,
    pub mean_ete: f64,
    pub n_pairs: usize,
    pub significant: bool,
    /// Null percentile the flow was compared against; `None` before
    /// filtering or when no finite threshold exists.
    pub threshold: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub percentile: f64,
    pub n_shuffles: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowNetwork {
    pub communities: Vec<CommunityInfo>,
    pub flows: Vec<Flow>,
    pub threshold_spec: Option<ThresholdSpec>,
}

/// Position of each partition node in the table, by ticker.
fn table_index(table: &TeTable, partition: &Partition) -> Result<Vec<usize>> {
    let by_name: HashMap<&str, usize> = table
        .tickers
        .iter()
        .enumerate()
        .map(|(k, t)| (t.as_str(), k))
        .collect();
    if by_name.len() != partition.nodes.len() {
        return Err(Error::Integrity(format!(
            "partition has {} nodes, TE table has {} tickers",
            partition.nodes.len(),
            by_name.len()
        )));
    }
    partition
        .nodes
        .iter()
        .map(|t| {
            by_name
                .get(t.as_str())
                .copied()
                .ok_or_else(|| Error::Integrity(format!("ticker {t} missing from TE table")))
        })
        .collect()
}

/// Ordered table pairs `(i, j)`, `i != j`, from community `a` to `b`.
fn member_pairs(partition: &Partition, index: &[usize], a: usize, b: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for &i in &partition.communities[a] {
        for &j in &partition.communities[b] {
            if i != j {
                out.push((index[i], index[j]));
            }
        }
    }
    out
}

/// Mean TE and effective TE over all ordered member pairs of every
/// community pair, self-flows included; empty pair sets are omitted.
pub fn community_flows(table: &TeTable, partition: &Partition, q: f64) -> Result<FlowNetwork> {
    community_flows_labeled(table, partition, q, &BTreeMap::new())
}

pub fn community_flows_labeled(
    table: &TeTable,
    partition: &Partition,
    q: f64,
    labels: &BTreeMap<String, String>,
) -> Result<FlowNetwork> {
    let k = table
        .q_index(q)
        .ok_or_else(|| Error::Domain(format!("TE table has no entries at q = {q}")))?;
    let index = table_index(table, partition)?;
    let communities = communities_info(partition, labels);
    let mut flows = Vec::new();
    for a in 0..partition.n_communities() {
        for b in 0..partition.n_communities() {
            let pairs = member_pairs(partition, &index, a, b);
            if pairs.is_empty() {
                continue;
            }
            let (mut te, mut ete) = (0.0, 0.0);
            for &(i, j) in &pairs {
                let e = table
                    .get(i, j)
                    .ok_or_else(|| Error::Integrity(format!("TE table lacks pair {i} -> {j}")))?;
                let r = &e.estimate.results[k];
                te += r.value;
                ete += r
                    .effective
                    .ok_or_else(|| Error::Integrity("TE table has no shuffle replicates".into()))?;
            }
            let n = pairs.len() as f64;
            flows.push(Flow {
                source: a,
                target: b,
                q,
                mean_te: te / n,
                mean_ete: ete / n,
                n_pairs: pairs.len(),
                significant: false,
                threshold: None,
                p_value: None,
            });
        }
    }
    Ok(FlowNetwork {
        communities,
        flows,
        threshold_spec: None,
    })
}

fn communities_info(
    partition: &Partition,
    labels: &BTreeMap<String, String>,
) -> Vec<CommunityInfo> {
    (0..partition.n_communities())
        .map(|c| CommunityInfo {
            id: c,
            members: partition.communities[c]
                .iter()
                .map(|&a| partition.nodes[a].clone())
                .collect(),
            label: partition.dominant_label(c, labels),
        })
        .collect()
}

/// Index of the largest order statistic that an observation must exceed to
/// reach a permutation p-value `(1 + #{null >= obs}) / (R + 1)` below
/// `1 - percentile`; `None` if no observation can.
fn threshold_rank(r: usize, percentile: f64) -> Option<usize> {
    let allowed = ((1.0 - percentile) * (r as f64 + 1.0) - 1.0 - 1e-9).ceil() as i64 - 1;
    (allowed >= 0 && (allowed as usize) < r).then(|| r - 1 - allowed as usize)
}

/// Flow-level null replicates: per shuffle, the mean over the flow's pairs
/// of the shuffled TE minus that pair's null mean.
fn flow_null(table: &TeTable, pairs: &[(usize, usize)], k: usize) -> Result<Vec<f64>> {
    let r = table.estimator.n_shuffles;
    let mut null = vec![0.0; r];
    for &(i, j) in pairs {
        let e = table
            .get(i, j)
            .ok_or_else(|| Error::Integrity(format!("TE table lacks pair {i} -> {j}")))?;
        let reps = &e.estimate.nulls[k];
        let mean = e.estimate.results[k].null_mean.unwrap_or(0.0);
        for (acc, v) in null.iter_mut().zip(reps) {
            *acc += v - mean;
        }
    }
    let n = pairs.len() as f64;
    Ok(null.into_iter().map(|v| v / n).collect())
}

/// Marks each flow significant iff its mean effective TE exceeds the
/// `percentile` of its own community-pair null distribution.
///
/// Flows at `q != 1` take their flag from the Shannon flow of the same
/// community pair when the network has one.
pub fn significance_filter(
    network: &FlowNetwork,
    table: &TeTable,
    partition: &Partition,
    percentile: f64,
) -> Result<FlowNetwork> {
    if !(percentile > 0.0 && percentile < 1.0) {
        return Err(Error::Domain(format!(
            "percentile must lie in (0, 1), got {percentile}"
        )));
    }
    let r = table.estimator.n_shuffles;
    if r == 0 {
        return Err(Error::Integrity(
            "TE table has no shuffle replicates".into(),
        ));
    }
    if r < MIN_REPLICATES {
        log::warn!("only {r} null replicates; significance thresholds are coarse");
    }
    let index = table_index(table, partition)?;
    let rank = threshold_rank(r, percentile);
    let mut out = network.clone();
    for flow in &mut out.flows {
        let k = table
            .q_index(flow.q)
            .ok_or_else(|| Error::Domain(format!("TE table has no entries at q = {}", flow.q)))?;
        let pairs = member_pairs(partition, &index, flow.source, flow.target);
        let mut null = flow_null(table, &pairs, k)?;
        let exceed = null.iter().filter(|&&v| v >= flow.mean_ete).count();
        flow.p_value = Some((1 + exceed) as f64 / (r + 1) as f64);
        null.sort_by(f64::total_cmp);
        flow.threshold = rank.map(|i| null[i]);
        flow.significant = flow.threshold.is_some_and(|t| flow.mean_ete > t);
    }
    let shannon: HashMap<(usize, usize), bool> = out
        .flows
        .iter()
        .filter(|f| f.q == 1.0)
        .map(|f| ((f.source, f.target), f.significant))
        .collect();
    for flow in out.flows.iter_mut().filter(|f| f.q != 1.0) {
        if let Some(&s) = shannon.get(&(flow.source, flow.target)) {
            flow.significant = s;
        }
    }
    out.threshold_spec = Some(ThresholdSpec {
        percentile,
        n_shuffles: r,
        seed: table.seed,
    });
    Ok(out)
}

/// Flows at every order of the table in one network, order by order.
pub fn flow_network(
    table: &TeTable,
    partition: &Partition,
    labels: &BTreeMap<String, String>,
    percentile: f64,
) -> Result<FlowNetwork> {
    let mut net: Option<FlowNetwork> = None;
    for &q in &table.estimator.qs {
        let part = community_flows_labeled(table, partition, q, labels)?;
        match &mut net {
            Some(n) => n.flows.extend(part.flows),
            None => net = Some(part),
        }
    }
    let net = net.ok_or_else(|| Error::Domain("TE table has no orders".into()))?;
    significance_filter(&net, table, partition, percentile)
}

impl FlowNetwork {
    pub fn significant(&self, q: f64) -> impl Iterator<Item = &Flow> {
        self.flows.iter().filter(move |f| f.q == q && f.significant)
    }

    /// Directed DOT graph of the Shannon flows. Edge width scales with mean
    /// effective TE; significant flows are solid, others dashed. Each edge
    /// carries the mean TE at every other order and its sign.
    pub fn to_dot(&self, name: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "digraph \"{}\" {{", escape(name));
        for c in &self.communities {
            let label = match &c.label {
                Some(l) => format!("C{} {} ({})", c.id, l, c.members.len()),
                None => format!("C{} ({})", c.id, c.members.len()),
            };
            let _ = writeln!(s, "  \"C{}\" [label=\"{}\"];", c.id, escape(&label));
        }
        let max_ete = self
            .flows
            .iter()
            .filter(|f| f.q == 1.0)
            .map(|f| f.mean_ete.max(0.0))
            .fold(0.0, f64::max);
        for f in self.flows.iter().filter(|f| f.q == 1.0) {
            let width = if max_ete > 0.0 {
                0.5 + 4.5 * f.mean_ete.max(0.0) / max_ete
            } else {
                0.5
            };
            let mut attrs = format!(
                "penwidth={width:.4}, ete={}, te={}, n_pairs={}, style={}",
                f.mean_ete,
                f.mean_te,
                f.n_pairs,
                if f.significant { "solid" } else { "dashed" }
            );
            for g in self
                .flows
                .iter()
                .filter(|g| g.q != 1.0 && g.source == f.source && g.target == f.target)
            {
                let tag = format!("{}", g.q).replace('.', "_");
                let sign = if g.mean_te < 0.0 {
                    "negative"
                } else {
                    "positive"
                };
                let _ = write!(attrs, ", rte_{tag}={}, rte_{tag}_sign={sign}", g.mean_te);
            }
            let _ = writeln!(s, "  \"C{}\" -> \"C{}\" [{attrs}];", f.source, f.target);
        }
        s.push_str("}\n");
        s
    }
}

/// One row of the per-market statistics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSummary {
    pub market: String,
    pub stocks: usize,
    pub av_length: f64,
    pub c0: Option<f64>,
    pub c1: Option<f64>,
    pub ste: Option<f64>,
    pub rte_075: Option<f64>,
    pub communities: usize,
}

pub const SUMMARY_COLUMNS: [&str; 8] = [
    "market",
    "stocks",
    "av. length (days)",
    "C(0)",
    "C(1)",
    "STE",
    "RTE_0.75",
    "communities",
];

/// Market-wide averages; STE and RTE are means over all ordered pairs.
pub fn market_summary(
    market: &str,
    panel: &ReturnPanel,
    corr: &CorrMatrix,
    te: &TeTable,
    partition: &Partition,
    min_overlap: usize,
) -> MarketSummary {
    let n = panel.n_series();
    let av_length = if n == 0 {
        0.0
    } else {
        (0..n).map(|i| panel.observations(i)).sum::<usize>() as f64 / n as f64
    };
    MarketSummary {
        market: market.to_string(),
        stocks: n,
        av_length,
        c0: corr.mean_off_diagonal(),
        c1: mean_lagged_correlation(panel, 1, min_overlap),
        ste: te.mean_value(1.0),
        rte_075: te.mean_value(0.75),
        communities: partition.n_communities(),
    }
}

impl MarketSummary {
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let o = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(SUMMARY_COLUMNS)?;
        w.write_record([
            self.market.clone(),
            self.stocks.to_string(),
            self.av_length.to_string(),
            o(self.c0),
            o(self.c1),
            o(self.ste),
            o(self.rte_075),
            self.communities.to_string(),
        ])?;
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infodyn::{PairEntry, PairEstimate, TEResult, TeEstimator};

    fn result(value: f64, q: f64, null: &[f64]) -> TEResult {
        let mean = null.iter().sum::<f64>() / null.len() as f64;
        TEResult {
            value,
            q,
            m: 1,
            l: 1,
            effective: Some(value - mean),
            null_mean: Some(mean),
            null_sd: Some(0.0),
            n_effective_samples: 1000,
        }
    }

    /// Hand table over `n` tickers: TE(i -> j) = f(i, j), null replicates
    /// `nulls(i, j)`, at q = 1 and q = 0.75 (negated).
    fn table(
        n: usize,
        f: impl Fn(usize, usize) -> f64,
        nulls: impl Fn(usize, usize) -> Vec<f64>,
    ) -> TeTable {
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let null = nulls(i, j);
                let neg: Vec<f64> = null.iter().map(|v| -v).collect();
                entries.push(PairEntry {
                    source: i,
                    target: j,
                    estimate: PairEstimate {
                        results: vec![result(f(i, j), 1.0, &null), result(-f(i, j), 0.75, &neg)],
                        nulls: vec![null, neg],
                    },
                });
            }
        }
        let r = nulls(0, 1).len();
        TeTable {
            tickers: (0..n).map(|k| format!("T{k}")).collect(),
            estimator: TeEstimator {
                n_shuffles: r,
                ..Default::default()
            },
            seed: 1,
            entries,
            skipped: vec![],
        }
    }

    fn partition(nodes: Vec<String>, assignment: &[usize]) -> Partition {
        let k = assignment.iter().max().unwrap() + 1;
        let mut communities = vec![Vec::new(); k];
        for (a, &m) in assignment.iter().enumerate() {
            communities[m].push(a);
        }
        Partition {
            nodes,
            assignment: assignment.to_vec(),
            communities,
            codelength: 0.0,
        }
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|k| format!("T{k}")).collect()
    }

    fn zero_null(_: usize, _: usize) -> Vec<f64> {
        vec![0.0; 4]
    }

    #[test]
    fn two_by_two_hand_means() {
        let f = |i: usize, j: usize| (10 * i + j) as f64;
        let t = table(4, f, zero_null);
        let p = partition(names(4), &[0, 0, 1, 1]);
        let net = community_flows(&t, &p, 1.0).unwrap();
        assert_eq!(net.flows.len(), 4);
        let get = |a, b| {
            net.flows
                .iter()
                .find(|x| x.source == a && x.target == b)
                .unwrap()
        };
        // 0->1 and 1->0
        assert_eq!(get(0, 0).mean_te, (1.0 + 10.0) / 2.0);
        assert_eq!(get(0, 0).n_pairs, 2);
        // 0->2, 0->3, 1->2, 1->3
        assert_eq!(get(0, 1).mean_te, (2.0 + 3.0 + 12.0 + 13.0) / 4.0);
        assert_eq!(get(1, 0).mean_te, (20.0 + 21.0 + 30.0 + 31.0) / 4.0);
        assert_eq!(get(1, 1).mean_ete, (23.0 + 32.0) / 2.0);
        assert_eq!(get(0, 1).n_pairs, 4);
    }

    #[test]
    fn singleton_self_flow_is_omitted() {
        let t = table(3, |_, _| 1.0, zero_null);
        let p = partition(names(3), &[0, 0, 1]);
        let net = community_flows(&t, &p, 1.0).unwrap();
        assert!(!net.flows.iter().any(|f| f.source == 1 && f.target == 1));
        assert_eq!(net.flows.len(), 3);
    }

    #[test]
    fn ticker_order_does_not_matter() {
        let f = |i: usize, j: usize| (i * i + 3 * j) as f64;
        let t = table(4, f, zero_null);
        let p = partition(names(4), &[0, 1, 0, 1]);
        let base = community_flows(&t, &p, 1.0).unwrap();
        // same partition, nodes listed in reverse
        let rev: Vec<String> = names(4).into_iter().rev().collect();
        let p2 = partition(rev, &[1, 0, 1, 0]);
        let other = community_flows(&t, &p2, 1.0).unwrap();
        for a in &base.flows {
            let b = other
                .flows
                .iter()
                .find(|b| {
                    let (sa, ta) = (
                        &base.communities[a.source].members,
                        &base.communities[a.target].members,
                    );
                    let mut sb = other.communities[b.source].members.clone();
                    let mut tb = other.communities[b.target].members.clone();
                    sb.sort();
                    tb.sort();
                    let (mut sa, mut ta) = (sa.clone(), ta.clone());
                    sa.sort();
                    ta.sort();
                    sa == sb && ta == tb
                })
                .unwrap();
            assert!((a.mean_te - b.mean_te).abs() < 1e-12);
        }
    }

    #[test]
    fn linearity_and_singleton_reproduction() {
        let f = |i: usize, j: usize| ((i * 7 + j * 3) % 5) as f64 * 0.01;
        let c = 0.125;
        let t = table(5, f, zero_null);
        let shifted = table(5, |i, j| f(i, j) + c, zero_null);
        let p = partition(names(5), &[0, 1, 1, 0, 2]);
        let a = community_flows(&t, &p, 1.0).unwrap();
        let b = community_flows(&shifted, &p, 1.0).unwrap();
        for (x, y) in a.flows.iter().zip(&b.flows) {
            assert!((y.mean_ete - x.mean_ete - c).abs() < 1e-12);
        }
        let singles = partition(names(5), &[0, 1, 2, 3, 4]);
        let net = community_flows(&t, &singles, 1.0).unwrap();
        assert_eq!(net.flows.len(), 20);
        for fl in &net.flows {
            let e = t.get(fl.source, fl.target).unwrap();
            assert_eq!(fl.mean_ete, e.estimate.results[0].effective.unwrap());
        }
    }

    #[test]
    fn threshold_rank_cases() {
        // 100 replicates at 95%: at most 4 nulls may reach the observation
        assert_eq!(threshold_rank(100, 0.95), Some(95));
        assert_eq!(threshold_rank(100, 0.999999), None);
        assert_eq!(threshold_rank(19, 0.95), None);
        assert_eq!(threshold_rank(39, 0.95), Some(38));
    }

    #[test]
    fn significance_follows_null_percentile() {
        // nulls 0..100 spread per pair; pair 0 -> 1 is far above
        let nulls = |_: usize, _: usize| (0..100).map(|r| r as f64 * 0.001).collect::<Vec<_>>();
        let f = |i: usize, j: usize| if (i, j) == (0, 1) { 1.0 } else { 0.0495 };
        let t = table(3, f, nulls);
        let p = partition(names(3), &[0, 1, 2]);
        let net = community_flows(&t, &p, 1.0).unwrap();
        let sig = significance_filter(&net, &t, &p, 0.95).unwrap();
        let flagged: Vec<_> = sig.significant(1.0).map(|f| (f.source, f.target)).collect();
        assert_eq!(flagged, vec![(0, 1)]);
        for f in &sig.flows {
            if f.significant {
                assert!(f.mean_ete > f.threshold.unwrap());
            }
        }
        let none = significance_filter(&net, &t, &p, 0.999999).unwrap();
        assert_eq!(none.significant(1.0).count(), 0);
        // raising the percentile never adds flows
        let mut prev = usize::MAX;
        for pct in [0.5, 0.8, 0.9, 0.95, 0.99] {
            let k = significance_filter(&net, &t, &p, pct)
                .unwrap()
                .significant(1.0)
                .count();
            assert!(k <= prev);
            prev = k;
        }
    }

    #[test]
    fn renyi_flows_inherit_shannon_flags() {
        let nulls = |_: usize, _: usize| (0..50).map(|r| r as f64 * 0.001).collect::<Vec<_>>();
        let t = table(3, |i, j| if (i, j) == (2, 0) { 1.0 } else { 0.0 }, nulls);
        let p = partition(names(3), &[0, 1, 2]);
        let net = flow_network(&t, &p, &BTreeMap::new(), 0.95).unwrap();
        let rte: Vec<_> = net
            .significant(0.75)
            .map(|f| (f.source, f.target))
            .collect();
        assert_eq!(rte, vec![(2, 0)]);
        let dot = net.to_dot("flows");
        assert!(dot.starts_with("digraph \"flows\" {"));
        assert!(dot.contains("\"C2\" -> \"C0\" [penwidth=5.0000"));
        assert!(dot.contains("rte_0_75_sign=negative"));
        assert_eq!(dot.matches(" -> ").count(), 6);
    }

    #[test]
    fn summary_of_identical_pair() {
        let s: Vec<f64> = (0..300).map(|k| ((k * 37) % 11) as f64 - 5.0).collect();
        let panel = ReturnPanel::from_complete(names(2), vec![s.clone(), s]).unwrap();
        let corr = crate::spectral::correlation_matrix(&panel, 250).unwrap();
        let t = table(2, |_, _| 0.5, zero_null);
        let p = partition(names(2), &[0, 0]);
        let row = market_summary("pair", &panel, &corr, &t, &p, 250);
        assert_eq!(row.c0, Some(1.0));
        assert_eq!(row.av_length, 300.0);
        assert_eq!(row.ste, Some(0.5));
        assert_eq!(row.rte_075, Some(-0.5));
        let mut out = Vec::new();
        row.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "market,stocks,av. length (days),C(0),C(1),STE,RTE_0.75,communities"
        );
    }
}
