//! Plug-in transfer-entropy estimators and the pairwise TE table.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::{self, Stream};

use super::joint::{renyi_te_from_joint, shannon_te_from_joint, tuple_cells, JointDims, RenyiForm};
use super::symbolize::SymbolSeries;

pub const MIN_SAMPLES: usize = 100;
pub const DEFAULT_SHUFFLES: usize = 100;

/// One transfer-entropy estimate `T_{Y->X}` in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TEResult {
    pub value: f64,
    /// Rényi order; 1 is Shannon.
    pub q: f64,
    pub m: usize,
    pub l: usize,
    /// `value - mean(shuffled values)`.
    pub effective: Option<f64>,
    pub null_mean: Option<f64>,
    pub null_sd: Option<f64>,
    pub n_effective_samples: usize,
}

/// Estimator settings shared across every pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeEstimator {
    pub m: usize,
    pub l: usize,
    /// Orders to evaluate from the same counts; `1.0` is Shannon.
    pub qs: Vec<f64>,
    pub n_shuffles: usize,
    pub renyi_form: RenyiForm,
}

impl Default for TeEstimator {
    fn default() -> Self {
        TeEstimator {
            m: 1,
            l: 1,
            qs: vec![1.0, 0.75],
            n_shuffles: DEFAULT_SHUFFLES,
            renyi_form: RenyiForm::Conditional,
        }
    }
}

/// Estimates for one ordered pair: one result per order, and per order the
/// TE of every shuffle replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEstimate {
    pub results: Vec<TEResult>,
    pub nulls: Vec<Vec<f64>>,
}

fn check_orders(qs: &[f64]) -> Result<()> {
    if qs.is_empty() {
        return Err(Error::Domain("at least one order q is required".into()));
    }
    if let Some(q) = qs.iter().find(|q| !(q.is_finite() && **q > 0.0)) {
        return Err(Error::Domain(format!("Renyi order must be > 0, got {q}")));
    }
    Ok(())
}

fn te_at(w: &[f64], dims: JointDims, q: f64, form: RenyiForm) -> f64 {
    if q == 1.0 {
        shannon_te_from_joint(w, dims)
    } else {
        renyi_te_from_joint(w, dims, q, form)
    }
}

fn fill_counts(buf: &mut [f64], x: &[Option<u8>], y: &[Option<u8>], dims: JointDims) -> usize {
    buf.iter_mut().for_each(|c| *c = 0.0);
    let mut n = 0;
    for cell in tuple_cells(x, y, dims) {
        buf[cell] += 1.0;
        n += 1;
    }
    n
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl TeEstimator {
    fn validate(&self, x: &SymbolSeries, y: &SymbolSeries) -> Result<JointDims> {
        check_orders(&self.qs)?;
        if x.len() != y.len() {
            return Err(Error::Integrity(format!(
                "series lengths differ: {} vs {}",
                x.len(),
                y.len()
            )));
        }
        if x.alphabet_size != y.alphabet_size {
            return Err(Error::Domain(format!(
                "alphabet mismatch: {} vs {}",
                x.alphabet_size, y.alphabet_size
            )));
        }
        JointDims::new(x.alphabet_size as usize, self.m, self.l)
    }

    /// Estimates `T_{Y->X}` at every order, with `n_shuffles` replicates in
    /// which the present values of `y` are uniformly permuted.
    ///
    /// Replicate `r` draws its permutation from sub-seed `r` of `seed`'s
    /// shuffle stream, so series with the same missing pattern share the
    /// permutation of each replicate.
    pub fn estimate(&self, x: &SymbolSeries, y: &SymbolSeries, seed: u64) -> Result<PairEstimate> {
        let dims = self.validate(x, y)?;
        let mut buf = vec![0.0; dims.cells()];
        let n = fill_counts(&mut buf, &x.symbols, &y.symbols, dims);
        if n < MIN_SAMPLES {
            return Err(Error::InsufficientSamples {
                found: n,
                required: MIN_SAMPLES,
            });
        }
        let observed: Vec<f64> = self
            .qs
            .iter()
            .map(|&q| te_at(&buf, dims, q, self.renyi_form))
            .collect();

        let mut nulls = vec![Vec::with_capacity(self.n_shuffles); self.qs.len()];
        if self.n_shuffles > 0 {
            let positions: Vec<usize> = (0..y.len()).filter(|&t| y.symbols[t].is_some()).collect();
            let original: Vec<Option<u8>> = positions.iter().map(|&t| y.symbols[t]).collect();
            let mut shuffled = y.symbols.clone();
            for r in 0..self.n_shuffles {
                let mut rng = seeds::rng(seeds::sub_seed(seed, Stream::Shuffle, r as u64));
                let mut values = original.clone();
                values.shuffle(&mut rng);
                for (&t, &v) in positions.iter().zip(&values) {
                    shuffled[t] = v;
                }
                fill_counts(&mut buf, &x.symbols, &shuffled, dims);
                for (k, &q) in self.qs.iter().enumerate() {
                    nulls[k].push(te_at(&buf, dims, q, self.renyi_form));
                }
            }
        }

        let results = self
            .qs
            .iter()
            .zip(&observed)
            .zip(&nulls)
            .map(|((&q, &value), null)| {
                let stats = (!null.is_empty()).then(|| mean_sd(null));
                TEResult {
                    value,
                    q,
                    m: self.m,
                    l: self.l,
                    effective: stats.map(|(mean, _)| value - mean),
                    null_mean: stats.map(|s| s.0),
                    null_sd: stats.map(|s| s.1),
                    n_effective_samples: n,
                }
            })
            .collect();
        Ok(PairEstimate { results, nulls })
    }
}

/// Plug-in Shannon `T_{Y->X}(m, l)`.
pub fn transfer_entropy(
    x: &SymbolSeries,
    y: &SymbolSeries,
    m: usize,
    l: usize,
) -> Result<TEResult> {
    let est = TeEstimator {
        m,
        l,
        qs: vec![1.0],
        n_shuffles: 0,
        renyi_form: RenyiForm::Conditional,
    };
    Ok(est.estimate(x, y, 0)?.results.remove(0))
}

/// Shannon TE minus the mean TE over `n_shuffles` temporally shuffled sources.
pub fn effective_transfer_entropy(
    x: &SymbolSeries,
    y: &SymbolSeries,
    m: usize,
    l: usize,
    n_shuffles: usize,
    rng_seed: u64,
) -> Result<TEResult> {
    if n_shuffles == 0 {
        return Err(Error::Domain("n_shuffles must be >= 1".into()));
    }
    let est = TeEstimator {
        m,
        l,
        qs: vec![1.0],
        n_shuffles,
        renyi_form: RenyiForm::Conditional,
    };
    Ok(est.estimate(x, y, rng_seed)?.results.remove(0))
}

/// Rényi TE of order `q`; `q = 1` is routed to [`transfer_entropy`].
pub fn renyi_transfer_entropy(
    x: &SymbolSeries,
    y: &SymbolSeries,
    m: usize,
    l: usize,
    q: f64,
) -> Result<TEResult> {
    renyi_transfer_entropy_with(x, y, m, l, q, RenyiForm::Conditional)
}

pub fn renyi_transfer_entropy_with(
    x: &SymbolSeries,
    y: &SymbolSeries,
    m: usize,
    l: usize,
    q: f64,
    form: RenyiForm,
) -> Result<TEResult> {
    check_orders(&[q])?;
    if q == 1.0 {
        return transfer_entropy(x, y, m, l);
    }
    let est = TeEstimator {
        m,
        l,
        qs: vec![q],
        n_shuffles: 0,
        renyi_form: form,
    };
    Ok(est.estimate(x, y, 0)?.results.remove(0))
}

/// One row of the pairwise table: `T_{source -> target}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub source: usize,
    pub target: usize,
    pub estimate: PairEstimate,
}

/// Transfer entropies over all ordered pairs of a symbolized panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeTable {
    pub tickers: Vec<String>,
    pub estimator: TeEstimator,
    pub seed: u64,
    pub entries: Vec<PairEntry>,
    /// Ordered pairs with too few joint samples.
    pub skipped: Vec<(usize, usize)>,
}

pub const TE_CSV_HEADER: [&str; 10] = [
    "source",
    "target",
    "q",
    "m",
    "l",
    "te",
    "ete",
    "null_mean",
    "null_sd",
    "samples",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes one row per (pair, order) as `source,target,q,m,l,te,ete,null_mean,null_sd,samples`.
pub fn write_te_rows<W: std::io::Write>(
    writer: W,
    rows: impl IntoIterator<Item = (String, String, TEResult)>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TE_CSV_HEADER)?;
    for (source, target, r) in rows {
        w.write_record([
            source,
            target,
            r.q.to_string(),
            r.m.to_string(),
            r.l.to_string(),
            r.value.to_string(),
            opt(r.effective),
            opt(r.null_mean),
            opt(r.null_sd),
            r.n_effective_samples.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

impl TeTable {
    pub fn get(&self, source: usize, target: usize) -> Option<&PairEntry> {
        let n = self.tickers.len();
        // entries are stored in (source, target) row-major order over i != j
        self.entries
            .binary_search_by(|e| (e.source * n + e.target).cmp(&(source * n + target)))
            .ok()
            .map(|k| &self.entries[k])
    }

    pub fn q_index(&self, q: f64) -> Option<usize> {
        self.estimator.qs.iter().position(|&v| v == q)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let rows = self.entries.iter().flat_map(|e| {
            e.estimate.results.iter().map(move |r| {
                (
                    self.tickers[e.source].clone(),
                    self.tickers[e.target].clone(),
                    r.clone(),
                )
            })
        });
        write_te_rows(writer, rows)
    }

    /// Mean TE at order `q` over all estimated ordered pairs.
    pub fn mean_value(&self, q: f64) -> Option<f64> {
        let k = self.q_index(q)?;
        if self.entries.is_empty() {
            return None;
        }
        Some(
            self.entries
                .iter()
                .map(|e| e.estimate.results[k].value)
                .sum::<f64>()
                / self.entries.len() as f64,
        )
    }
}

/// Estimates every ordered pair `(source, target)`, `source != target`.
///
/// Every pair uses the same per-replicate permutations (see
/// [`TeEstimator::estimate`]), so community-level nulls keep the dependence
/// between pairs, and results do not depend on scheduling or thread count.
pub fn pairwise_te(
    series: &[SymbolSeries],
    tickers: &[String],
    estimator: &TeEstimator,
    seed: u64,
) -> Result<TeTable> {
    let n = series.len();
    if tickers.len() != n {
        return Err(Error::Integrity("ticker/series count mismatch".into()));
    }
    check_orders(&estimator.qs)?;
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let run = |&(i, j): &(usize, usize)| (i, j, estimator.estimate(&series[j], &series[i], seed));
    #[cfg(feature = "parallel")]
    let raw: Vec<_> = {
        use rayon::prelude::*;
        pairs.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let raw: Vec<_> = pairs.iter().map(run).collect();

    let mut entries = Vec::with_capacity(raw.len());
    let mut skipped = Vec::new();
    for (source, target, res) in raw {
        match res {
            Ok(estimate) => entries.push(PairEntry {
                source,
                target,
                estimate,
            }),
            Err(Error::InsufficientSamples { found, .. }) => {
                log::warn!(
                    "skipping {} -> {}: {found} joint samples",
                    tickers[source],
                    tickers[target]
                );
                skipped.push((source, target));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(TeTable {
        tickers: tickers.to_vec(),
        estimator: estimator.clone(),
        seed,
        entries,
        skipped,
    })
}
