//! Quantile symbolization of real-valued series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fall / neutral / rise split at the 5% and 95% quantiles.
pub const DEFAULT_EDGES: [f64; 2] = [0.05, 0.95];

/// A series over the alphabet `0..alphabet_size`; `None` marks a missing day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolSeries {
    pub symbols: Vec<Option<u8>>,
    pub alphabet_size: u8,
    /// Quantile probabilities used to bin; empty for series given directly.
    #[serde(default)]
    pub quantile_edges: Vec<OrderedEdge>,
}

/// A quantile probability, kept as bits so `SymbolSeries` can be `Eq`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrderedEdge(u64);

impl OrderedEdge {
    pub fn value(self) -> f64 {
        f64::from_bits(self.0)
    }
}

impl SymbolSeries {
    /// Wraps an already-symbolic complete series.
    pub fn from_symbols(symbols: Vec<u8>, alphabet_size: u8) -> Result<Self> {
        if let Some(bad) = symbols.iter().find(|&&s| s >= alphabet_size) {
            return Err(Error::Domain(format!(
                "symbol {bad} outside alphabet of size {alphabet_size}"
            )));
        }
        Ok(SymbolSeries {
            symbols: symbols.into_iter().map(Some).collect(),
            alphabet_size,
            quantile_edges: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn occupancy(&self) -> Vec<usize> {
        let mut occ = vec![0; self.alphabet_size as usize];
        for s in self.symbols.iter().flatten() {
            occ[*s as usize] += 1;
        }
        occ
    }

    /// Applies a symbol permutation (`map[old] = new`).
    pub fn relabel(&self, map: &[u8]) -> Self {
        SymbolSeries {
            symbols: self
                .symbols
                .iter()
                .map(|s| s.map(|v| map[v as usize]))
                .collect(),
            alphabet_size: self.alphabet_size,
            quantile_edges: self.quantile_edges.clone(),
        }
    }
}

/// Name of a symbol under the default three-letter alphabet.
pub fn three_letter_name(symbol: u8) -> &'static str {
    match symbol {
        0 => "fall",
        1 => "neutral",
        2 => "rise",
        _ => "?",
    }
}

/// Order-statistic rank `ceil(edge * n)`, clamped to `1..=n`.
pub(crate) fn edge_rank(edge: f64, n: usize) -> usize {
    // the small offset keeps exact products like 0.05 * 20 from rounding up
    ((edge * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

/// Bins each present value by the series' own empirical quantiles.
///
/// The bin thresholds are the order statistics at ranks `ceil(edge * n)`; a
/// value equal to a threshold falls in the lower bin, so tied runs stay
/// together and shift occupancy by at most their length.
pub fn symbolize(series: &[Option<f64>], edges: &[f64]) -> Result<SymbolSeries> {
    if edges.is_empty() || edges.len() > 254 {
        return Err(Error::Domain(
            "need between 1 and 254 quantile edges".into(),
        ));
    }
    if edges.iter().any(|&e| !(e > 0.0 && e < 1.0)) || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain(format!(
            "quantile edges must be strictly increasing in (0, 1): {edges:?}"
        )));
    }
    let alphabet = edges.len() + 1;
    let mut sorted: Vec<f64> = series.iter().flatten().copied().collect();
    if let Some(bad) = sorted.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite value {bad} in series")));
    }
    let n = sorted.len();
    // ten observations per bin edge
    if n < 10 * edges.len() {
        return Err(Error::InsufficientSamples {
            found: n,
            required: 10 * edges.len(),
        });
    }
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[n - 1] {
        return Err(Error::Domain(
            "constant series has degenerate quantiles".into(),
        ));
    }
    let thresholds: Vec<f64> = edges.iter().map(|&e| sorted[edge_rank(e, n) - 1]).collect();
    let symbols = series
        .iter()
        .map(|v| v.map(|x| thresholds.iter().filter(|&&t| x > t).count() as u8))
        .collect();
    Ok(SymbolSeries {
        symbols,
        alphabet_size: alphabet as u8,
        quantile_edges: edges.iter().map(|e| OrderedEdge(e.to_bits())).collect(),
    })
}

pub fn symbolize_complete(series: &[f64], edges: &[f64]) -> Result<SymbolSeries> {
    let s: Vec<Option<f64>> = series.iter().copied().map(Some).collect();
    symbolize(&s, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twenty_distinct_values() {
        let v: Vec<f64> = (0..20).map(|k| ((k * 7) % 20) as f64 * 0.1 - 1.0).collect();
        let s = symbolize_complete(&v, &DEFAULT_EDGES).unwrap();
        assert_eq!(s.occupancy(), vec![1, 18, 1]);
        assert_eq!(s.alphabet_size, 3);
    }

    #[test]
    fn thirds_map_monotonically() {
        let v: Vec<f64> = (0..30).map(|k| [-2.0, 0.0, 2.0][k % 3]).collect();
        let s = symbolize_complete(&v, &[1.0 / 3.0, 2.0 / 3.0]).unwrap();
        for (x, sym) in v.iter().zip(&s.symbols) {
            let want = match *x as i32 {
                -2 => 0,
                0 => 1,
                _ => 2,
            };
            assert_eq!(sym.unwrap(), want);
        }
        assert_eq!(s.occupancy(), vec![10, 10, 10]);
    }

    /// Occupancies recomputed directly from the tie rule: count of values
    /// at or below each threshold.
    fn occupancy_oracle(values: &[f64], edges: &[f64]) -> Vec<usize> {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mut below = vec![0];
        for &e in edges {
            let t = sorted[(e * n as f64 - 1e-9).ceil() as usize - 1];
            below.push(values.iter().filter(|&&x| x <= t).count());
        }
        below.push(n);
        below.windows(2).map(|w| w[1] - w[0]).collect()
    }

    #[test]
    fn heavily_tied_series_follows_tie_rule() {
        // 90% zeros, 5% negatives, 5% positives, a few duplicated tails
        let mut v = vec![0.0; 180];
        v.extend((0..10).map(|k| -1.0 - (k / 2) as f64));
        v.extend((0..10).map(|k| 1.0 + (k / 3) as f64));
        let s = symbolize_complete(&v, &DEFAULT_EDGES).unwrap();
        let occ = s.occupancy();
        assert_eq!(occ, occupancy_oracle(&v, &DEFAULT_EDGES));
        let n = v.len() as f64;
        let targets = [0.05 * n, 0.90 * n, 0.05 * n];
        for (o, t) in occ.iter().zip(targets) {
            assert!((*o as f64 - t).abs() <= 1.0, "{occ:?}");
        }
    }

    #[test]
    fn tied_threshold_goes_to_lower_bin() {
        // threshold at rank 3 of 40 sits inside a run of -1s
        let mut v = vec![-1.0; 5];
        v.extend((0..35).map(|k| k as f64));
        let s = symbolize_complete(&v, &[0.075, 0.5]).unwrap();
        assert_eq!(s.occupancy()[0], 5);
        assert_eq!(s.occupancy(), occupancy_oracle(&v, &[0.075, 0.5]));
    }

    #[test]
    fn errors() {
        assert!(symbolize_complete(&[1.0, 2.0, 3.0, 4.0, 5.0], &DEFAULT_EDGES).is_err());
        assert!(symbolize_complete(&[1.0; 40], &DEFAULT_EDGES).is_err());
        let v: Vec<f64> = (0..40).map(f64::from).collect();
        assert!(symbolize_complete(&v, &[0.9, 0.1]).is_err());
        assert!(symbolize_complete(&v, &[0.0, 0.5]).is_err());
    }

    #[test]
    fn missing_values_pass_through() {
        let mut v: Vec<Option<f64>> = (0..40).map(|k| Some(k as f64)).collect();
        v[3] = None;
        let s = symbolize(&v, &DEFAULT_EDGES).unwrap();
        assert_eq!(s.symbols[3], None);
        assert_eq!(s.occupancy().iter().sum::<usize>(), 39);
    }
}
