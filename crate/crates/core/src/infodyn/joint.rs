//! Empirical joint statistics of `(x_next, x_history, y_history)` tuples.

use crate::error::{Error, Result};

use super::entropy::{renyi_unchecked, shannon_unchecked};
use super::symbolize::SymbolSeries;

/// Shape of a joint table: alphabet size and history lengths.
///
/// Cells are indexed `(x_next * hx + x_hist) * hy + y_hist`, where
/// `hx = S^m` and `hy = S^l` and histories are base-`S` codes with the
/// most recent symbol as the least significant digit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JointDims {
    pub alphabet: usize,
    pub m: usize,
    pub l: usize,
}

impl JointDims {
    pub fn new(alphabet: usize, m: usize, l: usize) -> Result<Self> {
        if alphabet < 2 {
            return Err(Error::Domain("alphabet needs at least 2 symbols".into()));
        }
        if m == 0 || l == 0 {
            return Err(Error::Domain("history lengths must be >= 1".into()));
        }
        let cells = (alphabet as u128).pow((1 + m + l) as u32);
        if cells > (1 << 26) {
            return Err(Error::Domain(format!(
                "joint table too large: {alphabet}^{} cells",
                1 + m + l
            )));
        }
        Ok(JointDims { alphabet, m, l })
    }

    pub fn hx(&self) -> usize {
        self.alphabet.pow(self.m as u32)
    }

    pub fn hy(&self) -> usize {
        self.alphabet.pow(self.l as u32)
    }

    pub fn cells(&self) -> usize {
        self.alphabet * self.hx() * self.hy()
    }

    pub fn index(&self, x_next: usize, x_hist: usize, y_hist: usize) -> usize {
        (x_next * self.hx() + x_hist) * self.hy() + y_hist
    }
}

/// Marginals of a (not necessarily normalized) joint weight table.
pub(crate) struct Marginals {
    /// `(x_next, x_hist)`
    pub next_hist: Vec<f64>,
    /// `(x_hist, y_hist)`
    pub hist_y: Vec<f64>,
    pub hist: Vec<f64>,
}

pub(crate) fn marginals(w: &[f64], dims: JointDims) -> Marginals {
    let (hx, hy) = (dims.hx(), dims.hy());
    let mut next_hist = vec![0.0; dims.alphabet * hx];
    let mut hist_y = vec![0.0; hx * hy];
    let mut hist = vec![0.0; hx];
    for xn in 0..dims.alphabet {
        for xh in 0..hx {
            for yh in 0..hy {
                let v = w[dims.index(xn, xh, yh)];
                next_hist[xn * hx + xh] += v;
                hist_y[xh * hy + yh] += v;
                hist[xh] += v;
            }
        }
    }
    Marginals {
        next_hist,
        hist_y,
        hist,
    }
}

/// Counts of every observed tuple in a pair of aligned symbol series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalJoint {
    pub dims: JointDims,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl EmpiricalJoint {
    /// Counts tuples `(x[t+1], x[t-m+1..=t], y[t-l+1..=t])` over every `t`
    /// at which all of them are present.
    pub fn from_series(x: &SymbolSeries, y: &SymbolSeries, m: usize, l: usize) -> Result<Self> {
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
        let dims = JointDims::new(x.alphabet_size as usize, m, l)?;
        let mut counts = vec![0u64; dims.cells()];
        let mut total = 0;
        for cell in tuple_cells(&x.symbols, &y.symbols, dims) {
            counts[cell] += 1;
            total += 1;
        }
        Ok(EmpiricalJoint {
            dims,
            counts,
            total,
        })
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let n = self.total as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    /// Counts with `y_hist` summed out.
    pub fn next_hist_counts(&self) -> Vec<u64> {
        let (hx, hy) = (self.dims.hx(), self.dims.hy());
        let mut out = vec![0; self.dims.alphabet * hx];
        for xn in 0..self.dims.alphabet {
            for xh in 0..hx {
                out[xn * hx + xh] = (0..hy)
                    .map(|yh| self.counts[self.dims.index(xn, xh, yh)])
                    .sum();
            }
        }
        out
    }
}

/// Cell index of each valid tuple, in time order.
pub(crate) fn tuple_cells<'a>(
    x: &'a [Option<u8>],
    y: &'a [Option<u8>],
    dims: JointDims,
) -> impl Iterator<Item = usize> + 'a {
    let s = dims.alphabet;
    let start = dims.m.max(dims.l) - 1;
    let end = x.len().saturating_sub(1);
    (start..end).filter_map(move |t| {
        let xn = x[t + 1]? as usize;
        let mut xh = 0;
        for k in 0..dims.m {
            xh = xh * s + x[t + 1 - dims.m + k]? as usize;
        }
        let mut yh = 0;
        for k in 0..dims.l {
            yh = yh * s + y[t + 1 - dims.l + k]? as usize;
        }
        Some(dims.index(xn, xh, yh))
    })
}

/// `sum p(x',X,Y) log2 [p(x'|X,Y) / p(x'|X)]` from joint weights.
pub fn shannon_te_from_joint(w: &[f64], dims: JointDims) -> f64 {
    let mg = marginals(w, dims);
    let total: f64 = mg.hist.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let (hx, hy) = (dims.hx(), dims.hy());
    let mut te = 0.0;
    for xn in 0..dims.alphabet {
        for xh in 0..hx {
            let c_next_hist = mg.next_hist[xn * hx + xh];
            if c_next_hist == 0.0 {
                continue;
            }
            for yh in 0..hy {
                let c = w[dims.index(xn, xh, yh)];
                if c == 0.0 {
                    continue;
                }
                let ratio = (c * mg.hist[xh]) / (mg.hist_y[xh * hy + yh] * c_next_hist);
                te += c * ratio.log2();
            }
        }
    }
    (te / total).max(0.0)
}

/// How the denominator escort of the Rényi TE is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenyiForm {
    /// Escort over the conditioning tuple `(X, Y)`, the conditional-Rényi
    /// difference `S_q(x'|X) - S_q(x'|X, Y)`. Reduces to Shannon TE at q = 1.
    #[default]
    Conditional,
    /// Escort over the full tuple `(x', X, Y)` in the denominator. Does not
    /// reduce to Shannon TE as q approaches 1; kept for comparison only.
    FullTuple,
}

fn escort_weights(m: &[f64], q: f64) -> Vec<f64> {
    let powered: Vec<f64> = m
        .iter()
        .map(|&v| if v > 0.0 { v.powf(q) } else { 0.0 })
        .collect();
    let z: f64 = powered.iter().sum();
    powered.into_iter().map(|v| v / z).collect()
}

/// Rényi TE of order `q` from joint weights:
/// `log2[ sum rho_q(X) p^q(x'|X) / sum rho_q(.) p^q(x'|X,Y) ] / (1 - q)`.
pub fn renyi_te_from_joint(w: &[f64], dims: JointDims, q: f64, form: RenyiForm) -> f64 {
    let mg = marginals(w, dims);
    let (hx, hy) = (dims.hx(), dims.hy());
    let rho_hist = escort_weights(&mg.hist, q);
    let mut numer = 0.0;
    for xn in 0..dims.alphabet {
        for xh in 0..hx {
            let c = mg.next_hist[xn * hx + xh];
            if c > 0.0 {
                numer += rho_hist[xh] * (c / mg.hist[xh]).powf(q);
            }
        }
    }
    let rho_den = match form {
        RenyiForm::Conditional => escort_weights(&mg.hist_y, q),
        RenyiForm::FullTuple => escort_weights(w, q),
    };
    let mut denom = 0.0;
    for xn in 0..dims.alphabet {
        for xh in 0..hx {
            for yh in 0..hy {
                let idx = dims.index(xn, xh, yh);
                let c = w[idx];
                if c == 0.0 {
                    continue;
                }
                let weight = match form {
                    RenyiForm::Conditional => rho_den[xh * hy + yh],
                    RenyiForm::FullTuple => rho_den[idx],
                };
                denom += weight * (c / mg.hist_y[xh * hy + yh]).powf(q);
            }
        }
    }
    (numer / denom).log2() / (1.0 - q)
}

/// Conditional entropies `(H(x'|X), H(x'|X,Y))` for order `q` (1 = Shannon),
/// evaluated as differences of joint and marginal entropies.
pub fn conditional_entropies(w: &[f64], dims: JointDims, q: f64) -> (f64, f64) {
    let total: f64 = w.iter().sum();
    let mg = marginals(w, dims);
    let norm = |v: &[f64]| -> Vec<f64> { v.iter().map(|c| c / total).collect() };
    let h = |p: &[f64]| {
        if q == 1.0 {
            shannon_unchecked(p)
        } else {
            renyi_unchecked(p, q)
        }
    };
    let h_full = h(&norm(w));
    let h_next_hist = h(&norm(&mg.next_hist));
    let h_hist_y = h(&norm(&mg.hist_y));
    let h_hist = h(&norm(&mg.hist));
    (h_next_hist - h_hist, h_full - h_hist_y)
}
