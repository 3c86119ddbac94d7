//! Correlation functions, spectral decomposition and Wishart noise bounds.

mod jacobi;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ReturnPanel;

pub use jacobi::symmetric_eigen;

pub const SYMMETRY_TOL: f64 = 1e-12;
pub const EIGEN_TOL: f64 = 1e-12;

/// A correlation coefficient together with the number of observations behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossCorrelation {
    pub value: f64,
    pub overlap: usize,
}

/// `C_{X,Y}(tau) = <(X(t) - mu_X)(Y(t - tau) - mu_Y)> / (sigma_X sigma_Y)`
/// over the pairwise-complete observations of the lagged pair.
///
/// Means and standard deviations are taken over the overlap only.
pub fn cross_correlation(
    x: &[Option<f64>],
    y: &[Option<f64>],
    tau: usize,
    min_overlap: usize,
) -> Result<CrossCorrelation> {
    if x.len() != y.len() {
        return Err(Error::Integrity(format!(
            "series lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let pairs: Vec<(f64, f64)> = (tau..x.len())
        .filter_map(|t| Some((x[t]?, y[t - tau]?)))
        .collect();
    let n = pairs.len();
    if n < min_overlap.max(2) {
        return Err(Error::InsufficientOverlap {
            found: n,
            required: min_overlap.max(2),
        });
    }
    let nf = n as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(a, b) in &pairs {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "constant series on the overlap".into(),
        ));
    }
    Ok(CrossCorrelation {
        value: (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0),
        overlap: n,
    })
}

/// [`cross_correlation`] for complete series.
pub fn cross_correlation_complete(x: &[f64], y: &[f64], tau: usize) -> Result<f64> {
    let x: Vec<_> = x.iter().copied().map(Some).collect();
    let y: Vec<_> = y.iter().copied().map(Some).collect();
    Ok(cross_correlation(&x, &y, tau, 2)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrKind {
    Raw,
    Sector,
}

impl std::str::FromStr for CorrKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(CorrKind::Raw),
            "sector" => Ok(CorrKind::Sector),
            other => Err(Error::Config(format!("unknown correlation kind `{other}`"))),
        }
    }
}

/// Dense symmetric correlation matrix. Missing entries are `NaN` in memory
/// and `null` in JSON.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrMatrix {
    pub tickers: Vec<String>,
    pub kind: CorrKind,
    values: Vec<f64>,
    pair_support: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct CorrMatrixRepr {
    tickers: Vec<String>,
    kind: CorrKind,
    n: usize,
    values: Vec<Option<f64>>,
    pair_support: Vec<usize>,
}

impl Serialize for CorrMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CorrMatrixRepr {
            tickers: self.tickers.clone(),
            kind: self.kind,
            n: self.n(),
            values: self
                .values
                .iter()
                .map(|v| (!v.is_nan()).then_some(*v))
                .collect(),
            pair_support: self.pair_support.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CorrMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = CorrMatrixRepr::deserialize(d)?;
        if r.values.len() != r.n * r.n
            || r.pair_support.len() != r.n * r.n
            || r.tickers.len() != r.n
        {
            return Err(serde::de::Error::custom("matrix dimensions do not match n"));
        }
        Ok(CorrMatrix {
            tickers: r.tickers,
            kind: r.kind,
            values: r
                .values
                .into_iter()
                .map(|v| v.unwrap_or(f64::NAN))
                .collect(),
            pair_support: r.pair_support,
        })
    }
}

impl CorrMatrix {
    /// Builds a matrix from row-major values; `NaN` marks missing entries.
    pub fn from_values(
        tickers: Vec<String>,
        kind: CorrKind,
        values: Vec<f64>,
        pair_support: Vec<usize>,
    ) -> Result<Self> {
        let n = tickers.len();
        if values.len() != n * n || pair_support.len() != n * n {
            return Err(Error::Integrity(
                "matrix dimensions do not match tickers".into(),
            ));
        }
        let m = CorrMatrix {
            tickers,
            kind,
            values,
            pair_support,
        };
        m.check_symmetric()?;
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.tickers.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let v = self.values[i * self.n() + j];
        (!v.is_nan()).then_some(v)
    }

    pub fn support(&self, i: usize, j: usize) -> usize {
        self.pair_support[i * self.n() + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_complete(&self) -> bool {
        !self.values.iter().any(|v| v.is_nan())
    }

    pub fn missing_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i..n {
                if self.values[i * n + j].is_nan() {
                    out.push((i, j));
                }
            }
        }
        out
    }

    fn check_symmetric(&self) -> Result<()> {
        let n = self.n();
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (self.values[i * n + j], self.values[j * n + i]);
                if a.is_nan() != b.is_nan() || (!a.is_nan() && (a - b).abs() > SYMMETRY_TOL) {
                    return Err(Error::Integrity(format!(
                        "matrix not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Mean of the off-diagonal pair supports.
    pub fn mean_pair_support(&self) -> f64 {
        let n = self.n();
        if n < 2 {
            return self.pair_support.first().copied().unwrap_or(0) as f64;
        }
        let mut s = 0usize;
        for i in 0..n {
            for j in (i + 1)..n {
                s += self.pair_support[i * n + j];
            }
        }
        s as f64 / (n * (n - 1) / 2) as f64
    }

    /// Mean of the available off-diagonal entries.
    pub fn mean_off_diagonal(&self) -> Option<f64> {
        let n = self.n();
        let vals: Vec<f64> = (0..n)
            .flat_map(|i| ((i + 1)..n).filter_map(move |j| self.get(i, j)))
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

fn pair_entry(panel: &ReturnPanel, i: usize, j: usize, min_overlap: usize) -> (f64, usize) {
    match cross_correlation(panel.series(i), panel.series(j), 0, min_overlap) {
        Ok(c) => (c.value, c.overlap),
        Err(Error::InsufficientOverlap { found, .. }) => (f64::NAN, found),
        Err(_) => {
            let overlap = panel
                .series(i)
                .iter()
                .zip(panel.series(j))
                .filter(|(a, b)| a.is_some() && b.is_some())
                .count();
            (f64::NAN, overlap)
        }
    }
}

/// Equal-time correlation matrix on pairwise-complete observations.
///
/// Pairs below `min_overlap`, or constant on their overlap, are left missing;
/// [`eigendecompose`] refuses such a matrix.
pub fn correlation_matrix(panel: &ReturnPanel, min_overlap: usize) -> Result<CorrMatrix> {
    let n = panel.n_series();
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 series, got {n}")));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let compute = |&(i, j): &(usize, usize)| {
        if i == j {
            let (v, s) = pair_entry(panel, i, i, min_overlap);
            (if v.is_nan() { f64::NAN } else { 1.0 }, s)
        } else {
            pair_entry(panel, i, j, min_overlap)
        }
    };
    #[cfg(feature = "parallel")]
    let entries: Vec<(f64, usize)> = {
        use rayon::prelude::*;
        pairs.par_iter().map(compute).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let entries: Vec<(f64, usize)> = pairs.iter().map(compute).collect();

    let mut values = vec![f64::NAN; n * n];
    let mut support = vec![0; n * n];
    for (&(i, j), (v, s)) in pairs.iter().zip(entries) {
        values[i * n + j] = v;
        values[j * n + i] = v;
        support[i * n + j] = s;
        support[j * n + i] = s;
    }
    let m = CorrMatrix::from_values(panel.tickers.clone(), CorrKind::Raw, values, support)?;
    if !m.is_complete() {
        log::warn!(
            "correlation matrix has {} missing pairs",
            m.missing_pairs().len()
        );
    }
    Ok(m)
}

/// Mean of `C_{X_i,X_j}(tau)` over ordered pairs `i != j` with enough overlap.
pub fn mean_lagged_correlation(panel: &ReturnPanel, tau: usize, min_overlap: usize) -> Option<f64> {
    let n = panel.n_series();
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if let Ok(c) = cross_correlation(panel.series(i), panel.series(j), tau, min_overlap) {
                sum += c.value;
                count += 1;
            }
        }
    }
    (count > 0).then(|| sum / count as f64)
}

/// Wishart eigenvalue bounds `[1 -+ sqrt(1/Q)]^2` for `Q = n_obs / n_series`.
pub fn wishart_bounds(n_series: usize, n_obs: f64) -> Result<(f64, f64)> {
    if n_series == 0 {
        return Err(Error::Domain("n_series must be positive".into()));
    }
    wishart_bounds_q(n_obs / n_series as f64)
}

pub fn wishart_bounds_q(q: f64) -> Result<(f64, f64)> {
    if !(q.is_finite() && q > 1.0) {
        return Err(Error::Domain(format!("Q = T/N must exceed 1, got {q}")));
    }
    let r = (1.0 / q).sqrt();
    Ok(((1.0 - r).powi(2), (1.0 + r).powi(2)))
}

/// Descending eigen-decomposition with the Wishart bounds attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSystem {
    pub tickers: Vec<String>,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub q_ratio: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    #[serde(skip)]
    pair_support: Vec<usize>,
}

impl EigenSystem {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvalues strictly above the Wishart upper bound.
    pub fn signal_count(&self) -> usize {
        self.eigenvalues
            .iter()
            .take_while(|&&l| l > self.lambda_max)
            .count()
    }

    /// `sum_{alpha in modes} lambda_alpha u_alpha (x) u_alpha`, row-major.
    pub fn mode_sum(&self, modes: std::ops::Range<usize>) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n * n];
        for a in modes {
            let (l, u) = (self.eigenvalues[a], &self.eigenvectors[a]);
            for i in 0..n {
                let li = l * u[i];
                for j in 0..n {
                    out[i * n + j] += li * u[j];
                }
            }
        }
        out
    }

    /// Max-abs residual of the full reconstruction against `matrix`.
    pub fn reconstruction_residual(&self, matrix: &[f64]) -> f64 {
        self.mode_sum(0..self.n())
            .iter()
            .zip(matrix)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn normalize_sign(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|c| c.abs() > 1e-12) {
        if *first < 0.0 {
            v.iter_mut().for_each(|c| *c = -*c);
        }
    }
}

/// Spectral decomposition `C = sum lambda_alpha u_alpha (x) u_alpha`.
///
/// `n_obs` is the effective observation count used for `Q`; with a ragged
/// panel pass [`CorrMatrix::mean_pair_support`]. Eigenvectors have their first
/// non-negligible component positive; near-equal eigenvalues are ordered by
/// their eigenvectors lexicographically.
pub fn eigendecompose(corr: &CorrMatrix, n_obs: f64) -> Result<EigenSystem> {
    if !corr.is_complete() {
        return Err(Error::Integrity(format!(
            "correlation matrix has {} missing pairs",
            corr.missing_pairs().len()
        )));
    }
    corr.check_symmetric()?;
    let n = corr.n();
    let (lambda_min, lambda_max) = wishart_bounds(n, n_obs)?;
    let (values, mut vectors) = symmetric_eigen(corr.values(), n, EIGEN_TOL)?;
    vectors.iter_mut().for_each(|v| normalize_sign(v));

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let tie = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && tie(values[order[end - 1]], values[order[end]]) {
            end += 1;
        }
        order[start..end].sort_by(|&a, &b| {
            vectors[a]
                .iter()
                .zip(&vectors[b])
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        start = end;
    }

    Ok(EigenSystem {
        tickers: corr.tickers.clone(),
        eigenvalues: order.iter().map(|&k| values[k]).collect(),
        eigenvectors: order.iter().map(|&k| vectors[k].clone()).collect(),
        q_ratio: n_obs / n as f64,
        lambda_min,
        lambda_max,
        pair_support: corr.pair_support.clone(),
    })
}

/// Sector-mode correlation `sum_{alpha=2}^{alpha_max} lambda_alpha u_alpha (x) u_alpha`,
/// where `alpha_max` indexes the smallest eigenvalue still above `lambda_max`.
pub fn sector_correlation(eig: &EigenSystem) -> Result<CorrMatrix> {
    let signal = eig.signal_count();
    if signal == 0 {
        return Err(Error::EmptySector(format!(
            "no eigenvalue above lambda_max = {:.6}",
            eig.lambda_max
        )));
    }
    if signal == 1 {
        return Err(Error::EmptySector(
            "only the market mode lies above lambda_max".into(),
        ));
    }
    let n = eig.n();
    let mut values = eig.mode_sum(1..signal);
    // symmetrize exactly
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (values[i * n + j] + values[j * n + i]);
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    let support = if eig.pair_support.len() == n * n {
        eig.pair_support.clone()
    } else {
        vec![0; n * n]
    };
    CorrMatrix::from_values(eig.tickers.clone(), CorrKind::Sector, values, support)
}
