//! Synthetic panels with known structure.

use chrono::NaiveDate;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ingest::{PricePanel, PriceRecord, ReturnPanel};
use crate::seeds;

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn tickers(n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len().max(2);
    (0..n).map(|i| format!("S{i:0width$}")).collect()
}

/// `n` independent standard-normal series of length `t`.
pub fn iid_gaussian_panel(n: usize, t: usize, seed: u64) -> ReturnPanel {
    let mut rng = seeds::rng(seed);
    let series = (0..n)
        .map(|_| (0..t).map(|_| normal(&mut rng)).collect())
        .collect();
    ReturnPanel::from_complete(tickers(n), series).expect("equal lengths")
}

/// Binary copy process: `y` IID uniform on {0, 1}, `x(t+1) = y(t)`.
pub fn copy_process(len: usize, seed: u64) -> (Vec<u8>, Vec<u8>) {
    let mut rng = seeds::rng(seed);
    let y: Vec<u8> = (0..len).map(|_| rng.random_range(0..2u8)).collect();
    let mut x = vec![0u8; len];
    x[0] = rng.random_range(0..2u8);
    x[1..].copy_from_slice(&y[..len - 1]);
    (x, y)
}

/// Noisy copy: `x(t+1) = y(t)` with probability `1 - noise`, else a fresh
/// uniform symbol. Both series over `alphabet` symbols.
pub fn noisy_copy_process(len: usize, alphabet: u8, noise: f64, seed: u64) -> (Vec<u8>, Vec<u8>) {
    let mut rng = seeds::rng(seed);
    let y: Vec<u8> = (0..len).map(|_| rng.random_range(0..alphabet)).collect();
    let mut x = vec![0u8; len];
    x[0] = rng.random_range(0..alphabet);
    for t in 1..len {
        x[t] = if rng.random::<f64>() < noise {
            rng.random_range(0..alphabet)
        } else {
            y[t - 1]
        };
    }
    (x, y)
}

/// Directed lag-one coupling between two sector factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub source: usize,
    pub target: usize,
    /// Weight of the source factor's previous value in the target factor.
    pub strength: f64,
}

/// Factor model: `r_i(t) = a m(t) + b f_{s(i)}(t) + c e_i(t)` with
/// `c = sqrt(1 - a^2 - b^2)`, all innovations standard normal.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSectors {
    pub sectors: usize,
    pub per_sector: usize,
    pub length: usize,
    pub market_loading: f64,
    pub sector_loading: f64,
    pub coupling: Option<Coupling>,
    pub seed: u64,
}

impl Default for PlantedSectors {
    fn default() -> Self {
        PlantedSectors {
            sectors: 4,
            per_sector: 10,
            length: 2500,
            market_loading: 0.35,
            sector_loading: 0.75,
            coupling: None,
            seed: 1,
        }
    }
}

impl PlantedSectors {
    /// Returns the panel and each series' planted sector. Tickers are
    /// grouped by sector; the label map holds `sector<k>`.
    pub fn generate(&self) -> (ReturnPanel, Vec<usize>) {
        let (a, b) = (self.market_loading, self.sector_loading);
        let c = (1.0 - a * a - b * b).max(0.0).sqrt();
        let mut rng = seeds::rng(seeds::sub_seed(self.seed, seeds::Stream::Synthetic, 0));
        let t_len = self.length;
        let market: Vec<f64> = (0..t_len).map(|_| normal(&mut rng)).collect();
        let mut factors: Vec<Vec<f64>> = (0..self.sectors)
            .map(|_| (0..t_len).map(|_| normal(&mut rng)).collect())
            .collect();
        if let Some(cp) = self.coupling {
            let g = cp.strength.clamp(-1.0, 1.0);
            let keep = (1.0 - g * g).sqrt();
            let src = factors[cp.source].clone();
            let dst = &mut factors[cp.target];
            for t in (1..t_len).rev() {
                dst[t] = keep * dst[t] + g * src[t - 1];
            }
        }
        let n = self.sectors * self.per_sector;
        let names = tickers(n);
        let mut series = Vec::with_capacity(n);
        let mut truth = Vec::with_capacity(n);
        for i in 0..n {
            let s = i / self.per_sector;
            truth.push(s);
            series.push(
                (0..t_len)
                    .map(|t| a * market[t] + b * factors[s][t] + c * normal(&mut rng))
                    .collect(),
            );
        }
        let labels = names
            .iter()
            .zip(&truth)
            .map(|(t, s)| (t.clone(), format!("sector{s}")))
            .collect();
        let panel = ReturnPanel::from_complete(names, series)
            .expect("equal lengths")
            .with_labels(labels);
        (panel, truth)
    }
}

/// Integrates daily returns (scaled by `vol`) into prices starting at 100.
pub fn prices_from_returns(panel: &ReturnPanel, vol: f64) -> PricePanel {
    let start = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
    let mut records = Vec::new();
    for (i, ticker) in panel.tickers.iter().enumerate() {
        let mut log_price = 100f64.ln();
        records.push(PriceRecord {
            date: start,
            ticker: ticker.clone(),
            close: 100.0,
        });
        for (k, r) in panel.series(i).iter().enumerate() {
            if let Some(r) = r {
                log_price += vol * r;
                records.push(PriceRecord {
                    date: start + chrono::Days::new(k as u64 + 1),
                    ticker: ticker.clone(),
                    close: log_price.exp(),
                });
            }
        }
    }
    PricePanel::new(records).expect("generated prices are valid")
}
