//! Price panels, calendar alignment and log-returns.
//!
//! Panels are ragged: every ticker keeps its own trading days, and the
//! return panel lives on the union calendar with an explicit missing mask.
//! A return at `t` is computed against the ticker's previous present price,
//! so single missing days are skipped over rather than dropped.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MIN_OBS: usize = 1000;
pub const DEFAULT_MIN_OVERLAP: usize = 250;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsvFormat {
    /// `date,ticker,close`
    Long,
    /// `date,<ticker>,<ticker>,...`
    Wide,
}

impl std::str::FromStr for CsvFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "long" => Ok(CsvFormat::Long),
            "wide" => Ok(CsvFormat::Wide),
            other => Err(Error::Config(format!("unknown csv format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceRecord {
    pub date: NaiveDate,
    pub ticker: String,
    pub close: f64,
}

/// Raw closing prices. No duplicate `(date, ticker)`, all prices positive.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PricePanel {
    records: Vec<PriceRecord>,
}

impl PricePanel {
    pub fn new(records: Vec<PriceRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !(r.close.is_finite() && r.close > 0.0) {
                return Err(Error::Integrity(format!(
                    "non-positive price {} for {} on {}",
                    r.close, r.ticker, r.date
                )));
            }
            if !seen.insert((r.date, r.ticker.as_str())) {
                return Err(Error::Integrity(format!(
                    "duplicate record for {} on {}",
                    r.ticker, r.date
                )));
            }
        }
        Ok(PricePanel { records })
    }

    pub fn records(&self) -> &[PriceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn tickers(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.ticker.as_str()).collect()
    }

    /// Writes the panel as a long-format CSV.
    pub fn write_long_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["date", "ticker", "close"])?;
        for r in &self.records {
            w.write_record([
                r.date.format("%Y-%m-%d").to_string(),
                r.ticker.clone(),
                r.close.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the panel as a wide CSV; absent prices are empty cells.
    pub fn write_wide_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let tickers: Vec<&str> = self.tickers().into_iter().collect();
        let col: HashMap<&str, usize> = tickers.iter().enumerate().map(|(i, t)| (*t, i)).collect();
        let mut rows: BTreeMap<NaiveDate, Vec<Option<f64>>> = BTreeMap::new();
        for r in &self.records {
            rows.entry(r.date)
                .or_insert_with(|| vec![None; tickers.len()])[col[r.ticker.as_str()]] =
                Some(r.close);
        }
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(tickers.iter().map(|t| t.to_string()));
        w.write_record(&header)?;
        for (date, prices) in rows {
            let mut row = vec![date.format("%Y-%m-%d").to_string()];
            row.extend(
                prices
                    .iter()
                    .map(|p| p.map(|v| v.to_string()).unwrap_or_default()),
            );
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    // chrono accepts some non-padded forms; insist on YYYY-MM-DD exactly.
    let b = s.as_bytes();
    if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
        return None;
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
}

fn parse_price(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("non-numeric price `{s}`"))?;
    if !v.is_finite() || v <= 0.0 {
        return Err(format!("non-positive price {s}"));
    }
    Ok(v)
}

/// Parses a price CSV from disk.
pub fn parse_price_csv(path: &Path, format: CsvFormat) -> Result<PricePanel> {
    let file = std::fs::File::open(path)?;
    parse_price_reader(file, format, path)
}

/// Parses a price CSV from any reader; `origin` is used in error messages.
pub fn parse_price_reader<R: Read>(
    reader: R,
    format: CsvFormat,
    origin: &Path,
) -> Result<PricePanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let parse_err = |line: u64, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(parse_err(1, "missing header row".into()));
    }
    let mut records = Vec::new();
    match format {
        CsvFormat::Long => {
            if header != ["date", "ticker", "close"] {
                return Err(parse_err(
                    1,
                    format!(
                        "expected header `date,ticker,close`, found `{}`",
                        header.join(",")
                    ),
                ));
            }
            for row in rdr.records() {
                let row = row?;
                let line = row.position().map_or(0, |p| p.line());
                if row.len() != 3 {
                    return Err(parse_err(
                        line,
                        format!("expected 3 fields, found {}", row.len()),
                    ));
                }
                let date = parse_date(&row[0])
                    .ok_or_else(|| parse_err(line, format!("malformed date `{}`", &row[0])))?;
                let close = parse_price(&row[2]).map_err(|m| parse_err(line, m))?;
                records.push(PriceRecord {
                    date,
                    ticker: row[1].to_string(),
                    close,
                });
            }
        }
        CsvFormat::Wide => {
            if header[0] != "date" || header.len() < 2 {
                return Err(parse_err(
                    1,
                    "expected header `date,<ticker>...` with at least one ticker".into(),
                ));
            }
            let mut unique = HashSet::new();
            for t in &header[1..] {
                if t.is_empty() || !unique.insert(t.as_str()) {
                    return Err(Error::Integrity(format!(
                        "empty or duplicate ticker column `{t}`"
                    )));
                }
            }
            for row in rdr.records() {
                let row = row?;
                let line = row.position().map_or(0, |p| p.line());
                if row.len() != header.len() {
                    return Err(parse_err(
                        line,
                        format!("expected {} fields, found {}", header.len(), row.len()),
                    ));
                }
                let date = parse_date(&row[0])
                    .ok_or_else(|| parse_err(line, format!("malformed date `{}`", &row[0])))?;
                for (ticker, cell) in header[1..].iter().zip(row.iter().skip(1)) {
                    if cell.is_empty() {
                        continue;
                    }
                    let close = parse_price(cell).map_err(|m| parse_err(line, m))?;
                    records.push(PriceRecord {
                        date,
                        ticker: ticker.clone(),
                        close,
                    });
                }
            }
        }
    }
    PricePanel::new(records)
}

/// Reads a `ticker,label` file.
pub fn parse_labels(path: &Path) -> Result<BTreeMap<String, String>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != ["ticker", "label"] {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "expected header `ticker,label`".into(),
        });
    }
    let mut labels = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        labels.insert(row[0].to_string(), row[1].to_string());
    }
    Ok(labels)
}

/// Ticker removed by the minimum-observation gate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedTicker {
    pub ticker: String,
    pub observations: usize,
}

/// Log-returns on the union calendar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnPanel {
    pub tickers: Vec<String>,
    pub dates: Vec<NaiveDate>,
    /// One row per ticker, one column per date; `None` marks a missing return.
    pub returns: Vec<Vec<Option<f64>>>,
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
}

impl ReturnPanel {
    /// Builds a panel from complete equal-length series on a synthetic
    /// business-day calendar. Useful for generated data and tests.
    pub fn from_complete(tickers: Vec<String>, series: Vec<Vec<f64>>) -> Result<Self> {
        if tickers.len() != series.len() {
            return Err(Error::Integrity("ticker/series count mismatch".into()));
        }
        let t = series.first().map_or(0, Vec::len);
        if series.iter().any(|s| s.len() != t) {
            return Err(Error::Integrity("series lengths differ".into()));
        }
        let start = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
        let dates = (0..t)
            .map(|k| start + chrono::Days::new(k as u64))
            .collect();
        Ok(ReturnPanel {
            tickers,
            dates,
            returns: series
                .into_iter()
                .map(|s| s.into_iter().map(Some).collect())
                .collect(),
            labels: BTreeMap::new(),
        })
    }

    pub fn n_series(&self) -> usize {
        self.tickers.len()
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn series(&self, i: usize) -> &[Option<f64>] {
        &self.returns[i]
    }

    pub fn observations(&self, i: usize) -> usize {
        self.returns[i].iter().filter(|v| v.is_some()).count()
    }

    pub fn label(&self, i: usize) -> Option<&str> {
        self.labels.get(&self.tickers[i]).map(String::as_str)
    }

    pub fn with_labels(mut self, labels: BTreeMap<String, String>) -> Self {
        self.labels = labels;
        self
    }

    /// Drops tickers with fewer than `min_obs` returns, then dates left empty.
    pub fn filter_min_obs(&self, min_obs: usize) -> (ReturnPanel, Vec<DroppedTicker>) {
        let mut keep = Vec::new();
        let mut dropped = Vec::new();
        for i in 0..self.n_series() {
            let n = self.observations(i);
            if n >= min_obs {
                keep.push(i);
            } else {
                dropped.push(DroppedTicker {
                    ticker: self.tickers[i].clone(),
                    observations: n,
                });
            }
        }
        let live_dates: Vec<usize> = (0..self.n_dates())
            .filter(|&t| keep.iter().any(|&i| self.returns[i][t].is_some()))
            .collect();
        let tickers: Vec<String> = keep.iter().map(|&i| self.tickers[i].clone()).collect();
        let labels = self
            .labels
            .iter()
            .filter(|(k, _)| tickers.contains(k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let panel = ReturnPanel {
            dates: live_dates.iter().map(|&t| self.dates[t]).collect(),
            returns: keep
                .iter()
                .map(|&i| live_dates.iter().map(|&t| self.returns[i][t]).collect())
                .collect(),
            tickers,
            labels,
        };
        (panel, dropped)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Computes `ln S(t) - ln S(t_prev)` per ticker and applies the `min_obs` gate.
///
/// Tickers are ordered lexicographically. Returns the panel and the tickers
/// that failed the gate.
pub fn log_returns(
    panel: &PricePanel,
    min_obs: usize,
) -> Result<(ReturnPanel, Vec<DroppedTicker>)> {
    if panel.is_empty() {
        return Err(Error::EmptyPanel("price panel has no records".into()));
    }
    if min_obs < 2 {
        return Err(Error::Domain(format!(
            "min_obs must be >= 2, got {min_obs}"
        )));
    }
    let mut by_ticker: BTreeMap<&str, Vec<(NaiveDate, f64)>> = BTreeMap::new();
    for r in panel.records() {
        by_ticker
            .entry(&r.ticker)
            .or_default()
            .push((r.date, r.close));
    }
    let mut per_ticker: Vec<(String, Vec<(NaiveDate, f64)>)> = Vec::with_capacity(by_ticker.len());
    let mut all_dates = BTreeSet::new();
    for (ticker, mut prices) in by_ticker {
        prices.sort_by_key(|p| p.0);
        let rets: Vec<(NaiveDate, f64)> = prices
            .windows(2)
            .map(|w| (w[1].0, w[1].1.ln() - w[0].1.ln()))
            .collect();
        all_dates.extend(rets.iter().map(|r| r.0));
        per_ticker.push((ticker.to_string(), rets));
    }
    let dates: Vec<NaiveDate> = all_dates.into_iter().collect();
    let index: HashMap<NaiveDate, usize> = dates.iter().enumerate().map(|(k, d)| (*d, k)).collect();
    let mut tickers = Vec::with_capacity(per_ticker.len());
    let mut returns = Vec::with_capacity(per_ticker.len());
    for (ticker, rets) in per_ticker {
        let mut row = vec![None; dates.len()];
        for (d, r) in rets {
            row[index[&d]] = Some(r);
        }
        tickers.push(ticker);
        returns.push(row);
    }
    let full = ReturnPanel {
        tickers,
        dates,
        returns,
        labels: BTreeMap::new(),
    };
    let (filtered, dropped) = full.filter_min_obs(min_obs);
    for d in &dropped {
        log::info!(
            "dropping {}: {} returns < min_obs {}",
            d.ticker,
            d.observations,
            min_obs
        );
    }
    if filtered.n_series() == 0 {
        return Err(Error::EmptyPanel(format!(
            "all {} tickers have fewer than {} returns",
            dropped.len(),
            min_obs
        )));
    }
    Ok((filtered, dropped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn long(s: &str) -> Result<PricePanel> {
        parse_price_reader(s.as_bytes(), CsvFormat::Long, Path::new("mem.csv"))
    }

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    #[test]
    fn parses_long_csv() {
        let p = long("date,ticker,close\n2020-01-02,AAA,10.0\n2020-01-03,AAA,11.0\n").unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.records()[1].close, 11.0);
    }

    #[test]
    fn non_positive_price_reports_line() {
        let err = long("date,ticker,close\n2020-01-02,AAA,-1.0\n").unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("non-positive"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_and_bad_date() {
        let err = long("date,ticker,close\n2020-01-02,AAA,1\n2020-01-03,AAA,abc\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = long("date,ticker,close\n2020/01/02,AAA,1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
        let err = long("date,ticker,close\n2020-1-2,AAA,1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn duplicate_is_integrity_error() {
        let err = long("date,ticker,close\n2020-01-02,AAA,1\n2020-01-02,AAA,2\n").unwrap_err();
        assert!(matches!(err, Error::Integrity(_)), "{err:?}");
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(long("day,ticker,close\n2020-01-02,AAA,1\n").is_err());
    }

    #[test]
    fn parses_wide_csv() {
        let csv = "date,AAA,BBB\n\
                   2020-01-01,1,2\n2020-01-02,1.1,2.1\n2020-01-03,1.2,2.2\n\
                   2020-01-06,1.3,2.3\n2020-01-07,1.4,2.4\n";
        let p = parse_price_reader(csv.as_bytes(), CsvFormat::Wide, Path::new("w.csv")).unwrap();
        assert_eq!(p.len(), 10);
        assert_eq!(p.tickers().len(), 2);
    }

    #[test]
    fn wide_blank_cells_are_missing() {
        let csv = "date,AAA,BBB\n2020-01-01,1,\n2020-01-02,1.1,2.1\n";
        let p = parse_price_reader(csv.as_bytes(), CsvFormat::Wide, Path::new("w.csv")).unwrap();
        assert_eq!(p.len(), 3);
    }

    fn single(prices: &[f64]) -> PricePanel {
        let start = d("2020-01-01");
        PricePanel::new(
            prices
                .iter()
                .enumerate()
                .map(|(k, &close)| PriceRecord {
                    date: start + chrono::Days::new(k as u64),
                    ticker: "AAA".into(),
                    close,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn log_returns_of_e() {
        let e = std::f64::consts::E;
        let (rp, dropped) = log_returns(&single(&[1.0, e, e]), 2).unwrap();
        assert!(dropped.is_empty());
        assert_eq!(rp.returns[0], vec![Some(1.0), Some(0.0)]);
    }

    #[test]
    fn constant_prices_give_zero_returns() {
        let (rp, _) = log_returns(&single(&[100.0, 100.0, 100.0]), 2).unwrap();
        assert_eq!(rp.returns[0], vec![Some(0.0), Some(0.0)]);
    }

    #[test]
    fn short_ticker_dropped_and_reported() {
        let start = d("2000-01-01");
        let mut recs = Vec::new();
        for (ticker, n_prices) in [("LONG", 1001), ("SHORT", 1000)] {
            for k in 0..n_prices {
                recs.push(PriceRecord {
                    date: start + chrono::Days::new(k),
                    ticker: ticker.into(),
                    close: 10.0 + (k % 7) as f64,
                });
            }
        }
        let (rp, dropped) = log_returns(&PricePanel::new(recs).unwrap(), DEFAULT_MIN_OBS).unwrap();
        assert_eq!(rp.tickers, vec!["LONG"]);
        assert_eq!(
            dropped,
            vec![DroppedTicker {
                ticker: "SHORT".into(),
                observations: 999
            }]
        );
    }

    #[test]
    fn all_dropped_is_error() {
        let err = log_returns(&single(&[1.0, 2.0]), 5).unwrap_err();
        assert!(matches!(err, Error::EmptyPanel(_)));
    }

    #[test]
    fn gap_return_spans_missing_day() {
        let recs = vec![
            PriceRecord {
                date: d("2020-01-01"),
                ticker: "B".into(),
                close: 1.0,
            },
            PriceRecord {
                date: d("2020-01-03"),
                ticker: "B".into(),
                close: 3.0,
            },
            PriceRecord {
                date: d("2020-01-04"),
                ticker: "B".into(),
                close: 3.0,
            },
            PriceRecord {
                date: d("2020-01-01"),
                ticker: "A".into(),
                close: 1.0,
            },
            PriceRecord {
                date: d("2020-01-02"),
                ticker: "A".into(),
                close: 1.0,
            },
            PriceRecord {
                date: d("2020-01-03"),
                ticker: "A".into(),
                close: 1.0,
            },
        ];
        let (rp, _) = log_returns(&PricePanel::new(recs).unwrap(), 2).unwrap();
        assert_eq!(
            rp.dates,
            vec![d("2020-01-02"), d("2020-01-03"), d("2020-01-04")]
        );
        let b = rp.tickers.iter().position(|t| t == "B").unwrap();
        assert_eq!(rp.returns[b], vec![None, Some(3f64.ln()), Some(0.0)]);
    }

    proptest! {
        #[test]
        fn cumulative_returns_recover_last_price(
            prices in prop::collection::vec(0.01f64..1e4, 3..60)
        ) {
            let (rp, _) = log_returns(&single(&prices), 2).unwrap();
            let total: f64 = rp.returns[0].iter().map(|r| r.unwrap()).sum();
            let last = prices[0] * total.exp();
            let want = *prices.last().unwrap();
            prop_assert!(((last - want) / want).abs() < 1e-12);
        }

        #[test]
        fn filter_is_idempotent(
            lens in prop::collection::vec(3usize..30, 1..6),
            min_obs in 2usize..25,
        ) {
            let start = d("2020-01-01");
            let mut recs = Vec::new();
            for (i, n) in lens.iter().enumerate() {
                for k in 0..*n {
                    recs.push(PriceRecord {
                        date: start + chrono::Days::new((k * (i + 1)) as u64),
                        ticker: format!("T{i}"),
                        close: 1.0 + k as f64,
                    });
                }
            }
            let (full, _) = log_returns(&PricePanel::new(recs).unwrap(), 2).unwrap();
            let (once, _) = full.filter_min_obs(min_obs);
            let (twice, dropped) = once.filter_min_obs(min_obs);
            prop_assert!(dropped.is_empty());
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn json_roundtrip_is_bit_exact(
            rows in prop::collection::vec(prop::collection::vec(prop::option::of(-1.0f64..1.0), 8), 1..4)
        ) {
            let n = rows.len();
            let mut panel = ReturnPanel::from_complete(
                (0..n).map(|i| format!("S{i}")).collect(),
                vec![vec![0.0; 8]; n],
            ).unwrap();
            panel.returns = rows;
            let back = ReturnPanel::from_json(&panel.to_json().unwrap()).unwrap();
            for (a, b) in panel.returns.iter().flatten().zip(back.returns.iter().flatten()) {
                prop_assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
            }
            prop_assert_eq!(panel, back);
        }
    }
}
