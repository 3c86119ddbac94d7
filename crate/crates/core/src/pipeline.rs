//! End-to-end run: ingest → spectral → netfilter → community → infodyn →
//! flows, writing one artifact per stage output.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::community::{self, DetectConfig, Partition};
use crate::error::{Error, Result};
use crate::flows::{self, FlowNetwork, MarketSummary};
use crate::infodyn::{self, RenyiForm, SymbolSeries, TeEstimator, TeTable};
use crate::ingest::{self, CsvFormat, DroppedTicker, ReturnPanel};
use crate::netfilter::{self, FilterMethod, FilteredGraph};
use crate::spectral::{self, CorrKind, CorrMatrix, EigenSystem};

pub const OUT_DIR_ENV: &str = "INFOFLOW_OUT_DIR";

/// Flat run configuration; every key has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub format: CsvFormat,
    pub labels: Option<PathBuf>,
    pub market: String,
    pub min_obs: usize,
    pub min_overlap: usize,
    pub correlation: CorrKind,
    pub filter: FilterMethod,
    pub teleport: f64,
    pub attempts: usize,
    pub edges: Vec<f64>,
    pub m: usize,
    pub l: usize,
    pub q: Vec<f64>,
    pub renyi_form: RenyiForm,
    pub n_shuffles: usize,
    pub percentile: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: PathBuf::new(),
            format: CsvFormat::Long,
            labels: None,
            market: "market".into(),
            min_obs: ingest::DEFAULT_MIN_OBS,
            min_overlap: ingest::DEFAULT_MIN_OVERLAP,
            correlation: CorrKind::Sector,
            filter: FilterMethod::Pmfg,
            teleport: community::DEFAULT_TELEPORT,
            attempts: community::DEFAULT_ATTEMPTS,
            edges: infodyn::DEFAULT_EDGES.to_vec(),
            m: 1,
            l: 1,
            q: vec![1.0, 0.75],
            renyi_form: RenyiForm::Conditional,
            n_shuffles: infodyn::DEFAULT_SHUFFLES,
            percentile: flows::DEFAULT_PERCENTILE,
            seed: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.min_obs < 2 {
            return bad(format!("min_obs must be >= 2, got {}", self.min_obs));
        }
        if self.min_overlap < 3 {
            return bad(format!(
                "min_overlap must be >= 3, got {}",
                self.min_overlap
            ));
        }
        if !(self.teleport > 0.0 && self.teleport < 1.0) {
            return bad(format!(
                "teleport must lie in (0, 1), got {}",
                self.teleport
            ));
        }
        if self.attempts == 0 {
            return bad("attempts must be >= 1".into());
        }
        if self.edges.is_empty()
            || self.edges.iter().any(|&e| !(e > 0.0 && e < 1.0))
            || self.edges.windows(2).any(|w| w[0] >= w[1])
        {
            return bad(format!(
                "edges must be strictly increasing in (0, 1): {:?}",
                self.edges
            ));
        }
        if self.m == 0 || self.l == 0 {
            return bad("history lengths m and l must be >= 1".into());
        }
        if self.q.is_empty() || self.q.iter().any(|&q| !(q.is_finite() && q > 0.0)) {
            return bad(format!("every q must be > 0: {:?}", self.q));
        }
        if !self.q.contains(&1.0) {
            return bad("q must include 1.0; other orders inherit its significance".into());
        }
        if self.n_shuffles == 0 {
            return bad("n_shuffles must be >= 1".into());
        }
        if !(self.percentile > 0.0 && self.percentile < 1.0) {
            return bad(format!(
                "percentile must lie in (0, 1), got {}",
                self.percentile
            ));
        }
        if !self.input.is_file() {
            return bad(format!("input file {} not found", self.input.display()));
        }
        if let Some(l) = &self.labels {
            if !l.is_file() {
                return bad(format!("labels file {} not found", l.display()));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML rendering, excluding `out_dir`.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    fn estimator(&self) -> TeEstimator {
        TeEstimator {
            m: self.m,
            l: self.l,
            qs: self.q.clone(),
            n_shuffles: self.n_shuffles,
            renyi_form: self.renyi_form,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Spectral,
    Netfilter,
    Community,
    Infodyn,
    Flows,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Spectral => "spectral",
            Stage::Netfilter => "netfilter",
            Stage::Community => "community",
            Stage::Infodyn => "infodyn",
            Stage::Flows => "flows",
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ingest" => Stage::Ingest,
            "spectral" => Stage::Spectral,
            "netfilter" => Stage::Netfilter,
            "community" => Stage::Community,
            "infodyn" => Stage::Infodyn,
            "flows" => Stage::Flows,
            other => return Err(Error::Config(format!("unknown stage `{other}`"))),
        })
    }
}

/// Which stages a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plan {
    /// Every stage up to and including the given one.
    Through(Stage),
    /// Ingest and pairwise transfer entropy only.
    PairwiseTe,
}

impl Plan {
    fn runs(self, stage: Stage) -> bool {
        match self {
            Plan::Through(last) => stage <= last,
            Plan::PairwiseTe => matches!(stage, Stage::Ingest | Stage::Infodyn),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    version: &'static str,
    status: &'a str,
    failed_stage: Option<&'static str>,
    error: Option<String>,
    config_hash: &'a str,
    config: &'a PipelineConfig,
    seeds: BTreeMap<&'static str, u64>,
    timings_ms: BTreeMap<&'static str, f64>,
    dropped: &'a [DroppedTicker],
    skipped_pairs: usize,
    summary_averaging: &'static str,
    artifacts: BTreeMap<String, String>,
}

/// Everything a run produced, for callers that want the values in memory.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub panel: Option<ReturnPanel>,
    pub dropped: Vec<DroppedTicker>,
    pub raw_corr: Option<CorrMatrix>,
    pub eigen: Option<EigenSystem>,
    pub filter_corr: Option<CorrMatrix>,
    pub graph: Option<FilteredGraph>,
    pub partition: Option<Partition>,
    pub te: Option<TeTable>,
    pub flows: Option<FlowNetwork>,
    pub summary: Option<MarketSummary>,
    pub out_dir: PathBuf,
}

/// Wraps a payload with the config hash for JSON artifacts.
#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    config_hash: &'a str,
    #[serde(flatten)]
    payload: T,
}

struct Writer<'a> {
    dir: &'a Path,
    hash: &'a str,
    artifacts: BTreeMap<String, String>,
}

impl Writer<'_> {
    fn bytes(&mut self, name: &str, data: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), data)?;
        self.artifacts
            .insert(name.to_string(), hex::encode(Sha256::digest(data)));
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, payload: T) -> Result<()> {
        let stamped = Stamped {
            config_hash: self.hash,
            payload,
        };
        let mut text = serde_json::to_string_pretty(&stamped)?;
        text.push('\n');
        self.bytes(name, text.as_bytes())
    }

    fn csv(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.bytes(name, &buf)
    }

    fn dot(&mut self, name: &str, body: String) -> Result<()> {
        let text = format!("// config_hash={}\n{body}", self.hash);
        self.bytes(name, text.as_bytes())
    }
}

fn symbolize_panel(panel: &ReturnPanel, edges: &[f64]) -> Result<Vec<SymbolSeries>> {
    (0..panel.n_series())
        .map(|i| infodyn::symbolize(panel.series(i), edges))
        .collect()
}

/// Runs every stage of `plan`, writing artifacts into `config.out_dir`.
///
/// On a stage error the artifacts already written are kept and
/// `run_manifest.json` records the failing stage.
pub fn run_pipeline(config: &PipelineConfig, plan: Plan) -> Result<RunOutput> {
    config.validate()?;
    let hash = config.hash();
    fs::create_dir_all(&config.out_dir)?;
    let mut w = Writer {
        dir: &config.out_dir,
        hash: &hash,
        artifacts: BTreeMap::new(),
    };
    let mut out = RunOutput {
        out_dir: config.out_dir.clone(),
        ..Default::default()
    };
    let mut timings = BTreeMap::new();
    let mut current = Stage::Ingest;
    let result = run_stages(config, plan, &mut w, &mut out, &mut timings, &mut current);

    let mut seeds = BTreeMap::new();
    seeds.insert("seed", config.seed);
    seeds.insert(
        "community_stream",
        crate::seeds::stream_seed(config.seed, crate::seeds::Stream::Community),
    );
    seeds.insert(
        "shuffle_stream",
        crate::seeds::stream_seed(config.seed, crate::seeds::Stream::Shuffle),
    );
    let (status, failed_stage, error) = match &result {
        Ok(()) => ("ok", None, None),
        Err(e) => ("failed", Some(current.name()), Some(e.to_string())),
    };
    let manifest = Manifest {
        version: crate::VERSION,
        status,
        failed_stage,
        error,
        config_hash: &hash,
        config,
        seeds,
        timings_ms: timings,
        dropped: &out.dropped,
        skipped_pairs: out.te.as_ref().map_or(0, |t| t.skipped.len()),
        summary_averaging: "STE and RTE averaged over all ordered stock pairs",
        artifacts: w.artifacts.clone(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(config.out_dir.join("run_manifest.json"), text)?;
    result.map(|()| out)
}

fn run_stages(
    config: &PipelineConfig,
    plan: Plan,
    w: &mut Writer,
    out: &mut RunOutput,
    timings: &mut BTreeMap<&'static str, f64>,
    current: &mut Stage,
) -> Result<()> {
    let mut clock = |stage: Stage, start: Instant| {
        timings.insert(stage.name(), start.elapsed().as_secs_f64() * 1e3);
    };

    *current = Stage::Ingest;
    let t = Instant::now();
    let prices = ingest::parse_price_csv(&config.input, config.format)?;
    let (mut panel, dropped) = ingest::log_returns(&prices, config.min_obs)?;
    for d in &dropped {
        log::info!("dropped {} ({} returns)", d.ticker, d.observations);
    }
    let labels = match &config.labels {
        Some(p) => ingest::parse_labels(p)?,
        None => BTreeMap::new(),
    };
    panel = panel.with_labels(labels.clone());
    out.dropped = dropped;
    clock(Stage::Ingest, t);

    if plan.runs(Stage::Spectral) {
        *current = Stage::Spectral;
        let t = Instant::now();
        let raw = spectral::correlation_matrix(&panel, config.min_overlap)?;
        let eig = spectral::eigendecompose(&raw, raw.mean_pair_support())?;
        #[derive(Serialize)]
        struct EigenArtifact<'a> {
            eigen: &'a EigenSystem,
        }
        w.json("eigen.json", EigenArtifact { eigen: &eig })?;
        let filter_corr = match config.correlation {
            CorrKind::Raw => raw.clone(),
            CorrKind::Sector => spectral::sector_correlation(&eig)?,
        };
        #[derive(Serialize)]
        struct CorrArtifact<'a> {
            raw: &'a CorrMatrix,
            filtered: &'a CorrMatrix,
        }
        w.json(
            "corr.json",
            CorrArtifact {
                raw: &raw,
                filtered: &filter_corr,
            },
        )?;
        out.raw_corr = Some(raw);
        out.eigen = Some(eig);
        out.filter_corr = Some(filter_corr);
        clock(Stage::Spectral, t);
    }

    if plan.runs(Stage::Netfilter) {
        *current = Stage::Netfilter;
        let t = Instant::now();
        let corr = out.filter_corr.as_ref().expect("spectral ran");
        let edges = netfilter::adjacency_from_correlation(corr);
        let graph = match config.filter {
            FilterMethod::Mst => netfilter::mst(&edges, corr.n())?,
            FilterMethod::Pmfg => netfilter::pmfg(&edges, corr.n())?,
        }
        .with_nodes(corr.tickers.clone())?;
        #[derive(Serialize)]
        struct GraphArtifact<'a> {
            graph: &'a FilteredGraph,
        }
        w.json("graph.json", GraphArtifact { graph: &graph })?;
        w.dot("graph.dot", graph.to_dot(&config.market))?;
        out.graph = Some(graph);
        clock(Stage::Netfilter, t);
    }

    if plan.runs(Stage::Community) {
        *current = Stage::Community;
        let t = Instant::now();
        let graph = out.graph.as_ref().expect("netfilter ran");
        let det = community::detect_communities_traced(
            graph,
            &DetectConfig {
                teleport: config.teleport,
                attempts: config.attempts,
                seed: config.seed,
            },
        )?;
        let partition = det.partition;
        let lbl = (!labels.is_empty()).then_some(&labels);
        w.csv("partition.csv", |buf| partition.write_csv(buf, lbl))?;
        out.partition = Some(partition);
        clock(Stage::Community, t);
    }

    if plan.runs(Stage::Infodyn) {
        *current = Stage::Infodyn;
        let t = Instant::now();
        let symbols = symbolize_panel(&panel, &config.edges)?;
        let table =
            infodyn::pairwise_te(&symbols, &panel.tickers, &config.estimator(), config.seed)?;
        w.csv("te_pairs.csv", |buf| table.write_csv(buf))?;
        out.te = Some(table);
        clock(Stage::Infodyn, t);
    }

    if plan.runs(Stage::Flows) {
        *current = Stage::Flows;
        let t = Instant::now();
        let partition = out.partition.as_ref().expect("community ran");
        let table = out.te.as_ref().expect("infodyn ran");
        let net = flows::flow_network(table, partition, &labels, config.percentile)?;
        #[derive(Serialize)]
        struct FlowsArtifact<'a> {
            config: &'a PipelineConfig,
            network: &'a FlowNetwork,
        }
        w.json(
            "flows.json",
            FlowsArtifact {
                config,
                network: &net,
            },
        )?;
        w.dot("flows.dot", net.to_dot(&config.market))?;
        let summary = flows::market_summary(
            &config.market,
            &panel,
            out.raw_corr.as_ref().expect("spectral ran"),
            table,
            partition,
            config.min_overlap,
        );
        w.csv("summary.csv", |buf| summary.write_csv(buf))?;
        out.flows = Some(net);
        out.summary = Some(summary);
        clock(Stage::Flows, t);
    }
    out.panel = Some(panel);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = PipelineConfig::default();
        let back = PipelineConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(c, back);
        let partial =
            PipelineConfig::from_toml("seed = 7\nq = [1.0, 0.5]\nfilter = \"mst\"\n").unwrap();
        assert_eq!(partial.seed, 7);
        assert_eq!(partial.filter, FilterMethod::Mst);
        assert_eq!(partial.min_obs, 1000);
        assert!(PipelineConfig::from_toml("bogus = 1\n").is_err());
    }

    #[test]
    fn hash_ignores_out_dir_only() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.out_dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn validation_rejects_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("p.csv");
        fs::write(&input, "date,ticker,close\n").unwrap();
        let ok = PipelineConfig {
            input: input.clone(),
            ..Default::default()
        };
        assert!(ok.validate().is_ok());
        let cases = [
            PipelineConfig {
                q: vec![1.0, 0.0],
                ..ok.clone()
            },
            PipelineConfig {
                q: vec![0.75],
                ..ok.clone()
            },
            PipelineConfig {
                percentile: 1.0,
                ..ok.clone()
            },
            PipelineConfig {
                teleport: 0.0,
                ..ok.clone()
            },
            PipelineConfig {
                edges: vec![0.5, 0.2],
                ..ok.clone()
            },
            PipelineConfig {
                input: dir.path().join("missing.csv"),
                ..ok.clone()
            },
        ];
        for c in cases {
            assert!(matches!(c.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn stage_order_and_plans() {
        assert!(Stage::Ingest < Stage::Flows);
        assert!(Plan::Through(Stage::Spectral).runs(Stage::Spectral));
        assert!(!Plan::Through(Stage::Spectral).runs(Stage::Netfilter));
        assert!(Plan::PairwiseTe.runs(Stage::Infodyn));
        assert!(!Plan::PairwiseTe.runs(Stage::Community));
        assert_eq!("netfilter".parse::<Stage>().unwrap(), Stage::Netfilter);
    }
}
