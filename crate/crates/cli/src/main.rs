use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use infoflow::infodyn::{self, RenyiForm, TeEstimator};
use infoflow::ingest::CsvFormat;
use infoflow::netfilter::FilterMethod;
use infoflow::pipeline::{self, PipelineConfig, Plan, Stage};
use infoflow::spectral::{self, CorrKind};
use infoflow::Error;

const EXIT_DATA: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "infoflow",
    version,
    about = "Correlation communities and transfer-entropy flows"
)]
struct Cli {
    /// Worker threads for pairwise stages; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the whole pipeline, or stop after `--stage`.
    Run {
        #[command(flatten)]
        opts: RunOpts,
        #[arg(long)]
        stage: Option<Stage>,
    },
    /// Ingest and community detection only, through partition.csv.
    Communities {
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Transfer entropy: one pair of series files, or every pair of a panel.
    Te(TeArgs),
    /// Print the Wishart noise band for N series of length T.
    Bounds {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        t: f64,
    },
}

#[derive(Args, Clone, Default)]
struct RunOpts {
    /// Flat TOML config; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    format: Option<CsvFormat>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    market: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    correlation: Option<CorrKind>,
    #[arg(long)]
    filter: Option<FilterMethod>,
    #[arg(long)]
    min_obs: Option<usize>,
    #[arg(long)]
    min_overlap: Option<usize>,
    /// Comma-separated Rényi orders; must include 1.
    #[arg(long, value_parser = positive, value_delimiter = ',')]
    q: Option<Vec<f64>>,
    #[arg(long)]
    shuffles: Option<usize>,
    #[arg(long)]
    percentile: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
}

#[derive(Args)]
struct TeArgs {
    /// Target series X, one value per line.
    #[arg(long, requires = "y", conflicts_with = "panel")]
    x: Option<PathBuf>,
    /// Source series Y, one value per line.
    #[arg(long, requires = "x")]
    y: Option<PathBuf>,
    /// Rényi order; 1 is Shannon.
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    q: f64,
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    l: usize,
    #[arg(long, default_value_t = infodyn::DEFAULT_SHUFFLES)]
    shuffles: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Evaluate the Rényi denominator escort over the full tuple instead.
    #[arg(long)]
    full_tuple: bool,
    /// Run pairwise TE over a panel instead, writing te_pairs.csv.
    #[arg(long)]
    panel: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    format: Option<CsvFormat>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl TeArgs {
    /// Panel-mode options; unset `--seed`/`--shuffles` defaults win over a
    /// config file only when given explicitly.
    fn run_opts(&self, explicit: &clap::ArgMatches) -> RunOpts {
        let given =
            |id: &str| explicit.value_source(id) == Some(clap::parser::ValueSource::CommandLine);
        let mut q = vec![1.0];
        if self.q != 1.0 {
            q.push(self.q);
        }
        RunOpts {
            config: self.config.clone(),
            input: self.input.clone(),
            format: self.format,
            out_dir: self.out_dir.clone(),
            seed: given("seed").then_some(self.seed),
            shuffles: given("shuffles").then_some(self.shuffles),
            m: given("m").then_some(self.m),
            l: given("l").then_some(self.l),
            q: given("q").then_some(q),
            ..Default::default()
        }
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be > 0, got {v}"))
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Config file, then the output-directory env var, then flags.
fn resolve(opts: &RunOpts) -> Result<PipelineConfig, Error> {
    let mut c = match &opts.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Ok(dir) = std::env::var(pipeline::OUT_DIR_ENV) {
        if !dir.is_empty() {
            c.out_dir = dir.into();
        }
    }
    let o = opts.clone();
    if let Some(v) = o.input {
        c.input = v;
    }
    if let Some(v) = o.format {
        c.format = v;
    }
    if let Some(v) = o.labels {
        c.labels = Some(v);
    }
    if let Some(v) = o.market {
        c.market = v;
    }
    if let Some(v) = o.out_dir {
        c.out_dir = v;
    }
    if let Some(v) = o.seed {
        c.seed = v;
    }
    if let Some(v) = o.correlation {
        c.correlation = v;
    }
    if let Some(v) = o.filter {
        c.filter = v;
    }
    if let Some(v) = o.min_obs {
        c.min_obs = v;
    }
    if let Some(v) = o.min_overlap {
        c.min_overlap = v;
    }
    if let Some(v) = o.q {
        c.q = v;
    }
    if let Some(v) = o.shuffles {
        c.n_shuffles = v;
    }
    if let Some(v) = o.percentile {
        c.percentile = v;
    }
    if let Some(v) = o.m {
        c.m = v;
    }
    if let Some(v) = o.l {
        c.l = v;
    }
    c.validate()?;
    Ok(c)
}

/// Reads one real value per line; a non-numeric first line is a header.
fn read_series(path: &Path) -> Result<Vec<Option<f64>>, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let v = line.trim();
        if v.is_empty() || v.eq_ignore_ascii_case("na") {
            out.push(None);
            continue;
        }
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() => out.push(Some(x)),
            _ if k == 0 => {}
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: k as u64 + 1,
                    message: format!("not a number: `{v}`"),
                })
            }
        }
    }
    Ok(out)
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map_or_else(|| "series".into(), |s| s.to_string_lossy().into_owned())
}

fn pair_te(args: &TeArgs, x_path: &Path, y_path: &Path) -> Result<(), Error> {
    let x = read_series(x_path)?;
    let y = read_series(y_path)?;
    if x.len() != y.len() {
        return Err(Error::Integrity(format!(
            "series lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let xs = infodyn::symbolize(&x, &infodyn::DEFAULT_EDGES)?;
    let ys = infodyn::symbolize(&y, &infodyn::DEFAULT_EDGES)?;
    let est = TeEstimator {
        m: args.m,
        l: args.l,
        qs: vec![args.q],
        n_shuffles: args.shuffles,
        renyi_form: if args.full_tuple {
            RenyiForm::FullTuple
        } else {
            RenyiForm::Conditional
        },
    };
    let result = est.estimate(&xs, &ys, args.seed)?.results.remove(0);
    infodyn::write_te_rows(
        std::io::stdout().lock(),
        [(stem(y_path), stem(x_path), result)],
    )
}

fn run(cli: Cli, matches: &clap::ArgMatches) -> Result<(), Error> {
    match cli.command {
        Command::Run { opts, stage } => {
            let c = resolve(&opts)?;
            let out = pipeline::run_pipeline(&c, Plan::Through(stage.unwrap_or(Stage::Flows)))?;
            println!("artifacts written to {}", out.out_dir.display());
        }
        Command::Communities { opts } => {
            let c = resolve(&opts)?;
            let out = pipeline::run_pipeline(&c, Plan::Through(Stage::Community))?;
            if let Some(p) = &out.partition {
                println!(
                    "{} communities, codelength {:.6} bits",
                    p.n_communities(),
                    p.codelength
                );
            }
        }
        Command::Te(args) => match (&args.x, &args.y, args.panel) {
            (Some(x), Some(y), false) => pair_te(&args, x, y)?,
            (None, None, true) => {
                let c = resolve(&args.run_opts(matches))?;
                let out = pipeline::run_pipeline(&c, Plan::PairwiseTe)?;
                println!("te_pairs.csv written to {}", out.out_dir.display());
            }
            _ => {
                return Err(Error::Config(
                    "te needs either --x and --y, or --panel".into(),
                ))
            }
        },
        Command::Bounds { n, t } => {
            let (lo, hi) =
                spectral::wishart_bounds(n, t).map_err(|e| Error::Config(e.to_string()))?;
            println!("N = {n}, T = {t}, Q = {}", t / n as f64);
            println!("lambda_min = {lo}");
            println!("lambda_max = {hi}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let parsed = Cli::command()
        .try_get_matches()
        .and_then(|m| Cli::from_arg_matches(&m).map(|c| (c, m)));
    let (cli, matches) = match parsed {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_DATA);
        }
    }
    let te_matches = matches
        .subcommand_matches("te")
        .cloned()
        .unwrap_or_default();
    match run(cli, &te_matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
