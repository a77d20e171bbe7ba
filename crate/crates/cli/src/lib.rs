//! Command-line front end: `simulate`, `fit`, `summarize` and `plot`.
//!
//! Exit status is 0 on success, 1 on a runtime failure and 2 on a usage or
//! configuration error. Every command writes `resolved-config.json` next to
//! its outputs; passing that file back with `--config` reproduces them.

pub mod config;
pub mod output;
pub mod plot;

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use longidose_core::dose_response::{posterior_apo, Method, SyntheticOutcomes};
use longidose_core::gps::GpsKind;
use longidose_core::panel::{apply_transform, parse_panel_csv};
use longidose_core::resample::ResamplerKind;
use longidose_core::sim::{run_replications, SecondParam};
use thiserror::Error;

use crate::config::{RunConfig, SimulationConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] longidose_core::Error),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "longidose", version, about = "Bayesian longitudinal dose-response estimation")]
struct Cli {
    /// Worker threads for posterior draws (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Replicated simulation study on one of the two built-in examples.
    Simulate(SimulateArgs),
    /// Posterior APO draws for a panel CSV.
    Fit(FitArgs),
    /// Summary table from a posterior samples file.
    Summarize(SummarizeArgs),
    /// SVG dose-response curve from a posterior samples file.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Cov,
    Wor,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ResamplerArg {
    Bb,
    Dp,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GpsKindArg {
    Gee,
    RandomIntercept,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SyntheticArg {
    Mixture,
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SecondParamArg {
    Variance,
    Sd,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    example: Option<u8>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long, value_enum)]
    resampler: Option<ResamplerArg>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    j_target: Option<usize>,
    #[arg(long, value_enum)]
    gps_kind: Option<GpsKindArg>,
    #[arg(long, value_enum)]
    synthetic_outcomes: Option<SyntheticArg>,
    #[arg(long, value_enum)]
    second_param: Option<SecondParamArg>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SummarizeArgs {
    #[arg(long)]
    samples: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[arg(long)]
    samples: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output SVG file.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Summarize(a) => cmd_summarize(a),
        Command::Plot(a) => cmd_plot(a),
    })
}

fn load_or_default(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => config::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn output_dir(flag: Option<PathBuf>, cfg: &mut RunConfig) -> Result<PathBuf, CliError> {
    let dir = flag
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    cfg.output.dir = Some(dir.clone());
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), CliError> {
    let mut cfg = load_or_default(a.config.as_deref())?;
    let est = &mut cfg.estimator;
    let sim: &mut SimulationConfig = &mut cfg.simulation;
    if let Some(v) = a.example {
        sim.example = v;
    }
    if let Some(v) = a.replicates {
        sim.replicates = v;
    }
    if let Some(v) = a.n {
        sim.n = v;
    }
    if let Some(v) = a.k {
        sim.k = v;
    }
    if let Some(v) = a.second_param {
        sim.second_param = match v {
            SecondParamArg::Variance => SecondParam::Variance,
            SecondParamArg::Sd => SecondParam::Sd,
        };
    }
    if let Some(v) = a.method {
        est.method = match v {
            MethodArg::Cov => Method::Cov,
            MethodArg::Wor => Method::Wor,
        };
    }
    if let Some(v) = a.resampler {
        est.resampler = match v {
            ResamplerArg::Bb => ResamplerKind::Bb,
            ResamplerArg::Dp => ResamplerKind::Dp,
        };
    }
    if let Some(v) = a.gps_kind {
        est.gps_kind = match v {
            GpsKindArg::Gee => GpsKind::Gee,
            GpsKindArg::RandomIntercept => GpsKind::RandomIntercept,
        };
    }
    if let Some(v) = a.synthetic_outcomes {
        est.synthetic_outcomes = match v {
            SyntheticArg::Mixture => SyntheticOutcomes::Mixture,
            SyntheticArg::All => SyntheticOutcomes::All,
        };
    }
    if let Some(v) = a.draws {
        est.n_draws = v;
    }
    if let Some(v) = a.alpha {
        est.alpha = v;
    }
    if let Some(v) = a.seed {
        est.seed = v;
    }
    if let Some(v) = a.j_target {
        est.j_target = v;
    }
    let spec = cfg.simulation.spec(cfg.estimator.seed)?;
    cfg.estimator.family = spec.example.family();
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    cfg.estimator.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if cfg.simulation.replicates < 2 {
        return Err(CliError::Usage("--replicates must be at least 2".into()));
    }
    let dir = output_dir(a.out, &mut cfg)?;

    let report = run_replications(&spec, &cfg.estimator, cfg.simulation.replicates)?;
    let path = dir.join("simreport.csv");
    report.write_csv(create(&path)?)?;
    config::write_resolved(&cfg, &dir)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn cmd_fit(a: FitArgs) -> Result<(), CliError> {
    let mut cfg = config::load(&a.config)?;
    let data_path = a
        .data
        .or_else(|| cfg.data.path.clone())
        .ok_or_else(|| CliError::Usage("no data file: pass --data or set data.path".into()))?;
    cfg.data.path = Some(data_path.clone());
    let dir = output_dir(a.out, &mut cfg)?;

    let mut data = parse_panel_csv(&data_path, &cfg.data.schema, cfg.estimator.family)?;
    for step in &cfg.data.transforms {
        data = apply_transform(&data, &step.column, step.transform)?;
    }
    if let Some(grid) = &cfg.data.dose_grid {
        cfg.estimator.dose_grid = grid.resolve(&data)?;
        cfg.estimator.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let post = posterior_apo(&data, &cfg.estimator)?;
    for f in &post.failures {
        eprintln!("warning: skipped {}", f.message);
    }
    output::write_samples(&post, create(&dir.join("apo_samples.csv"))?)?;
    if post.summary.is_empty() {
        return Err(CliError::Runtime("fewer than 2 successful draws; no summary written".into()));
    }
    output::write_summary(&post.summary, create(&dir.join("apo_summary.csv"))?)?;
    config::write_resolved(&cfg, &dir)?;
    Ok(())
}

fn samples_path(flag: Option<PathBuf>, cfg: &mut RunConfig) -> Result<PathBuf, CliError> {
    let p = flag
        .or_else(|| cfg.output.samples.clone())
        .ok_or_else(|| CliError::Usage("no samples file: pass --samples".into()))?;
    cfg.output.samples = Some(p.clone());
    Ok(p)
}

fn cmd_summarize(a: SummarizeArgs) -> Result<(), CliError> {
    let mut cfg = load_or_default(a.config.as_deref())?;
    let samples = samples_path(a.samples, &mut cfg)?;
    let dir = output_dir(a.out, &mut cfg)?;
    let table = output::read_samples_file(&samples)?;
    output::write_summary(&table.summarize()?, create(&dir.join("apo_summary.csv"))?)?;
    config::write_resolved(&cfg, &dir)
}

fn cmd_plot(a: PlotArgs) -> Result<(), CliError> {
    let mut cfg = load_or_default(a.config.as_deref())?;
    let samples = samples_path(a.samples, &mut cfg)?;
    let out = a
        .out
        .or_else(|| cfg.output.plot.clone())
        .ok_or_else(|| CliError::Usage("no output file: pass --out".into()))?;
    cfg.output.plot = Some(out.clone());
    let dir = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let table = output::read_samples_file(&samples)?;
    let summary = table.summarize()?;
    let svg = plot::render_svg(&summary, "dose", "APO");
    std::fs::write(&out, svg).map_err(|e| CliError::io(&out, e))?;
    config::write_resolved(&cfg, &dir)
}
