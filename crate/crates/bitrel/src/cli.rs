//! The `bitrel` command line: the pipeline stages as subcommands.
//!
//! Stages exchange plain files and can run separately or fused by `run`:
//! `gen` writes system descriptions, `sim` turns them into traces, `est`
//! turns traces into per-metric score matrices, `score` grades matrices
//! against the known wiring into a results table, and `report` plots
//! statistic densities from that table.
//!
//! Every setting resolves as: command line flag, then `BITREL_*` environment
//! variable, then the `--config` TOML file, then the built-in default.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Deserialize;

use crate::bitseries::{read_traces, write_traces, TraceFormat, Weighting};
use crate::error::{Error, ErrorKind, Result};
use crate::eval::{
    read_results, score_system, write_results, ResultRow, StatName, UndefinedPolicy,
};
use crate::kde::{curves_report, write_curves_csv, write_curves_svg};
use crate::metrics::{read_matrix_csv, score_matrices, write_matrix_csv, MetricKind};
use crate::sysgen::{draw_system, known_adjacency, read_spec, sample_traces, write_spec};

const DEFAULT_SYSTEMS: u64 = 1000;
const DEFAULT_SAMPLES: usize = 10_000;

#[derive(Parser)]
#[command(
    name = "bitrel",
    version,
    about = "Pairwise relationship estimation for long binary event streams"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random system descriptions (.spec files)
    Gen(GenArgs),
    /// Simulate node traces for existing system descriptions
    Sim(SimArgs),
    /// Estimate pairwise score matrices from trace files
    Est(EstArgs),
    /// Grade score matrices against the known wiring of their systems
    Score(ScoreArgs),
    /// Plot density curves of a statistic from a results table
    Report(ReportArgs),
    /// Run the whole pipeline into one output directory
    Run(RunArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Master seed for system structure
    #[arg(long, env = "BITREL_SEED")]
    seed: Option<u64>,
    /// How many systems to generate
    #[arg(long, env = "BITREL_SYSTEMS")]
    systems: Option<u64>,
    /// Directory that receives sys_<ordinal>.spec files
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// TOML file with fallback settings
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    /// Samples per node trace
    #[arg(long, env = "BITREL_SAMPLES")]
    samples: Option<usize>,
    /// Trace file format: csv or btr
    #[arg(long, env = "BITREL_FORMAT")]
    format: Option<String>,
    /// Worker threads
    #[arg(long, env = "BITREL_JOBS")]
    jobs: Option<usize>,
    /// Directory that receives one trace file per system
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// TOML file with fallback settings
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// System description files to simulate
    #[arg(required = true, value_name = "SPEC")]
    specs: Vec<PathBuf>,
}

#[derive(Args)]
struct EstArgs {
    /// Comma-separated metric names (default: all six)
    #[arg(long, value_delimiter = ',', env = "BITREL_METRICS")]
    metrics: Vec<String>,
    /// Restrict expectations to samples START:END
    #[arg(long, value_name = "START:END", env = "BITREL_WINDOW")]
    window: Option<String>,
    /// Worker threads
    #[arg(long, env = "BITREL_JOBS")]
    jobs: Option<usize>,
    /// Directory that receives <trace>_<metric>.csv matrices
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// TOML file with fallback settings
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Trace files to estimate from
    #[arg(required = true, value_name = "TRACES")]
    traces: Vec<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Directory holding the estimated matrices
    #[arg(long, value_name = "DIR")]
    est: PathBuf,
    /// Comma-separated metric names (default: all six)
    #[arg(long, value_delimiter = ',', env = "BITREL_METRICS")]
    metrics: Vec<String>,
    /// Undefined-score policy: zero or skip
    #[arg(long, env = "BITREL_POLICY")]
    policy: Option<String>,
    /// Worker threads
    #[arg(long, env = "BITREL_JOBS")]
    jobs: Option<usize>,
    /// Results table to write
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// TOML file with fallback settings
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// System description files to grade
    #[arg(required = true, value_name = "SPEC")]
    specs: Vec<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Statistic to plot (default: all eight)
    #[arg(long, env = "BITREL_STATISTIC")]
    statistic: Option<String>,
    /// Comma-separated metric names (default: all six)
    #[arg(long, value_delimiter = ',', env = "BITREL_METRICS")]
    metrics: Vec<String>,
    /// Directory that receives <statistic>.csv and <statistic>.svg
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// TOML file with fallback settings
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Results table produced by score or run
    #[arg(value_name = "RESULTS")]
    results: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Master seed for system structure
    #[arg(long, env = "BITREL_SEED")]
    seed: Option<u64>,
    /// How many systems to generate
    #[arg(long, env = "BITREL_SYSTEMS")]
    systems: Option<u64>,
    /// Samples per node trace
    #[arg(long, env = "BITREL_SAMPLES")]
    samples: Option<usize>,
    /// Comma-separated metric names (default: all six)
    #[arg(long, value_delimiter = ',', env = "BITREL_METRICS")]
    metrics: Vec<String>,
    /// Undefined-score policy: zero or skip
    #[arg(long, env = "BITREL_POLICY")]
    policy: Option<String>,
    /// Trace file format: csv or btr
    #[arg(long, env = "BITREL_FORMAT")]
    format: Option<String>,
    /// Worker threads
    #[arg(long, env = "BITREL_JOBS")]
    jobs: Option<usize>,
    /// Statistic to plot (default: all eight)
    #[arg(long, env = "BITREL_STATISTIC")]
    statistic: Option<String>,
    /// Restrict expectations to samples START:END
    #[arg(long, value_name = "START:END", env = "BITREL_WINDOW")]
    window: Option<String>,
    /// Output directory for the whole pipeline
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// TOML file with fallback settings
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

/// Parse the command line, run it, and map errors to exit codes:
/// 0 success, 2 usage, 3 file system, 4 malformed input files.
pub fn run_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e.kind() {
                ErrorKind::Usage => 2,
                ErrorKind::Io => 3,
                ErrorKind::Parse => 4,
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Sim(args) => cmd_sim(args),
        Command::Est(args) => cmd_est(args),
        Command::Score(args) => cmd_score(args),
        Command::Report(args) => cmd_report(args),
        Command::Run(args) => cmd_run(args),
    }
}

// ---------------------------------------------------------------------------
// Settings resolution
// ---------------------------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    systems: Option<u64>,
    samples: Option<usize>,
    metrics: Option<Vec<String>>,
    policy: Option<String>,
    format: Option<String>,
    jobs: Option<usize>,
    statistic: Option<String>,
    window: Option<String>,
}

fn load_config(path: Option<&PathBuf>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::parse_file(path, e.to_string()))
}

fn resolve_metrics(flag: &[String], cfg: Option<&Vec<String>>) -> Result<Vec<MetricKind>> {
    let names: &[String] = if !flag.is_empty() {
        flag
    } else {
        cfg.map(|v| v.as_slice()).unwrap_or(&[])
    };
    if names.is_empty() {
        return Ok(MetricKind::ALL.to_vec());
    }
    let mut out: Vec<MetricKind> = Vec::new();
    for name in names {
        let kind: MetricKind = name.parse()?;
        if !out.contains(&kind) {
            out.push(kind);
        }
    }
    // Canonical order keeps file layouts and result tables stable however
    // the flag was spelled.
    out.sort();
    Ok(out)
}

fn resolve_policy(flag: Option<&String>, cfg: Option<&String>) -> Result<UndefinedPolicy> {
    match flag.or(cfg) {
        Some(s) => s.parse(),
        None => Ok(UndefinedPolicy::Zero),
    }
}

fn resolve_format(flag: Option<&String>, cfg: Option<&String>) -> Result<TraceFormat> {
    match flag.or(cfg) {
        Some(s) => s.parse(),
        None => Ok(TraceFormat::Btr),
    }
}

fn resolve_statistic(flag: Option<&String>, cfg: Option<&String>) -> Result<Option<StatName>> {
    flag.or(cfg).map(|s| s.parse()).transpose()
}

fn resolve_window(flag: Option<&String>, cfg: Option<&String>) -> Result<Option<(usize, usize)>> {
    flag.or(cfg).map(|s| parse_window(s)).transpose()
}

fn parse_window(s: &str) -> Result<(usize, usize)> {
    let err = || Error::InvalidConfig(format!("invalid window {s:?}; expected START:END"));
    let (a, b) = s.split_once(':').ok_or_else(err)?;
    let start: usize = a.trim().parse().map_err(|_| err())?;
    let end: usize = b.trim().parse().map_err(|_| err())?;
    if start >= end {
        return Err(Error::InvalidConfig(format!(
            "window start {start} must be below end {end}"
        )));
    }
    Ok((start, end))
}

fn weighting_for(window: Option<(usize, usize)>) -> Weighting {
    match window {
        Some((start, end)) => Weighting::Window { start, end },
        None => Weighting::Uniform,
    }
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn resolve_jobs(flag: Option<usize>, cfg: Option<usize>) -> Result<usize> {
    let jobs = flag.or(cfg).unwrap_or_else(default_jobs);
    if jobs == 0 {
        return Err(Error::InvalidConfig("jobs must be at least 1".into()));
    }
    Ok(jobs)
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot build worker pool: {e}")))
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn stem(path: &Path) -> Result<&str> {
    path.file_stem().and_then(|s| s.to_str()).ok_or_else(|| {
        Error::InvalidConfig(format!("cannot derive a name from {}", path.display()))
    })
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

fn cmd_gen(args: GenArgs) -> Result<()> {
    let cfg = load_config(args.config.as_ref())?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let systems = args.systems.or(cfg.systems).unwrap_or(DEFAULT_SYSTEMS);
    if systems == 0 {
        return Err(Error::InvalidConfig("systems must be at least 1".into()));
    }
    ensure_dir(&args.out)?;
    for ordinal in 0..systems {
        let spec = draw_system(seed, ordinal);
        write_spec(&args.out.join(format!("sys_{ordinal}.spec")), &spec)?;
    }
    println!("gen: wrote {systems} system files to {}", args.out.display());
    Ok(())
}

fn cmd_sim(args: SimArgs) -> Result<()> {
    let cfg = load_config(args.config.as_ref())?;
    let samples = args.samples.or(cfg.samples).unwrap_or(DEFAULT_SAMPLES);
    let format = resolve_format(args.format.as_ref(), cfg.format.as_ref())?;
    let jobs = resolve_jobs(args.jobs, cfg.jobs)?;
    ensure_dir(&args.out)?;
    let pool = thread_pool(jobs)?;
    pool.install(|| {
        args.specs.par_iter().try_for_each(|spec_path| {
            let spec = read_spec(spec_path)?;
            let traces = sample_traces(&spec, samples)?;
            let name = format!("{}.{}", stem(spec_path)?, format.extension());
            write_traces(&args.out.join(name), &traces)
        })
    })?;
    println!(
        "sim: wrote {} trace files to {}",
        args.specs.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_est(args: EstArgs) -> Result<()> {
    let cfg = load_config(args.config.as_ref())?;
    let metrics = resolve_metrics(&args.metrics, cfg.metrics.as_ref())?;
    let window = resolve_window(args.window.as_ref(), cfg.window.as_ref())?;
    let jobs = resolve_jobs(args.jobs, cfg.jobs)?;
    let weighting = weighting_for(window);
    ensure_dir(&args.out)?;
    let pool = thread_pool(jobs)?;
    pool.install(|| {
        args.traces.par_iter().try_for_each(|trace_path| {
            let traces = read_traces(trace_path)?;
            let matrices = score_matrices(&traces, &weighting, &metrics)?;
            let base = stem(trace_path)?;
            for matrix in &matrices {
                let name = format!("{base}_{}.csv", matrix.metric());
                write_matrix_csv(&args.out.join(name), matrix)?;
            }
            Ok(())
        })
    })?;
    println!(
        "est: wrote {} matrix files to {}",
        args.traces.len() * metrics.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_score(args: ScoreArgs) -> Result<()> {
    let cfg = load_config(args.config.as_ref())?;
    let metrics = resolve_metrics(&args.metrics, cfg.metrics.as_ref())?;
    let policy = resolve_policy(args.policy.as_ref(), cfg.policy.as_ref())?;
    let jobs = resolve_jobs(args.jobs, cfg.jobs)?;
    let pool = thread_pool(jobs)?;
    let per_spec: Vec<Vec<ResultRow>> = pool.install(|| {
        args.specs
            .par_iter()
            .map(|spec_path| {
                let spec = read_spec(spec_path)?;
                let known = known_adjacency(&spec);
                let base = stem(spec_path)?;
                let mut rows = Vec::with_capacity(metrics.len());
                for &metric in &metrics {
                    let mpath = args.est.join(format!("{base}_{metric}.csv"));
                    let matrix = read_matrix_csv(&mpath, metric)?;
                    rows.push(score_system(
                        spec.ordinal,
                        spec.system_type,
                        &known,
                        &matrix,
                        policy,
                    )?);
                }
                Ok(rows)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut rows: Vec<ResultRow> = per_spec.into_iter().flatten().collect();
    rows.sort_by_key(|r| (r.ordinal, r.metric));
    write_results(&args.out, &rows)?;
    println!("score: wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let cfg = load_config(args.config.as_ref())?;
    let metrics = resolve_metrics(&args.metrics, cfg.metrics.as_ref())?;
    let statistic = resolve_statistic(args.statistic.as_ref(), cfg.statistic.as_ref())?;
    let rows = read_results(&args.results)?;
    ensure_dir(&args.out)?;
    write_report(&rows, statistic, &metrics, &args.out)
}

/// Write `<stat>.csv` and `<stat>.svg` for the chosen statistic, or for all
/// eight when none was chosen. An explicitly requested statistic with no
/// defined values is an error; in the all-statistics sweep it is skipped
/// with a note.
fn write_report(
    rows: &[ResultRow],
    statistic: Option<StatName>,
    metrics: &[MetricKind],
    out: &Path,
) -> Result<()> {
    let explicit = statistic.is_some();
    let stats: Vec<StatName> = match statistic {
        Some(s) => vec![s],
        None => StatName::ALL.to_vec(),
    };
    for stat in stats {
        let set = curves_report(rows, stat, metrics)?;
        if !set.missing.is_empty() {
            let names: Vec<&str> = set.missing.iter().map(|m| m.name()).collect();
            eprintln!("note: no defined {stat} values for {}", names.join(", "));
        }
        if set.curves.is_empty() {
            if explicit {
                return Err(Error::InvalidConfig(format!(
                    "statistic {stat} has no defined values to plot"
                )));
            }
            eprintln!("note: skipping {stat}: no defined values");
            continue;
        }
        write_curves_csv(&out.join(format!("{stat}.csv")), &set)?;
        write_curves_svg(&out.join(format!("{stat}.svg")), &set)?;
        println!("report: wrote {stat}.csv and {stat}.svg to {}", out.display());
    }
    Ok(())
}

struct RunSettings {
    seed: u64,
    systems: u64,
    samples: usize,
    metrics: Vec<MetricKind>,
    policy: UndefinedPolicy,
    format: TraceFormat,
    jobs: usize,
    statistic: Option<StatName>,
    window: Option<(usize, usize)>,
}

fn cmd_run(args: RunArgs) -> Result<()> {
    ensure_dir(&args.out)?;
    let outcome = (|| {
        let cfg = load_config(args.config.as_ref())?;
        let settings = RunSettings {
            seed: args.seed.or(cfg.seed).unwrap_or(0),
            systems: args.systems.or(cfg.systems).unwrap_or(DEFAULT_SYSTEMS),
            samples: args.samples.or(cfg.samples).unwrap_or(DEFAULT_SAMPLES),
            metrics: resolve_metrics(&args.metrics, cfg.metrics.as_ref())?,
            policy: resolve_policy(args.policy.as_ref(), cfg.policy.as_ref())?,
            format: resolve_format(args.format.as_ref(), cfg.format.as_ref())?,
            jobs: resolve_jobs(args.jobs, cfg.jobs)?,
            statistic: resolve_statistic(args.statistic.as_ref(), cfg.statistic.as_ref())?,
            window: resolve_window(args.window.as_ref(), cfg.window.as_ref())?,
        };
        run_pipeline(&settings, &args.out)
    })();
    match &outcome {
        // A stale marker from an earlier failed run must not outlive a
        // successful rerun into the same directory.
        Ok(()) => {
            let _ = fs::remove_file(args.out.join("run.failed"));
        }
        Err(e) => {
            let _ = fs::write(args.out.join("run.failed"), format!("{e}\n"));
        }
    }
    outcome
}

fn run_pipeline(s: &RunSettings, out: &Path) -> Result<()> {
    if s.systems == 0 {
        return Err(Error::InvalidConfig("systems must be at least 1".into()));
    }
    let traces_dir = out.join("traces");
    let est_dir = out.join("est");
    let report_dir = out.join("report");
    ensure_dir(&traces_dir)?;
    ensure_dir(&est_dir)?;
    ensure_dir(&report_dir)?;
    let weighting = weighting_for(s.window);
    let pool = thread_pool(s.jobs)?;
    let per_system: Vec<Vec<ResultRow>> = pool.install(|| {
        (0..s.systems)
            .into_par_iter()
            .map(|ordinal| {
                let spec = draw_system(s.seed, ordinal);
                write_spec(&out.join(format!("sys_{ordinal}.spec")), &spec)?;
                let traces = sample_traces(&spec, s.samples)?;
                let trace_name = format!("sys_{ordinal}.{}", s.format.extension());
                write_traces(&traces_dir.join(trace_name), &traces)?;
                let matrices = score_matrices(&traces, &weighting, &s.metrics)?;
                let known = known_adjacency(&spec);
                let mut rows = Vec::with_capacity(matrices.len());
                for matrix in &matrices {
                    let name = format!("sys_{ordinal}_{}.csv", matrix.metric());
                    write_matrix_csv(&est_dir.join(name), matrix)?;
                    rows.push(score_system(
                        spec.ordinal,
                        spec.system_type,
                        &known,
                        matrix,
                        s.policy,
                    )?);
                }
                Ok(rows)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut rows: Vec<ResultRow> = per_system.into_iter().flatten().collect();
    rows.sort_by_key(|r| (r.ordinal, r.metric));
    write_results(&out.join("results.csv"), &rows)?;
    println!(
        "run: scored {} systems with {} metrics",
        s.systems,
        s.metrics.len()
    );
    write_report(&rows, s.statistic, &s.metrics, &report_dir)?;
    println!("run: complete in {}", out.display());
    Ok(())
}
