//! Command-line harness: `generate`, `solve`, `compare`.
//!
//! Exit codes: 0 success, 1 solver failure, 2 usage or I/O error.
//! `BINNO_LOG` (error, warn, info, debug, trace) sets stderr verbosity.

use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::baselines::{nmf_lee_seung, palm_slrf, NmfConfig};
use crate::bilevel::{SolverConfig, SolverError};
use crate::data::{self, DataError, SyntheticSpec};
use crate::matrix::DenseMatrix;
use crate::metrics::MetricReport;
use crate::report::{RunReport, Termination};
use crate::slrf::{initial_factors, solve_slrf, SlrfConfig, SlrfParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SOLVER: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Binno,
    Palm,
    Nmf,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Binno => "binno",
            Method::Palm => "palm",
            Method::Nmf => "nmf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Csv(PathBuf),
    /// Directory of `*.pgm` frames, read in file-name order.
    Frames(PathBuf),
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic(SyntheticSpec::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSettings {
    pub max_iters: usize,
    pub tol: f64,
    pub nu_min: f64,
    pub safety_factor: f64,
    pub seed: u64,
}

impl Default for RunSettings {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            max_iters: s.max_iters,
            tol: s.tol,
            nu_min: s.nu_min,
            safety_factor: 1.0,
            seed: 0,
        }
    }
}

impl RunSettings {
    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            max_iters: self.max_iters,
            tol: self.tol,
            nu_min: self.nu_min,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub method: Method,
    pub data: DataSource,
    pub params: SlrfParams,
    pub solver: RunSettings,
    /// PSNR peak. Defaults to the largest absolute entry, or 1 for frames.
    pub max_value: Option<f64>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            method: Method::Binno,
            data: DataSource::default(),
            params: SlrfParams::default(),
            solver: RunSettings::default(),
            max_value: None,
            out: None,
        }
    }
}

/// Result of one experiment. `failure` is set when the solver errored or
/// stalled; `report` is then partial and flagged non-converged.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub failure: Option<String>,
}

impl RunOutcome {
    pub fn summary_line(&self) -> String {
        let m = self.report.metrics;
        let fmt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |v| format!("{v:.6}"));
        format!(
            "{},{:.6},{},{}",
            self.report.method,
            self.report.wall_time_seconds,
            fmt(m.map(|m| m.relative_error)),
            fmt(m.map(|m| m.psnr_db)),
        )
    }
}

/// Loads the data matrix and the default PSNR peak for it.
pub fn load_data(source: &DataSource) -> Result<(DenseMatrix, f64), CliError> {
    Ok(match source {
        DataSource::Synthetic(spec) => {
            let m = data::generate(spec)?.m_observed;
            let peak = m.max_abs();
            (m, peak)
        }
        DataSource::Csv(path) => {
            let m = data::load_matrix_csv(path)?;
            let peak = m.max_abs();
            (m, peak)
        }
        DataSource::Frames(dir) => {
            let files = data::pgm_files_in(dir)?;
            if files.is_empty() {
                return Err(CliError::Usage(format!("no .pgm frames in {}", dir.display())));
            }
            (data::frames_to_matrix(&files)?, 1.0)
        }
    })
}

/// Runs one configured method. Data errors are returned; solver errors are
/// folded into the outcome.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let (m, default_peak) = load_data(&config.data)?;
    let peak = config.max_value.unwrap_or(default_peak);
    info!("{}: data {}x{}", config.method.name(), m.rows(), m.cols());
    let result: Result<(RunReport, DenseMatrix), SolverError> = match config.method {
        Method::Binno => {
            let slrf = SlrfConfig {
                solver: config.solver.solver(),
                safety_factor: config.solver.safety_factor,
                seed: config.solver.seed,
            };
            solve_slrf(&m, config.params, &slrf).and_then(|s| Ok((s.report, s.x.matmul(&s.y)?)))
        }
        Method::Palm => {
            if let Err(e) = config.params.validate(m.rows(), m.cols()) {
                return Ok(failed(config.method, e.to_string()));
            }
            let (x0, y0) = initial_factors(&m, config.params.rank, config.solver.seed);
            palm_slrf(
                &m,
                config.params.lambda1,
                config.params.lambda2,
                x0,
                y0,
                &config.solver.solver(),
            )
            .and_then(|o| Ok((o.report, o.x.matmul(&o.y)?)))
        }
        Method::Nmf => {
            let rank = config.params.rank;
            if rank == 0 || rank > m.rows().min(m.cols()) {
                return Ok(failed(config.method, format!("rank {rank} out of range")));
            }
            let nmf = NmfConfig {
                max_iters: config.solver.max_iters,
                seed: config.solver.seed,
                ..Default::default()
            };
            nmf_lee_seung(&m, rank, &nmf).and_then(|o| Ok((o.report, o.w.matmul(&o.h)?)))
        }
    };
    Ok(match result {
        Ok((mut report, estimate)) => {
            report.metrics = MetricReport::compute(&m, &estimate, peak).ok();
            let failure = (report.termination == Termination::StalledStepsize)
                .then(|| "stepsize fell below nu_min without a descent step".to_string());
            RunOutcome { report, failure }
        }
        Err(e) => failed(config.method, e.to_string()),
    })
}

fn failed(method: Method, message: String) -> RunOutcome {
    RunOutcome {
        report: RunReport::new(method.name()),
        failure: Some(message),
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "binno",
    version,
    about = "Bi-level sparse low-rank factorization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic instance (m.csv, x_true.csv, y_true.csv, spec.json).
    Generate(GenerateArgs),
    /// Run one method and write report.json and trace.csv.
    Solve(SolveArgs),
    /// Run several methods with repeats and write a summary table.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long, default_value_t = 80)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    rank: usize,
    #[arg(long, default_value_t = 0.3)]
    sparsity: f64,
    #[arg(long, default_value_t = 0.01)]
    noise_std: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// JSON spec; its fields override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Clone)]
struct DataArgs {
    /// `synthetic` for the default instance, or a JSON synthetic spec file.
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Directory of binary PGM frames.
    #[arg(long)]
    frames: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
struct ParamArgs {
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    gamma1: Option<f64>,
    #[arg(long)]
    gamma2: Option<f64>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    nu_min: Option<f64>,
    #[arg(long)]
    safety_factor: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_value: Option<f64>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Experiment JSON; its fields override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Methods to compare; repeat the flag or separate with commas.
    #[arg(long, value_enum, value_delimiter = ',')]
    method: Vec<Method>,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// JSON array of experiment configs; replaces the method flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV table.
    #[arg(long)]
    out: PathBuf,
}

pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("BINNO_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Entry point of the `binno` binary.
pub fn run() -> i32 {
    init_logging();
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Compare(a) => cmd_compare(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("binno: {e}");
            EXIT_USAGE
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("config serialization is infallible");
    fs::write(path, text + "\n").map_err(io_err(path))
}

/// Recursively overlays `top` onto `base`; objects merge, other values replace.
fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, t) => *b = t,
    }
}

fn from_value<T: serde::de::DeserializeOwned>(value: Value, origin: &Path) -> Result<T, CliError> {
    serde_json::from_value(value).map_err(|source| CliError::Json {
        path: origin.to_path_buf(),
        source,
    })
}

fn cmd_generate(args: &GenerateArgs) -> Result<i32, CliError> {
    let mut spec = SyntheticSpec {
        m: args.m,
        n: args.n,
        r: args.rank,
        sparsity: args.sparsity,
        noise_std: args.noise_std,
        seed: args.seed,
    };
    if let Some(path) = &args.config {
        let mut base = serde_json::to_value(spec).expect("spec serializes");
        merge(&mut base, read_json(path)?);
        spec = from_value(base, path)?;
    }
    let inst = data::generate(&spec)?;
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    data::save_matrix_csv(args.out.join("m.csv"), &inst.m_observed)?;
    data::save_matrix_csv(args.out.join("x_true.csv"), &inst.x_true)?;
    data::save_matrix_csv(args.out.join("y_true.csv"), &inst.y_true)?;
    write_json(&args.out.join("spec.json"), &spec)?;
    println!("wrote {}x{} instance to {}", spec.m, spec.n, args.out.display());
    Ok(EXIT_OK)
}

fn data_source(args: &DataArgs) -> Result<Option<DataSource>, CliError> {
    let given = [args.data.is_some(), args.csv.is_some(), args.frames.is_some()];
    if given.iter().filter(|g| **g).count() > 1 {
        return Err(CliError::Usage(
            "--data, --csv and --frames are mutually exclusive".into(),
        ));
    }
    Ok(if let Some(d) = &args.data {
        if d == "synthetic" {
            Some(DataSource::default())
        } else {
            let path = PathBuf::from(d);
            let mut base = serde_json::to_value(SyntheticSpec::default()).expect("spec serializes");
            merge(&mut base, read_json(&path)?);
            Some(DataSource::Synthetic(from_value(base, &path)?))
        }
    } else if let Some(p) = &args.csv {
        Some(DataSource::Csv(p.clone()))
    } else {
        args.frames.as_ref().map(|p| DataSource::Frames(p.clone()))
    })
}

fn apply_flags(config: &mut ExperimentConfig, data: &DataArgs, p: &ParamArgs) -> Result<(), CliError> {
    if let Some(source) = data_source(data)? {
        config.data = source;
    }
    let params = &mut config.params;
    let solver = &mut config.solver;
    macro_rules! set {
        ($dst:expr, $src:expr) => {
            if let Some(v) = $src {
                $dst = v;
            }
        };
    }
    set!(params.lambda1, p.lambda1);
    set!(params.lambda2, p.lambda2);
    set!(params.gamma1, p.gamma1);
    set!(params.gamma2, p.gamma2);
    set!(params.rank, p.rank);
    set!(solver.max_iters, p.max_iters);
    set!(solver.tol, p.tol);
    set!(solver.nu_min, p.nu_min);
    set!(solver.safety_factor, p.safety_factor);
    set!(solver.seed, p.seed);
    if p.max_value.is_some() {
        config.max_value = p.max_value;
    }
    Ok(())
}

fn overlay_file(config: ExperimentConfig, file: Option<&PathBuf>) -> Result<ExperimentConfig, CliError> {
    let Some(path) = file else {
        return Ok(config);
    };
    let mut base = serde_json::to_value(&config).expect("config serializes");
    let top = read_json(path)?;
    // A file naming a data source replaces the flag-selected one entirely.
    if let (Some(b), Some(t)) = (base.as_object_mut(), top.get("data")) {
        b.insert("data".into(), t.clone());
    }
    merge(&mut base, top);
    from_value(base, path)
}

fn write_trace(path: &Path, report: &RunReport) -> Result<(), CliError> {
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["iteration", "psi1", "psi2", "alpha", "beta", "nu"])
        .map_err(csv_err)?;
    let cell = |v: &[f64], i: usize| v.get(i).map_or_else(String::new, |x| format!("{x:.17e}"));
    for i in 0..report.iterations {
        w.write_record([
            (i + 1).to_string(),
            cell(&report.psi1_trace, i),
            cell(&report.psi2_trace, i),
            cell(&report.alpha_trace, i),
            cell(&report.beta_trace, i),
            cell(&report.nu_trace, i),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

fn cmd_solve(args: &SolveArgs) -> Result<i32, CliError> {
    let mut config = ExperimentConfig::default();
    if let Some(m) = args.method {
        config.method = m;
    }
    config.out = args.out.clone();
    apply_flags(&mut config, &args.data, &args.params)?;
    let config = overlay_file(config, args.config.as_ref())?;
    let out_dir = config
        .out
        .clone()
        .ok_or_else(|| CliError::Usage("solve needs --out".into()))?;
    fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;

    let outcome = run_experiment(&config)?;
    fs::write(out_dir.join("report.json"), outcome.report.to_json() + "\n").map_err(io_err(&out_dir))?;
    write_trace(&out_dir.join("trace.csv"), &outcome.report)?;
    println!("{}", outcome.summary_line());
    Ok(match &outcome.failure {
        Some(msg) => {
            eprintln!("binno: solver failure: {msg}");
            EXIT_SOLVER
        }
        None => EXIT_OK,
    })
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub method: String,
    pub time_mean: f64,
    pub time_std: f64,
    pub err_mean: f64,
    pub err_std: f64,
    pub psnr_mean: f64,
    pub psnr_std: f64,
    pub status: String,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs every config `repeats` times in parallel, shifting the data and solver
/// seeds by the repeat index, and aggregates one row per config.
pub fn compare(configs: &[ExperimentConfig], repeats: usize) -> Result<Vec<CompareRow>, CliError> {
    if configs.is_empty() {
        return Err(CliError::Usage("compare needs at least one method".into()));
    }
    if repeats == 0 {
        return Err(CliError::Usage("--repeats must be at least 1".into()));
    }
    let cells: Vec<(usize, ExperimentConfig)> = configs
        .iter()
        .enumerate()
        .flat_map(|(i, c)| {
            (0..repeats).map(move |rep| {
                let mut c = c.clone();
                c.solver.seed = c.solver.seed.wrapping_add(rep as u64);
                if let DataSource::Synthetic(spec) = &mut c.data {
                    spec.seed = spec.seed.wrapping_add(rep as u64);
                }
                (i, c)
            })
        })
        .collect();
    let results: Vec<Result<RunOutcome, CliError>> = thread::scope(|s| {
        let handles: Vec<_> = cells.iter().map(|(_, c)| s.spawn(move || run_experiment(c))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("experiment thread panicked"))
            .collect()
    });

    let mut rows = Vec::with_capacity(configs.len());
    for (i, config) in configs.iter().enumerate() {
        let mut times = Vec::new();
        let mut errs = Vec::new();
        let mut psnrs = Vec::new();
        let mut status = "ok".to_string();
        for ((cell, _), result) in cells.iter().zip(&results) {
            if *cell != i {
                continue;
            }
            match result {
                Ok(o) if o.failure.is_none() && o.report.metrics.is_some() => {
                    let m = o.report.metrics.expect("checked");
                    times.push(o.report.wall_time_seconds);
                    errs.push(m.relative_error);
                    psnrs.push(m.psnr_db);
                }
                Ok(o) => status = format!("failed: {}", o.failure.as_deref().unwrap_or("no metrics")),
                Err(e) => status = format!("failed: {e}"),
            }
        }
        let (time_mean, time_std, err_mean, err_std, psnr_mean, psnr_std) = if status == "ok" {
            let t = mean_std(&times);
            let e = mean_std(&errs);
            let p = mean_std(&psnrs);
            (t.0, t.1, e.0, e.1, p.0, p.1)
        } else {
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        };
        rows.push(CompareRow {
            method: config.method.name().to_string(),
            time_mean,
            time_std,
            err_mean,
            err_std,
            psnr_mean,
            psnr_std,
            status,
        });
    }
    Ok(rows)
}

pub fn write_compare_table(path: &Path, rows: &[CompareRow]) -> Result<(), CliError> {
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

fn cmd_compare(args: &CompareArgs) -> Result<i32, CliError> {
    let mut base = ExperimentConfig::default();
    apply_flags(&mut base, &args.data, &args.params)?;
    let configs: Vec<ExperimentConfig> = match &args.config {
        Some(path) => {
            let Value::Array(items) = read_json(path)? else {
                return Err(CliError::Usage(format!(
                    "{}: expected a JSON array of configs",
                    path.display()
                )));
            };
            items
                .into_iter()
                .map(|item| {
                    let mut v = serde_json::to_value(&base).expect("config serializes");
                    if let (Some(b), Some(t)) = (v.as_object_mut(), item.get("data")) {
                        b.insert("data".into(), t.clone());
                    }
                    merge(&mut v, item);
                    from_value(v, path)
                })
                .collect::<Result<_, _>>()?
        }
        None => args
            .method
            .iter()
            .map(|&method| ExperimentConfig { method, ..base.clone() })
            .collect(),
    };
    let rows = compare(&configs, args.repeats)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    write_compare_table(&args.out, &rows)?;
    for row in &rows {
        println!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            row.method, row.time_mean, row.time_std, row.err_mean, row.err_std, row.psnr_mean, row.psnr_std, row.status
        );
    }
    Ok(if rows.iter().all(|r| r.status == "ok") {
        EXIT_OK
    } else {
        EXIT_SOLVER
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_overlays_nested_objects() {
        let mut base = serde_json::json!({"a": 1, "b": {"c": 2, "d": 3}});
        merge(&mut base, serde_json::json!({"b": {"c": 5}, "e": 6}));
        assert_eq!(base, serde_json::json!({"a": 1, "b": {"c": 5, "d": 3}, "e": 6}));
    }

    #[test]
    fn mean_std_examples() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn config_json_round_trip() {
        let c = ExperimentConfig {
            method: Method::Nmf,
            data: DataSource::Csv("m.csv".into()),
            ..Default::default()
        };
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&text).unwrap(), c);
        let partial: ExperimentConfig = serde_json::from_str(r#"{"params": {"rank": 3}}"#).unwrap();
        assert_eq!(partial.params.rank, 3);
        assert_eq!(partial.params.lambda1, SlrfParams::default().lambda1);
    }

    #[test]
    fn conflicting_data_flags_rejected() {
        let args = DataArgs {
            data: Some("synthetic".into()),
            csv: Some("m.csv".into()),
            frames: None,
        };
        assert!(matches!(data_source(&args), Err(CliError::Usage(_))));
    }

    #[test]
    fn empty_compare_is_usage_error() {
        assert!(matches!(compare(&[], 1), Err(CliError::Usage(_))));
    }
}
