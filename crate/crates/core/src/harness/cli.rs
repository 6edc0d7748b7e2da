//! Subcommands `gen`, `fit`, `bench` and `oracle`.
//!
//! Exit codes: 0 success, 1 validation error, 2 check failure, 3 runtime
//! failure. Diagnostics go to standard error; results go to files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checks::{run_check, Check};
use super::fit::{fit_ica, fit_ising, Estimator, FitConfig, FitReport};
use super::formats::{read_dataset, write_atomic, write_continuous, write_discrete, AnyDataset, ModelFile, SCHEMA_VERSION};
use super::metrics::{MetricContext, DEFAULT_CORR_BUDGET};
use crate::baselines::{CdConfig, MftTapConfig};
use crate::dataset::DiscreteDataset;
use crate::error::MpfError;
use crate::model::{random_full_glass, random_lattice_glass, BinaryState, DiscreteModel, IcaParameters, IsingModel, Support};
use crate::mpf::{mpf_objective, ConnectivityMode, LeapfrogConfig};
use crate::optimize::OptimizerOptions;
use crate::samplers::{exact_sample, gibbs_sample, ica_sample, swendsen_wang_sample, ChainConfig};

#[derive(Debug, Parser)]
#[command(name = "mpf", version, about = "Minimum probability flow estimation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a random model and a dataset from it.
    Gen(GenArgs),
    /// Fit a model to a dataset with one estimator.
    Fit(FitArgs),
    /// Run several estimators on the same data and write an error-vs-time CSV.
    Bench(BenchArgs),
    /// Run a seeded oracle check; the exit status reports pass or fail.
    Oracle(OracleArgs),
}

/// A model family: `lattice:RxC`, `full:D` or `ica:D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Lattice { rows: usize, cols: usize },
    Full { d: usize },
    Ica { d: usize },
}

fn parse_lattice(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected RxC, got `{s}`"))?;
    let r: usize = r.parse().map_err(|_| format!("bad row count in `{s}`"))?;
    let c: usize = c.parse().map_err(|_| format!("bad column count in `{s}`"))?;
    if r == 0 || c == 0 {
        return Err(format!("lattice dimensions must be positive, got `{s}`"));
    }
    Ok((r, c))
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, arg) = s.split_once(':').ok_or_else(|| format!("expected FAMILY:SIZE, got `{s}`"))?;
        let dim = || arg.parse::<usize>().ok().filter(|&d| d > 0).ok_or_else(|| format!("bad dimension in `{s}`"));
        match kind {
            "lattice" | "ising-lattice" => parse_lattice(arg).map(|(rows, cols)| Family::Lattice { rows, cols }),
            "full" | "ising-full" => dim().map(|d| Family::Full { d }),
            "ica" => dim().map(|d| Family::Ica { d }),
            _ => Err(format!("unknown model family `{kind}` (lattice, full, ica)")),
        }
    }
}

impl Family {
    fn ising_model(&self) -> Result<IsingModel, MpfError> {
        match *self {
            Family::Lattice { rows, cols } => Ok(IsingModel::new(Support::lattice(rows, cols)?)),
            Family::Full { d } => Ok(IsingModel::new(Support::full(d)?)),
            Family::Ica { .. } => Err(MpfError::InvalidArgument("ICA family has no Ising model".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    Gibbs,
    Sw,
    Exact,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Model family, e.g. `lattice:10x10`, `full:16`, `ica:4`.
    #[arg(long, conflicts_with = "lattice")]
    pub model: Option<Family>,
    /// Shorthand for `--model lattice:RxC`.
    #[arg(long, value_parser = parse_lattice)]
    pub lattice: Option<(usize, usize)>,
    /// Coupling variance of the random glass.
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 20_000)]
    pub samples: usize,
    /// Sampler for Ising data (ICA data is always drawn exactly).
    #[arg(long, value_enum, default_value_t = Sampler::Gibbs)]
    pub sampler: Sampler,
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 10)]
    pub thin: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output prefix; writes PREFIX.data, PREFIX.model.json and PREFIX.manifest.json.
    #[arg(long, default_value = "mpf-gen")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorName {
    Mpf,
    Pl,
    Cd,
    MftTap,
    MpfHmc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeName {
    Strict,
    All,
}

/// Options shared by `fit` and `bench`.
#[derive(Debug, Clone, Args)]
pub struct EstimatorArgs {
    /// Neighbors receiving flow: `strict` skips neighbors that are data states.
    #[arg(long, value_enum, default_value_t = ModeName::Strict)]
    pub mode: ModeName,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seconds between trace rows (0 records every step).
    #[arg(long, default_value_t = 0.5)]
    pub track_interval: f64,
    /// Ridge term of the mean-field pseudoinverse.
    #[arg(long = "lambda", default_value_t = 1e-6)]
    pub lambda: f64,
    /// Disable the TAP correction of mft-tap.
    #[arg(long)]
    pub no_tap: bool,
    /// Gibbs sweeps per CD reconstruction.
    #[arg(long, default_value_t = 1)]
    pub cd_k: usize,
    #[arg(long, default_value_t = 1000)]
    pub cd_updates: usize,
    #[arg(long, default_value_t = 3.0)]
    pub cd_rate_start: f64,
    #[arg(long, default_value_t = 0.1)]
    pub cd_rate_end: f64,
    #[arg(long, default_value_t = 0.1)]
    pub leapfrog_step: f64,
    #[arg(long, default_value_t = 10)]
    pub leapfrog_n: usize,
    /// Outer rounds of mpf-hmc.
    #[arg(long, default_value_t = 10)]
    pub rounds: usize,
    /// L-BFGS iterations per mpf-hmc round.
    #[arg(long, default_value_t = 100)]
    pub inner_steps: usize,
    #[arg(long, default_value_t = 2000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub grad_tol: f64,
    /// Gibbs sweeps for model correlations when d > 20.
    #[arg(long, default_value_t = DEFAULT_CORR_BUDGET)]
    pub corr_budget: usize,
}

impl EstimatorArgs {
    fn estimator(&self, name: EstimatorName, cd_k: usize) -> Estimator {
        match name {
            EstimatorName::Mpf => Estimator::Mpf {
                mode: match self.mode {
                    ModeName::Strict => ConnectivityMode::Strict,
                    ModeName::All => ConnectivityMode::AllNeighbors,
                },
            },
            EstimatorName::Pl => Estimator::Pl,
            EstimatorName::Cd => Estimator::Cd(CdConfig {
                k: cd_k,
                rate_start: self.cd_rate_start,
                rate_end: self.cd_rate_end,
                n_updates: self.cd_updates,
                seed: self.seed,
            }),
            EstimatorName::MftTap => Estimator::MftTap(MftTapConfig { lambda: self.lambda, tap_enabled: !self.no_tap }),
            EstimatorName::MpfHmc => Estimator::MpfHmc {
                leapfrog: LeapfrogConfig { step_size: self.leapfrog_step, n_steps: self.leapfrog_n },
                rounds: self.rounds,
                inner_steps: self.inner_steps,
            },
        }
    }

    fn config(&self, estimator: Estimator) -> FitConfig {
        FitConfig {
            estimator,
            optimizer: OptimizerOptions { max_iters: self.max_iters, grad_tol: self.grad_tol, ..OptimizerOptions::default() },
            track_interval: self.track_interval,
            corr_budget: self.corr_budget,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Dataset file (`#mpf-bin` or `#mpf-real`).
    #[arg(long)]
    pub data: PathBuf,
    /// Model family to fit; defaults to the family of `--truth`.
    #[arg(long)]
    pub model: Option<Family>,
    /// Generating model file; enables recovery metrics.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = EstimatorName::Mpf)]
    pub estimator: EstimatorName,
    #[arg(long, default_value = "fit-report.json")]
    pub out: PathBuf,
    #[command(flatten)]
    pub opts: EstimatorArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Dataset file; required unless `--timing-sweep` is given.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Generating Ising model file.
    #[arg(long)]
    pub truth: PathBuf,
    /// Comma-separated methods: mpf, mpf-all, pl, cdK (e.g. cd1, cd10), mft-tap, mft.
    #[arg(long, value_delimiter = ',', default_value = "mpf,pl,cd1")]
    pub methods: Vec<String>,
    /// Output directory for bench.csv and per-method reports.
    #[arg(long, default_value = "bench-out")]
    pub out: PathBuf,
    /// Time one flow-objective evaluation against dataset size instead.
    #[arg(long)]
    pub timing_sweep: bool,
    #[arg(long, value_delimiter = ',', default_value = "1000,2000,4000,8000,16000,32000,64000")]
    pub sweep_sizes: Vec<usize>,
    /// Repetitions per size; the median time is kept.
    #[arg(long, default_value_t = 7)]
    pub sweep_reps: usize,
    #[command(flatten)]
    pub opts: EstimatorArgs,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, value_enum)]
    pub check: Check,
    #[arg(long, default_value_t = 8)]
    pub d: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Optional JSON file for the outcome.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    CheckFailed(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::CheckFailed(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::CheckFailed(m) => write!(f, "check failed: {m}"),
            CliError::Runtime(m) => write!(f, "runtime failure: {m}"),
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn runtime(e: MpfError) -> CliError {
    match e {
        MpfError::NonFinite(_) | MpfError::Io(_) | MpfError::Json(_) => CliError::Runtime(e.to_string()),
        other => CliError::Validation(other.to_string()),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("mpf: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Oracle(a) => cmd_oracle(&a),
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent().filter(|p| !p.as_os_str().is_empty()) {
        Some(dir) if !dir.is_dir() => Err(invalid(format!("output directory {} does not exist", dir.display()))),
        _ => Ok(()),
    }
}

/// Sidecar recording how a dataset was generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenManifest {
    pub schema_version: u32,
    pub model: String,
    pub sigma2: f64,
    pub samples: usize,
    pub sampler: Option<Sampler>,
    pub chain: Option<ChainConfig>,
    pub seed: u64,
    pub data_file: String,
    pub model_file: String,
}

pub fn cmd_gen(a: &GenArgs) -> Result<(), CliError> {
    let family = match (a.model, a.lattice) {
        (Some(f), _) => f,
        (None, Some((rows, cols))) => Family::Lattice { rows, cols },
        (None, None) => return Err(invalid("gen needs --model or --lattice")),
    };
    if !(a.sigma2 >= 0.0 && a.sigma2.is_finite()) {
        return Err(invalid(format!("--sigma2 must be >= 0, got {}", a.sigma2)));
    }
    let chain = ChainConfig { burn_in: a.burn_in, thin: a.thin, seed: a.seed };
    chain.validate().map_err(invalid)?;
    let data_path = with_suffix(&a.out, ".data");
    let model_path = with_suffix(&a.out, ".model.json");
    ensure_parent(&data_path)?;
    let model_seed = a.seed;
    let sample_seed = a.seed.wrapping_add(1);
    let (label, sampler, chain_rec) = match family {
        Family::Ica { d } => {
            let filters = IcaParameters::random_well_conditioned(d, model_seed);
            let data = ica_sample(&filters, a.samples, sample_seed).map_err(runtime)?;
            ModelFile::from_ica(&filters).save(&model_path).map_err(runtime)?;
            write_continuous(&data_path, &data).map_err(runtime)?;
            (format!("ica:{d}"), None, None)
        }
        _ => {
            let truth = match family {
                Family::Lattice { rows, cols } => random_lattice_glass(rows, cols, a.sigma2, model_seed),
                Family::Full { d } => random_full_glass(d, a.sigma2, model_seed),
                Family::Ica { .. } => unreachable!(),
            }
            .map_err(invalid)?;
            let cfg = ChainConfig { seed: sample_seed, ..chain.clone() };
            let data = match a.sampler {
                Sampler::Gibbs => gibbs_sample(&truth, a.samples, &cfg),
                Sampler::Sw => swendsen_wang_sample(&truth, a.samples, &cfg),
                Sampler::Exact => exact_sample(truth.model(), truth.theta(), a.samples, sample_seed),
            }
            .map_err(runtime)?;
            ModelFile::from_couplings(&truth).save(&model_path).map_err(runtime)?;
            write_discrete(&data_path, &data).map_err(runtime)?;
            let label = match family {
                Family::Lattice { rows, cols } => format!("lattice:{rows}x{cols}"),
                Family::Full { d } => format!("full:{d}"),
                Family::Ica { .. } => unreachable!(),
            };
            let chain_rec = (a.sampler != Sampler::Exact).then_some(cfg);
            (label, Some(a.sampler), chain_rec)
        }
    };
    let manifest = GenManifest {
        schema_version: SCHEMA_VERSION,
        model: label,
        sigma2: a.sigma2,
        samples: a.samples,
        sampler,
        chain: chain_rec,
        seed: a.seed,
        data_file: data_path.display().to_string(),
        model_file: model_path.display().to_string(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_atomic(&with_suffix(&a.out, ".manifest.json"), text.as_bytes()).map_err(runtime)?;
    eprintln!("wrote {} and {}", data_path.display(), model_path.display());
    Ok(())
}

fn load_truth(path: &Path) -> Result<ModelFile, CliError> {
    if !path.is_file() {
        return Err(invalid(format!("truth model {} does not exist", path.display())));
    }
    ModelFile::load(path).map_err(invalid)
}

fn load_data(path: &Path) -> Result<AnyDataset, CliError> {
    if !path.is_file() {
        return Err(invalid(format!("dataset {} does not exist", path.display())));
    }
    read_dataset(path).map_err(invalid)
}

pub fn cmd_fit(a: &FitArgs) -> Result<(), CliError> {
    ensure_parent(&a.out)?;
    let data = load_data(&a.data)?;
    let truth = a.truth.as_deref().map(load_truth).transpose()?;
    let cfg = a.opts.config(a.opts.estimator(a.estimator, a.opts.cd_k));
    let mut report = match data {
        AnyDataset::Binary(data) => {
            let model = match (a.model, &truth) {
                (Some(f), _) => f.ising_model().map_err(invalid)?,
                (None, Some(t)) => t.to_couplings().map_err(invalid)?.model().clone(),
                (None, None) => return Err(invalid("fit needs --model or --truth to choose the model family")),
            };
            let ctx = truth
                .as_ref()
                .map(|t| {
                    let j = t.to_couplings().map_err(invalid)?;
                    MetricContext::new(j, cfg.corr_budget, cfg.seed).map_err(runtime)
                })
                .transpose()?;
            fit_ising(&model, &data, ctx.as_ref(), &cfg).map_err(runtime)?
        }
        AnyDataset::Real(data) => {
            if let Some(f) = a.model {
                if f != (Family::Ica { d: data.dim() }) {
                    return Err(invalid("continuous data can only be fitted with an ica model of matching dimension"));
                }
            }
            let t = truth.as_ref().map(|t| t.to_ica().map_err(invalid)).transpose()?;
            fit_ica(&data, t.as_ref(), &cfg).map_err(runtime)?
        }
    };
    report.data_path = Some(a.data.display().to_string());
    report.truth_path = a.truth.as_ref().map(|p| p.display().to_string());
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    report.save(&a.out).map_err(runtime)?;
    if let Some(m) = &report.final_metrics {
        eprintln!("final metrics: {}", serde_json::to_string(m).unwrap_or_default());
    }
    eprintln!("wrote {}", a.out.display());
    Ok(())
}

fn parse_method(name: &str, opts: &EstimatorArgs) -> Result<Estimator, CliError> {
    let mut o = opts.clone();
    Ok(match name {
        "mpf" => {
            o.mode = ModeName::Strict;
            o.estimator(EstimatorName::Mpf, 1)
        }
        "mpf-all" => {
            o.mode = ModeName::All;
            o.estimator(EstimatorName::Mpf, 1)
        }
        "pl" => o.estimator(EstimatorName::Pl, 1),
        "mft-tap" => o.estimator(EstimatorName::MftTap, 1),
        "mft" => {
            o.no_tap = true;
            o.estimator(EstimatorName::MftTap, 1)
        }
        cd if cd.starts_with("cd") => {
            let k = cd[2..].parse::<usize>().ok().filter(|&k| k > 0).ok_or_else(|| invalid(format!("bad CD method `{cd}`")))?;
            o.estimator(EstimatorName::Cd, k)
        }
        other => return Err(invalid(format!("unknown method `{other}`"))),
    })
}

/// Formats trace rows of every report as `method,elapsed_s,eps_J,eps_corr`.
pub fn bench_csv(reports: &[(String, FitReport)]) -> String {
    let mut out = String::from("method,elapsed_s,eps_J,eps_corr\n");
    let cell = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for (method, report) in reports {
        for row in &report.trace {
            let _ = writeln!(out, "{method},{},{},{}", row.elapsed_s, cell(row.eps_j), cell(row.eps_corr));
        }
    }
    out
}

pub fn cmd_bench(a: &BenchArgs) -> Result<(), CliError> {
    if !a.out.is_dir() {
        std::fs::create_dir_all(&a.out).map_err(|e| invalid(format!("cannot create {}: {e}", a.out.display())))?;
    }
    let truth = load_truth(&a.truth)?.to_couplings().map_err(invalid)?;
    if a.timing_sweep {
        return timing_sweep(&truth, a);
    }
    if a.methods.is_empty() {
        return Err(invalid("method list is empty"));
    }
    let methods: Vec<(String, Estimator)> = a
        .methods
        .iter()
        .map(|m| parse_method(m.trim(), &a.opts).map(|e| (m.trim().to_string(), e)))
        .collect::<Result<_, _>>()?;
    let data_path = a.data.as_deref().ok_or_else(|| invalid("bench needs --data"))?;
    let AnyDataset::Binary(data) = load_data(data_path)? else {
        return Err(invalid("bench runs Ising estimators and needs a binary dataset"));
    };
    let ctx = MetricContext::new(truth.clone(), a.opts.corr_budget, a.opts.seed).map_err(runtime)?;
    let mut reports = Vec::new();
    let mut failures = 0;
    for (name, est) in methods {
        eprintln!("bench: running {name}");
        let cfg = a.opts.config(est);
        match fit_ising(truth.model(), &data, Some(&ctx), &cfg) {
            Ok(mut report) => {
                report.data_path = Some(data_path.display().to_string());
                report.truth_path = Some(a.truth.display().to_string());
                report.save(&a.out.join(format!("{name}.report.json"))).map_err(runtime)?;
                if let Some(m) = &report.final_metrics {
                    eprintln!(
                        "bench: {name} eps_J {:.6} eps_corr {:.6} in {:.2}s",
                        m.eps_j.unwrap_or(f64::NAN),
                        m.eps_corr.unwrap_or(f64::NAN),
                        report.elapsed_s
                    );
                }
                reports.push((name, report));
            }
            Err(e) => {
                eprintln!("bench: {name} failed: {e}");
                failures += 1;
            }
        }
    }
    write_atomic(&a.out.join("bench.csv"), bench_csv(&reports).as_bytes()).map_err(runtime)?;
    if reports.is_empty() && failures > 0 {
        return Err(CliError::Runtime("every method failed".into()));
    }
    Ok(())
}

/// Least-squares line through `(x, y)`; returns slope, intercept and R^2.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSweep {
    pub sizes: Vec<usize>,
    pub seconds: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Median wall-clock time of one flow-objective evaluation per dataset size.
/// The evaluation cost does not depend on the state values, so datasets are
/// uniform random states (almost all distinct for the model sizes used).
pub fn timing_sweep_measure(model: &IsingModel, sizes: &[usize], reps: usize, seed: u64) -> crate::Result<TimingSweep> {
    let d = model.dim();
    let theta = vec![0.1; model.n_params()];
    let mut seconds = Vec::with_capacity(sizes.len());
    for &m in sizes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(m as u64));
        let states = (0..m).map(|_| BinaryState::new((0..d).map(|_| u8::from(rng.random::<bool>())).collect()).expect("binary"));
        let data = DiscreteDataset::from_samples(d, states.collect::<Vec<_>>())?;
        mpf_objective(model, &theta, &data, ConnectivityMode::Strict)?;
        let mut times: Vec<f64> = (0..reps.max(1))
            .map(|_| {
                let t = Instant::now();
                let e = mpf_objective(model, &theta, &data, ConnectivityMode::Strict);
                std::hint::black_box(e).map(|_| t.elapsed().as_secs_f64())
            })
            .collect::<crate::Result<_>>()?;
        times.sort_by(f64::total_cmp);
        seconds.push(times[times.len() / 2]);
    }
    let x: Vec<f64> = sizes.iter().map(|&m| m as f64).collect();
    let (slope, intercept, r2) = linear_fit(&x, &seconds);
    Ok(TimingSweep { sizes: sizes.to_vec(), seconds, slope, intercept, r2 })
}

fn timing_sweep(truth: &crate::model::CouplingMatrix, a: &BenchArgs) -> Result<(), CliError> {
    if a.sweep_sizes.len() < 2 {
        return Err(invalid("timing sweep needs at least two sizes"));
    }
    let sweep = timing_sweep_measure(truth.model(), &a.sweep_sizes, a.sweep_reps, a.opts.seed).map_err(runtime)?;
    let mut csv = String::from("m,seconds\n");
    for (m, s) in sweep.sizes.iter().zip(&sweep.seconds) {
        let _ = writeln!(csv, "{m},{s}");
    }
    write_atomic(&a.out.join("timing.csv"), csv.as_bytes()).map_err(runtime)?;
    let text = serde_json::to_string_pretty(&sweep).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_atomic(&a.out.join("timing.json"), text.as_bytes()).map_err(runtime)?;
    eprintln!("timing sweep: slope {:.3e} s/sample, R^2 {:.5}", sweep.slope, sweep.r2);
    Ok(())
}

pub fn cmd_oracle(a: &OracleArgs) -> Result<(), CliError> {
    let outcome = run_check(a.check, a.d, a.seed).map_err(runtime)?;
    for m in &outcome.measurements {
        let rel = if m.upper_bound { "<=" } else { ">=" };
        let verdict = if m.pass() { "ok" } else { "FAIL" };
        eprintln!("{:?} d={} {}: {:.3e} (need {rel} {:.1e}) {verdict}", a.check, a.d, m.name, m.value, m.threshold);
    }
    if let Some(path) = &a.out {
        ensure_parent(path)?;
        let text = serde_json::to_string_pretty(&outcome).map_err(|e| CliError::Runtime(e.to_string()))?;
        write_atomic(path, text.as_bytes()).map_err(runtime)?;
    }
    if outcome.pass() {
        eprintln!("pass");
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!("{:?}", a.check)))
    }
}
