//! Runs one estimator on one dataset and produces a [`FitReport`].

use std::cell::Cell;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::formats::{check_schema, write_atomic, ModelFile, SCHEMA_VERSION};
use super::metrics::{MetricContext, DEFAULT_CORR_BUDGET};
use crate::baselines::{cd_train_observed, mft_tap_fit, pseudolikelihood_objective, CdConfig, MftTapConfig};
use crate::dataset::{ContinuousDataset, DiscreteDataset};
use crate::error::{MpfError, Result};
use crate::model::{CouplingMatrix, DiscreteModel, IcaModel, IcaParameters, IsingModel};
use crate::mpf::{iterate_mpf_hmc, mpf_objective, ConnectivityMode, HmcSchedule, LeapfrogConfig};
use crate::objective::ObjectiveEval;
use crate::optimize::{lbfgs_minimize_observed, OptimizeStatus, OptimizerOptions};
use crate::oracle::ica_log_likelihood;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Estimator {
    Mpf { mode: ConnectivityMode },
    Pl,
    Cd(CdConfig),
    MftTap(MftTapConfig),
    MpfHmc { leapfrog: LeapfrogConfig, rounds: usize, inner_steps: usize },
}

impl Estimator {
    pub fn label(&self) -> String {
        match self {
            Estimator::Mpf { mode: ConnectivityMode::Strict } => "mpf".into(),
            Estimator::Mpf { mode: ConnectivityMode::AllNeighbors } => "mpf-all".into(),
            Estimator::Pl => "pl".into(),
            Estimator::Cd(cfg) => format!("cd{}", cfg.k),
            Estimator::MftTap(cfg) if cfg.tap_enabled => "mft-tap".into(),
            Estimator::MftTap(_) => "mft".into(),
            Estimator::MpfHmc { .. } => "mpf-hmc".into(),
        }
    }

    fn is_continuous(&self) -> bool {
        matches!(self, Estimator::MpfHmc { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub estimator: Estimator,
    pub optimizer: OptimizerOptions,
    /// Minimum wall-clock seconds between trace rows; 0 records every step.
    pub track_interval: f64,
    /// Gibbs sweeps for model correlations when `d > 20`.
    pub corr_budget: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            estimator: Estimator::Mpf { mode: ConnectivityMode::Strict },
            optimizer: OptimizerOptions::default(),
            track_interval: 0.5,
            corr_budget: DEFAULT_CORR_BUDGET,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// Optimizer iteration, CD update or HMC round.
    pub step: usize,
    pub elapsed_s: f64,
    pub objective: Option<f64>,
    pub grad_norm: Option<f64>,
    pub eps_j: Option<f64>,
    pub eps_corr: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub eps_j: Option<f64>,
    pub eps_corr: Option<f64>,
    pub mean_abs_corr: Option<f64>,
    /// Exact mean log-likelihood (ICA only), nats per sample.
    pub log_likelihood: Option<f64>,
    pub truth_log_likelihood: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: FitConfig,
    pub data_path: Option<String>,
    pub truth_path: Option<String>,
    /// Estimate as a model file.
    pub estimate: ModelFile,
    /// Estimate by parameter block.
    pub theta: Vec<(String, Vec<f64>)>,
    pub trace: Vec<TraceRow>,
    pub final_metrics: Option<FinalMetrics>,
    pub warnings: Vec<String>,
    pub elapsed_s: f64,
}

impl FitReport {
    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema_version)?;
        if self.trace.windows(2).any(|w| w[1].elapsed_s <= w[0].elapsed_s) {
            return Err(MpfError::InvalidArgument("trace timestamps are not strictly increasing".into()));
        }
        if self.truth_path.is_some() && self.final_metrics.is_none() {
            return Err(MpfError::InvalidArgument("report has a truth model but no metrics".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let report: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        report.validate()?;
        Ok(report)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string_pretty(self)?.as_bytes())
    }

    pub fn final_row(&self) -> Option<&TraceRow> {
        self.trace.last()
    }
}

/// Samples metrics at a wall-clock interval. Time spent computing metrics is
/// excluded from the reported timestamps.
struct Tracker<'a> {
    start: Instant,
    paused: Duration,
    interval: f64,
    metrics: Option<&'a MetricContext>,
    model: Option<&'a IsingModel>,
    rows: Vec<TraceRow>,
}

impl<'a> Tracker<'a> {
    fn new(interval: f64, metrics: Option<&'a MetricContext>, model: Option<&'a IsingModel>) -> Self {
        Self { start: Instant::now(), paused: Duration::ZERO, interval, metrics, model, rows: Vec::new() }
    }

    fn elapsed(&self) -> f64 {
        (self.start.elapsed() - self.paused).as_secs_f64()
    }

    fn observe(&mut self, step: usize, objective: Option<f64>, grad_norm: Option<f64>, theta: &[f64], force: bool) -> Result<()> {
        let elapsed = self.elapsed();
        if let Some(last) = self.rows.last() {
            if last.step == step || elapsed <= last.elapsed_s {
                return Ok(());
            }
            if !force && elapsed - last.elapsed_s < self.interval {
                return Ok(());
            }
        }
        let pause = Instant::now();
        let (mut eps_j, mut eps_corr) = (None, None);
        if let (Some(ctx), Some(model)) = (self.metrics, self.model) {
            let est = CouplingMatrix::from_params(model.clone(), theta)?;
            let m = ctx.evaluate(&est)?;
            eps_j = Some(m.eps_j);
            eps_corr = Some(m.eps_corr);
        }
        self.paused += pause.elapsed();
        self.rows.push(TraceRow { step, elapsed_s: elapsed, objective, grad_norm, eps_j, eps_corr });
        Ok(())
    }
}

fn optimizer_warnings(status: OptimizeStatus, clamped: usize, warnings: &mut Vec<String>) {
    match status {
        OptimizeStatus::LineSearchFailed => warnings.push("line search failed; best point returned".into()),
        OptimizeStatus::NonFinite => warnings.push("non-finite gradient stopped the run".into()),
        OptimizeStatus::MaxIterations => warnings.push("iteration budget exhausted".into()),
        _ => {}
    }
    if clamped > 0 {
        warnings.push(format!("{clamped} exponent(s) clamped over the run"));
    }
}

/// Fits an Ising model. `truth` enables the recovery metrics.
pub fn fit_ising(
    model: &IsingModel,
    data: &DiscreteDataset,
    truth: Option<&MetricContext>,
    cfg: &FitConfig,
) -> Result<FitReport> {
    if cfg.estimator.is_continuous() {
        return Err(MpfError::InvalidArgument(format!(
            "estimator {} needs a continuous model",
            cfg.estimator.label()
        )));
    }
    if let Some(ctx) = truth {
        if ctx.truth.dim() != model.dim() {
            return Err(MpfError::DimensionMismatch { what: "truth model", expected: model.dim(), got: ctx.truth.dim() });
        }
    }
    crate::error::check_dim("dataset dimension", model.dim(), data.dim())?;
    let theta0 = vec![0.0; model.n_params()];
    let mut warnings = Vec::new();
    let mut tracker = Tracker::new(cfg.track_interval, truth, Some(model));
    let clamped = Cell::new(0usize);
    let counted = |e: Result<ObjectiveEval>| {
        e.inspect(|e| clamped.set(clamped.get() + e.diagnostics.clamped_terms))
    };
    let mut tracking_error = None;
    let theta = match &cfg.estimator {
        Estimator::Mpf { .. } | Estimator::Pl => {
            let estimator = cfg.estimator.clone();
            let objective = |t: &[f64]| match estimator {
                Estimator::Mpf { mode } => counted(mpf_objective(model, t, data, mode)),
                _ => counted(pseudolikelihood_objective(model, t, data)),
            };
            let (theta, trace) = lbfgs_minimize_observed(objective, &theta0, &cfg.optimizer, |rec, t| {
                if let Err(e) = tracker.observe(rec.iter, Some(rec.value), Some(rec.grad_norm), t, false) {
                    tracking_error.get_or_insert(e);
                }
            })?;
            let last = trace.records.last().expect("trace has the initial point");
            tracker.observe(last.iter, Some(last.value), Some(last.grad_norm), &theta, true)?;
            optimizer_warnings(trace.status, clamped.get(), &mut warnings);
            theta
        }
        Estimator::Cd(cd) => {
            let cd = CdConfig { seed: cfg.seed, ..cd.clone() };
            let mut last_step = 0;
            let theta = cd_train_observed(model, &theta0, data, &cd, |step| {
                last_step = step.update;
                if let Err(e) = tracker.observe(step.update, None, None, &step.theta, false) {
                    tracking_error.get_or_insert(e);
                }
            })?;
            tracker.observe(last_step, None, None, &theta, true)?;
            theta
        }
        Estimator::MftTap(mft) => {
            tracker.observe(0, None, None, &theta0, true)?;
            let fit = mft_tap_fit(data, mft)?;
            warnings.extend(fit.warnings);
            // Project onto the fitted model's support; pairs outside it are dropped.
            let theta = project_couplings(&fit.couplings, model);
            tracker.observe(1, None, None, &theta, true)?;
            theta
        }
        Estimator::MpfHmc { .. } => unreachable!("rejected above"),
    };
    if let Some(e) = tracking_error {
        return Err(e);
    }
    let estimate = CouplingMatrix::from_params(model.clone(), &theta)?;
    let final_metrics = match truth {
        Some(ctx) => {
            let m = ctx.evaluate(&estimate)?;
            Some(FinalMetrics {
                eps_j: Some(m.eps_j),
                eps_corr: Some(m.eps_corr),
                mean_abs_corr: Some(m.mean_abs_corr),
                ..FinalMetrics::default()
            })
        }
        None => None,
    };
    Ok(FitReport {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        data_path: None,
        truth_path: None,
        estimate: ModelFile::from_couplings(&estimate),
        theta: estimate.params().unpack(),
        trace: tracker.rows,
        final_metrics,
        warnings,
        elapsed_s: tracker.start.elapsed().as_secs_f64(),
    })
}

fn project_couplings(full: &CouplingMatrix, model: &IsingModel) -> Vec<f64> {
    let support = model.support();
    let mut theta: Vec<f64> = support.edges().iter().map(|&(i, j)| full.get(i, j)).collect();
    theta.extend_from_slice(full.diag());
    theta
}

/// Fits ICA filters by iterated Hamiltonian flow. Initial filters are
/// Gaussian with variance `1/d`.
pub fn fit_ica(data: &ContinuousDataset, truth: Option<&IcaParameters>, cfg: &FitConfig) -> Result<FitReport> {
    let Estimator::MpfHmc { leapfrog, rounds, inner_steps } = &cfg.estimator else {
        return Err(MpfError::InvalidArgument(format!(
            "estimator {} needs an Ising model; ICA data takes mpf-hmc",
            cfg.estimator.label()
        )));
    };
    let d = data.dim();
    let model = IcaModel::new(d);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let theta0 = IcaParameters::random_gaussian(d, 1.0 / d as f64, &mut rng);
    let schedule = HmcSchedule { outer_rounds: *rounds, inner_steps: *inner_steps, leapfrog: *leapfrog, seed: cfg.seed };
    let start = Instant::now();
    let fit = iterate_mpf_hmc(&model, theta0.as_slice(), data, &schedule)?;
    let mut trace = vec![TraceRow { step: 0, elapsed_s: 0.0, objective: None, grad_norm: None, eps_j: None, eps_corr: None }];
    let mut last = 0.0;
    for (r, (&obj, &t)) in fit.round_objectives.iter().zip(&fit.round_elapsed_s).enumerate() {
        if t > last && (t - last >= cfg.track_interval || r + 1 == fit.round_objectives.len()) {
            trace.push(TraceRow { step: r + 1, elapsed_s: t, objective: Some(obj), grad_norm: None, eps_j: None, eps_corr: None });
            last = t;
        }
    }
    let estimate = IcaParameters::new(d, fit.last().to_vec())?;
    let final_metrics = FinalMetrics {
        log_likelihood: ica_log_likelihood(estimate.as_slice(), data).ok(),
        truth_log_likelihood: truth.and_then(|t| ica_log_likelihood(t.as_slice(), data).ok()),
        ..FinalMetrics::default()
    };
    Ok(FitReport {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        data_path: None,
        truth_path: None,
        estimate: ModelFile::from_ica(&estimate),
        theta: estimate.params().unpack(),
        trace,
        final_metrics: Some(final_metrics),
        warnings: Vec::new(),
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}
