use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::DiscreteDataset;
use crate::error::{check_dim, MpfError, Result};
use crate::model::{DiscreteModel, IsingModel};
use crate::objective::REDUCE_CHUNK;
use crate::optimize::RateSchedule;
use crate::samplers::gibbs_sweep;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdConfig {
    /// Gibbs sweeps per reconstruction.
    pub k: usize,
    pub rate_start: f64,
    pub rate_end: f64,
    pub n_updates: usize,
    pub seed: u64,
}

impl Default for CdConfig {
    fn default() -> Self {
        Self { k: 1, rate_start: 3.0, rate_end: 0.1, n_updates: 1000, seed: 0 }
    }
}

impl CdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || !(self.rate_start >= self.rate_end && self.rate_end > 0.0) {
            return Err(MpfError::InvalidArgument(format!(
                "CD needs k >= 1 and rate_start >= rate_end > 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdStep {
    pub update: usize,
    pub elapsed_s: f64,
    pub theta: Vec<f64>,
}

/// Parameters after every update; `steps[0]` is the initial point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdTrajectory {
    pub steps: Vec<CdStep>,
}

impl CdTrajectory {
    pub fn last(&self) -> &[f64] {
        &self.steps.last().expect("trajectory holds the initial point").theta
    }
}

/// `<dE>_data - <dE>_reconstructions` per unit weight. Reconstructions start
/// at each sample and run `sweeps` Gibbs sweeps; an entry of integral weight
/// `w` gets `w` independent reconstructions, other entries one weighted one.
/// With `sweeps = 0` the reconstructions equal the data and the result is
/// exactly zero.
pub fn cd_gradient(
    model: &IsingModel,
    theta: &[f64],
    data: &DiscreteDataset,
    sweeps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_dim("dataset dimension", model.dim(), data.dim())?;
    model.check_theta(theta)?;
    let n = model.n_params();
    if data.is_empty() {
        return Ok(vec![0.0; n]);
    }
    let (states, weights) = (data.states(), data.weights());
    let index: Vec<usize> = (0..states.len()).collect();
    let parts: Vec<(Vec<f64>, Vec<f64>)> = index
        .par_chunks(REDUCE_CHUNK)
        .map(|chunk| {
            let mut pos = vec![0.0; n];
            let mut neg = vec![0.0; n];
            for &s in chunk {
                let x = states[s].bits();
                let w = weights[s];
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(s as u64);
                let (copies, each) = if w.fract() == 0.0 { (w as usize, 1.0) } else { (1, w) };
                for _ in 0..copies {
                    let mut recon = x.to_vec();
                    for _ in 0..sweeps {
                        gibbs_sweep(model, theta, &mut recon, &mut rng);
                    }
                    model.accumulate_param_grad(theta, x, each, &mut pos);
                    model.accumulate_param_grad(theta, &recon, each, &mut neg);
                }
            }
            (pos, neg)
        })
        .collect();
    let mut pos = vec![0.0; n];
    let mut neg = vec![0.0; n];
    for (p, q) in parts {
        pos.iter_mut().zip(&p).for_each(|(a, b)| *a += b);
        neg.iter_mut().zip(&q).for_each(|(a, b)| *a += b);
    }
    let w = data.total_weight();
    Ok(pos.iter().zip(&neg).map(|(p, q)| (p - q) / w).collect())
}

fn update_seed(seed: u64, update: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(update as u64)
}

/// CD-k with a linearly annealed rate over the full dataset.
pub fn cd_train(model: &IsingModel, theta0: &[f64], data: &DiscreteDataset, cfg: &CdConfig) -> Result<CdTrajectory> {
    let mut steps = Vec::with_capacity(cfg.n_updates + 1);
    cd_train_observed(model, theta0, data, cfg, |step| steps.push(step.clone()))?;
    Ok(CdTrajectory { steps })
}

/// As [`cd_train`], streaming each step to `observer` instead of storing it.
/// Returns the final parameters.
pub fn cd_train_observed(
    model: &IsingModel,
    theta0: &[f64],
    data: &DiscreteDataset,
    cfg: &CdConfig,
    mut observer: impl FnMut(&CdStep),
) -> Result<Vec<f64>> {
    cfg.validate()?;
    model.check_theta(theta0)?;
    let schedule = RateSchedule::Linear { start: cfg.rate_start, end: cfg.rate_end };
    let start = Instant::now();
    let mut step = CdStep { update: 0, elapsed_s: 0.0, theta: theta0.to_vec() };
    observer(&step);
    for u in 0..cfg.n_updates {
        let grad = cd_gradient(model, &step.theta, data, cfg.k, update_seed(cfg.seed, u))?;
        let rate = schedule.rate(u, cfg.n_updates);
        step.theta.iter_mut().zip(&grad).for_each(|(t, g)| *t -= rate * g);
        if step.theta.iter().any(|t| !t.is_finite()) {
            return Err(MpfError::NonFinite(format!("CD parameters at update {}", u + 1)));
        }
        step.update = u + 1;
        step.elapsed_s = start.elapsed().as_secs_f64();
        observer(&step);
    }
    Ok(step.theta)
}
