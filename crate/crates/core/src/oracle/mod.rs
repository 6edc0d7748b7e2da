//! Brute-force ground truth for small systems. Everything here is `O(2^d)`
//! and refuses dimensions beyond hard gates instead of truncating.

mod gamma;
mod ica;

pub use gamma::{full_gamma, propagate, FullGamma};
pub use ica::{ica_exact_ml_fit, ica_log_likelihood, ica_nll};

use rayon::prelude::*;

use crate::dataset::DiscreteDataset;
use crate::error::{check_dim, MpfError, Result};
use crate::model::{BinaryState, CouplingMatrix, DiscreteModel};
use crate::objective::{reduce_partials, ObjectiveEval, Partial, REDUCE_CHUNK};
use crate::optimize::{lbfgs_minimize, OptimizeTrace, OptimizerOptions};
use crate::samplers::{gibbs_moments, ChainConfig};

/// Largest dimension accepted by enumeration.
pub const MAX_ENUM_DIM: usize = 20;
/// Largest dimension accepted by the full rate matrix.
pub const MAX_GAMMA_DIM: usize = 14;

pub(crate) fn check_gate(d: usize, max: usize) -> Result<()> {
    if d > max {
        Err(MpfError::TooLarge { d, max })
    } else {
        Ok(())
    }
}

pub(crate) fn bits_of(index: usize, d: usize) -> Vec<u8> {
    (0..d).map(|i| ((index >> i) & 1) as u8).collect()
}

/// Exact Boltzmann distribution over all `2^d` states, indexed so that bit
/// `i` of the index is entry `i` of the state.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedDistribution {
    pub d: usize,
    pub probs: Vec<f64>,
    pub log_z: f64,
}

impl EnumeratedDistribution {
    pub fn prob(&self, state: &BinaryState) -> f64 {
        self.probs[state.to_index() as usize]
    }

    /// Means and raw second moments `<x_i x_j>`.
    pub fn moments(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let d = self.d;
        let mut mean = vec![0.0; d];
        let mut second = vec![vec![0.0; d]; d];
        for (idx, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let on: Vec<usize> = (0..d).filter(|&i| (idx >> i) & 1 == 1).collect();
            for &i in &on {
                mean[i] += p;
                for &j in &on {
                    second[i][j] += p;
                }
            }
        }
        (mean, second)
    }
}

pub fn enumerate_distribution<M: DiscreteModel + ?Sized>(
    model: &M,
    theta: &[f64],
) -> Result<EnumeratedDistribution> {
    let d = model.dim();
    check_gate(d, MAX_ENUM_DIM)?;
    check_dim("parameter vector", model.n_params(), theta.len())?;
    let energies: Vec<f64> = (0..1usize << d)
        .into_par_iter()
        .map(|idx| model.energy(theta, &bits_of(idx, d)))
        .collect();
    if energies.iter().any(|e| !e.is_finite()) {
        return Err(MpfError::NonFinite("energy during enumeration".into()));
    }
    let e_min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut probs: Vec<f64> = energies.iter().map(|e| (e_min - e).exp()).collect();
    let sum: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= sum);
    Ok(EnumeratedDistribution {
        d,
        probs,
        log_z: sum.ln() - e_min,
    })
}

/// `sum_i p_i log(p_i / q_i)` with `0 log 0 = 0`.
pub fn exact_kl(p: &[f64], q: &[f64]) -> Result<f64> {
    check_dim("distribution length", p.len(), q.len())?;
    let mut kl = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi <= 0.0 {
            return Err(MpfError::Support(format!("q[{i}] = {qi} where p[{i}] = {pi}")));
        }
        kl += pi * (pi / qi).ln();
    }
    Ok(kl)
}

/// Exact negative log-likelihood per unit weight and its gradient
/// (data moments of dE minus model moments of dE).
pub fn exact_nll<M: DiscreteModel + ?Sized>(
    model: &M,
    theta: &[f64],
    data: &DiscreteDataset,
) -> Result<ObjectiveEval> {
    check_dim("dataset dimension", model.dim(), data.dim())?;
    if data.is_empty() {
        return Err(MpfError::InvalidArgument("likelihood of an empty dataset".into()));
    }
    let n = model.n_params();
    let d = model.dim();
    let dist = enumerate_distribution(model, theta)?;
    let mut eval = ObjectiveEval::new(dist.log_z, vec![0.0; n]);
    let w_total = data.total_weight();
    for (state, w) in data.iter() {
        eval.value += w / w_total * model.energy(theta, state.bits());
        model.accumulate_param_grad(theta, state.bits(), w / w_total, &mut eval.gradient);
    }
    let idx: Vec<usize> = (0..dist.probs.len()).collect();
    let parts: Vec<Partial> = idx
        .par_chunks(REDUCE_CHUNK * 16)
        .map(|chunk| {
            let mut part = Partial::new(n);
            for &i in chunk {
                let p = dist.probs[i];
                if p > 0.0 {
                    model.accumulate_param_grad(theta, &bits_of(i, d), p, &mut part.gradient);
                }
            }
            part
        })
        .collect();
    let model_moments = reduce_partials(parts, n, 1.0);
    for (g, m) in eval.gradient.iter_mut().zip(&model_moments.gradient) {
        *g -= m;
    }
    Ok(eval)
}

/// Maximum-likelihood fit by L-BFGS on the exact negative log-likelihood.
pub fn exact_ml_fit<M: DiscreteModel + ?Sized>(
    model: &M,
    data: &DiscreteDataset,
    theta0: &[f64],
    opts: &OptimizerOptions,
) -> Result<(Vec<f64>, OptimizeTrace)> {
    check_gate(model.dim(), MAX_ENUM_DIM)?;
    lbfgs_minimize(|t| exact_nll(model, t, data), theta0, opts)
}

/// Central differences, one coordinate at a time.
pub fn finite_diff_grad<F: FnMut(&[f64]) -> f64>(mut f: F, theta: &[f64], h: f64) -> Vec<f64> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut t = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            t[i] = theta[i] + h;
            let up = f(&t);
            t[i] = theta[i] - h;
            let down = f(&t);
            t[i] = theta[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Connected correlations `<x_i x_j> - <x_i><x_j>` (variances on the
/// diagonal). Exact by enumeration for `d <= 20`, otherwise estimated from a
/// Gibbs chain of `budget` post-burn-in sweeps.
pub fn model_pair_correlations(model: &CouplingMatrix, budget: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let d = model.dim();
    let (mean, second) = if d <= MAX_ENUM_DIM {
        enumerate_distribution(model.model(), model.theta())?.moments()
    } else {
        let cfg = ChainConfig { seed, thin: 1, ..ChainConfig::default() };
        gibbs_moments(model, budget, &cfg)?
    };
    Ok(connected(&mean, &second))
}

pub(crate) fn connected(mean: &[f64], second: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = mean.len();
    (0..d)
        .map(|i| (0..d).map(|j| second[i][j] - mean[i] * mean[j]).collect())
        .collect()
}
