//! Flow objective with stochastically sampled connectivity.
//!
//! A scheme proposes candidate states `i` for each data state `j` together
//! with the connection probabilities `g_ij` (from `j` to `i`) and `g_ji`.
//! A realized connection contributes `F_ij = sqrt(g_ji / g_ij) exp((E_j - E_i)/2)`,
//! so the expected rate is `sqrt(g_ij g_ji) exp((E_j - E_i)/2)` and detailed
//! balance holds on average.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::DiscreteDataset;
use crate::error::{check_dim, MpfError, Result};
use crate::model::{BinaryState, DiscreteModel};
use crate::objective::{reduce_partials, ObjectiveEval, Partial, REDUCE_CHUNK};

/// A proposed connection out of a data state.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub state: BinaryState,
    /// Probability of a connection from the data state to `state`.
    pub g_forward: f64,
    /// Probability of the reverse connection.
    pub g_reverse: f64,
}

pub trait Connectivity: Sync {
    /// Candidate states for `from`; never includes `from` itself.
    fn candidates(&self, from: &BinaryState) -> Vec<Candidate>;
}

/// Every single-bit-flip neighbor with fixed forward/reverse probabilities.
#[derive(Debug, Clone, Copy)]
pub struct BitFlipConnectivity {
    pub g_forward: f64,
    pub g_reverse: f64,
}

impl BitFlipConnectivity {
    pub fn symmetric(g: f64) -> Self {
        Self {
            g_forward: g,
            g_reverse: g,
        }
    }
}

impl Connectivity for BitFlipConnectivity {
    fn candidates(&self, from: &BinaryState) -> Vec<Candidate> {
        (0..from.dim())
            .map(|k| Candidate {
                state: from.flipped(k),
                g_forward: self.g_forward,
                g_reverse: self.g_reverse,
            })
            .collect()
    }
}

/// A connectivity scheme plus the seed its draws are derived from.
#[derive(Debug, Clone)]
pub struct SampledConnectivity<C> {
    pub scheme: C,
    pub seed: u64,
}

fn check_candidate(c: &Candidate) -> Result<()> {
    let ok = |g: f64| g > 0.0 && g <= 1.0;
    if ok(c.g_forward) && ok(c.g_reverse) {
        Ok(())
    } else {
        Err(MpfError::InvalidArgument(format!(
            "connection probabilities must lie in (0, 1], got g_ij = {}, g_ji = {}",
            c.g_forward, c.g_reverse
        )))
    }
}

#[derive(Clone, Copy)]
enum Realization {
    Draw { seed: u64 },
    Expected,
}

fn sampled_terms<M, C>(
    model: &M,
    theta: &[f64],
    data: &DiscreteDataset,
    scheme: &C,
    realization: Realization,
) -> Result<ObjectiveEval>
where
    M: DiscreteModel + ?Sized,
    C: Connectivity,
{
    check_dim("dataset dimension", model.dim(), data.dim())?;
    check_dim("parameter vector", model.n_params(), theta.len())?;
    let n = model.n_params();
    if data.is_empty() {
        return Ok(ObjectiveEval::new(0.0, vec![0.0; n]));
    }
    let index: Vec<usize> = (0..data.len()).collect();
    let parts: Vec<Result<Partial>> = index
        .par_chunks(REDUCE_CHUNK)
        .map(|chunk| {
            let mut part = Partial::new(n);
            for &s in chunk {
                let from = &data.states()[s];
                let w = data.weights()[s];
                let e_from = model.energy(theta, from.bits());
                let mut rng = match realization {
                    Realization::Draw { seed } => {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        rng.set_stream(s as u64);
                        Some(rng)
                    }
                    Realization::Expected => None,
                };
                for cand in scheme.candidates(from) {
                    check_candidate(&cand)?;
                    let factor = match rng.as_mut() {
                        Some(rng) => {
                            if rng.random::<f64>() < cand.g_forward {
                                (cand.g_reverse / cand.g_forward).sqrt()
                            } else {
                                continue;
                            }
                        }
                        None => (cand.g_forward * cand.g_reverse).sqrt(),
                    };
                    let exponent = part
                        .diagnostics
                        .clamp(0.5 * (e_from - model.energy(theta, cand.state.bits())));
                    let term = w * factor * exponent.exp();
                    part.value += term;
                    model.accumulate_param_grad(theta, from.bits(), 0.5 * term, &mut part.gradient);
                    model.accumulate_param_grad(theta, cand.state.bits(), -0.5 * term, &mut part.gradient);
                }
            }
            Ok(part)
        })
        .collect();
    let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
    let eval = reduce_partials(parts, n, 1.0 / data.total_weight());
    if !eval.is_finite() {
        return Err(MpfError::NonFinite("sampled flow objective".into()));
    }
    Ok(eval)
}

/// One stochastic realization of the sampled-connectivity flow objective.
///
/// Each data state draws its connections from an independent stream derived
/// from `(seed, entry index)`, so results are reproducible and independent of
/// scheduling. The estimate is unbiased for
/// [`mpf_objective_sampled_expected`].
pub fn mpf_objective_sampled<M, C>(
    model: &M,
    theta: &[f64],
    data: &DiscreteDataset,
    conn: &SampledConnectivity<C>,
) -> Result<ObjectiveEval>
where
    M: DiscreteModel + ?Sized,
    C: Connectivity,
{
    sampled_terms(model, theta, data, &conn.scheme, Realization::Draw { seed: conn.seed })
}

/// Expectation of [`mpf_objective_sampled`] over connection draws:
/// `(1/W) sum_j w_j sum_i sqrt(g_ij g_ji) exp((E_j - E_i)/2)`.
pub fn mpf_objective_sampled_expected<M, C>(
    model: &M,
    theta: &[f64],
    data: &DiscreteDataset,
    scheme: &C,
) -> Result<ObjectiveEval>
where
    M: DiscreteModel + ?Sized,
    C: Connectivity,
{
    sampled_terms(model, theta, data, scheme, Realization::Expected)
}
