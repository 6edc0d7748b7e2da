use rayon::prelude::*;

use crate::dataset::DiscreteDataset;
use crate::error::{check_dim, Result};
use crate::model::DiscreteModel;
use crate::objective::{reduce_partials, ObjectiveEval, Partial, REDUCE_CHUNK};

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Negative log pseudolikelihood per unit weight,
/// `(1/W) sum_x w_x sum_i -log p(x_i | x_-i)`, with its gradient.
///
/// With `f = E(x with bit i flipped) - E(x)`, each conditional term is
/// `softplus(-f)`.
pub fn pseudolikelihood_objective<M: DiscreteModel + ?Sized>(
    model: &M,
    theta: &[f64],
    data: &DiscreteDataset,
) -> Result<ObjectiveEval> {
    check_dim("dataset dimension", model.dim(), data.dim())?;
    check_dim("parameter vector", model.n_params(), theta.len())?;
    let n = model.n_params();
    if data.is_empty() {
        return Ok(ObjectiveEval::new(0.0, vec![0.0; n]));
    }
    let (states, weights) = (data.states(), data.weights());
    let index: Vec<usize> = (0..states.len()).collect();
    let parts: Vec<Partial> = index
        .par_chunks(REDUCE_CHUNK)
        .map(|chunk| {
            let mut part = Partial::new(n);
            for &s in chunk {
                let x = states[s].bits();
                let w = weights[s];
                for k in 0..model.dim() {
                    let f = model.flip_delta(theta, x, k);
                    part.value += w * softplus(-f);
                    model.accumulate_flip_grad_diff(theta, x, k, w * sigmoid(-f), &mut part.gradient);
                }
            }
            part
        })
        .collect();
    Ok(reduce_partials(parts, n, 1.0 / data.total_weight()))
}
