use nalgebra::DMatrix;

use crate::dataset::ContinuousDataset;
use crate::error::{check_dim, MpfError, Result};
use crate::model::sign0;
use crate::objective::ObjectiveEval;
use crate::optimize::{lbfgs_minimize, OptimizeTrace, OptimizerOptions};

fn filters(d: usize, theta: &[f64]) -> Result<DMatrix<f64>> {
    check_dim("filter matrix", d * d, theta.len())?;
    Ok(DMatrix::from_row_slice(d, d, theta))
}

/// Exact negative log-likelihood per sample of the Laplace ICA model,
/// `p(x) = |det J| prod_k exp(-|J_k x|) / 2`, with its gradient.
pub fn ica_nll(theta: &[f64], data: &ContinuousDataset) -> Result<ObjectiveEval> {
    let d = data.dim();
    let j = filters(d, theta)?;
    if data.is_empty() {
        return Err(MpfError::InvalidArgument("likelihood of an empty dataset".into()));
    }
    let lu = j.clone().lu();
    let det = lu.determinant();
    if det == 0.0 || !det.is_finite() {
        return Err(MpfError::NonFinite("singular filter matrix".into()));
    }
    let inv = lu.try_inverse().ok_or_else(|| MpfError::NonFinite("singular filter matrix".into()))?;
    let m = data.len() as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; d * d];
    for x in data.rows() {
        for k in 0..d {
            let proj: f64 = (0..d).map(|l| j[(k, l)] * x[l]).sum();
            value += proj.abs();
            let s = sign0(proj);
            for l in 0..d {
                grad[k * d + l] += s * x[l];
            }
        }
    }
    value = value / m - det.abs().ln() + d as f64 * 2f64.ln();
    for k in 0..d {
        for l in 0..d {
            grad[k * d + l] = grad[k * d + l] / m - inv[(l, k)];
        }
    }
    Ok(ObjectiveEval::new(value, grad))
}

/// Mean log-likelihood in nats per sample.
pub fn ica_log_likelihood(theta: &[f64], data: &ContinuousDataset) -> Result<f64> {
    let mut e = ica_nll(theta, data)?;
    e.gradient.clear();
    Ok(-e.value)
}

/// Maximum-likelihood filters by L-BFGS on the exact likelihood.
pub fn ica_exact_ml_fit(
    data: &ContinuousDataset,
    theta0: &[f64],
    opts: &OptimizerOptions,
) -> Result<(Vec<f64>, OptimizeTrace)> {
    lbfgs_minimize(|t| ica_nll(t, data), theta0, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::finite_diff_grad;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn identity_filters_on_origin() {
        let data = ContinuousDataset::new(2, vec![vec![0.0, 0.0]]).unwrap();
        let ll = ica_log_likelihood(&[1.0, 0.0, 0.0, 1.0], &data).unwrap();
        assert!((ll + 2.0 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..3).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let data = ContinuousDataset::new(3, rows).unwrap();
        let theta = [1.2, 0.3, -0.1, 0.2, 0.9, 0.4, -0.3, 0.1, 1.1];
        let eval = ica_nll(&theta, &data).unwrap();
        let fd = finite_diff_grad(|t| ica_nll(t, &data).unwrap().value, &theta, 1e-6);
        for (a, b) in eval.gradient.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }
}
