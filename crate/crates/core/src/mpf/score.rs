//! Score matching and the small-hypercube flow objective.
//!
//! With connectivity restricted to a cube of side `eps` around each data
//! point, the flow objective expands as
//! `eps^d + eps^(d+2)/48 * [ |grad E|^2 / 2 - lap E ] + o(eps^(d+2))`,
//! i.e. score matching up to offset and scale.

use crate::dataset::ContinuousDataset;
use crate::error::{check_dim, MpfError, Result};
use crate::model::ContinuousModel;
use crate::objective::{Diagnostics, ObjectiveEval};

const LAPLACIAN_STEP: f64 = 1e-4;
const PARAM_STEP: f64 = 1e-5;

fn laplacian_fd<M: ContinuousModel + ?Sized>(model: &M, theta: &[f64], q: &[f64]) -> f64 {
    let d = q.len();
    let mut gp = vec![0.0; d];
    let mut gm = vec![0.0; d];
    let mut x = q.to_vec();
    let mut lap = 0.0;
    for i in 0..d {
        x[i] = q[i] + LAPLACIAN_STEP;
        model.grad_q(theta, &x, &mut gp);
        x[i] = q[i] - LAPLACIAN_STEP;
        model.grad_q(theta, &x, &mut gm);
        x[i] = q[i];
        lap += (gp[i] - gm[i]) / (2.0 * LAPLACIAN_STEP);
    }
    lap
}

/// Per-sample `|grad E|^2 / 2 - lap E`, flagging finite differences.
fn score_term<M: ContinuousModel + ?Sized>(
    model: &M,
    theta: &[f64],
    q: &[f64],
    grad: &mut [f64],
    fd: &mut bool,
) -> f64 {
    model.grad_q(theta, q, grad);
    let lap = match model.laplacian(theta, q) {
        Some(l) => l,
        None => {
            *fd = true;
            laplacian_fd(model, theta, q)
        }
    };
    0.5 * grad.iter().map(|g| g * g).sum::<f64>() - lap
}

/// `K_SM = (1/N) sum_x [ grad E . grad E / 2 - lap E ]` and its parameter gradient.
pub fn score_matching_objective<M: ContinuousModel + ?Sized>(
    model: &M,
    theta: &[f64],
    data: &ContinuousDataset,
) -> Result<ObjectiveEval> {
    check_dim("dataset dimension", model.dim(), data.dim())?;
    check_dim("parameter vector", model.n_params(), theta.len())?;
    let n = model.n_params();
    let mut diagnostics = Diagnostics::default();
    let mut value = 0.0;
    let mut gradient = vec![0.0; n];
    if data.is_empty() {
        return Ok(ObjectiveEval::new(0.0, gradient));
    }
    let scale = 1.0 / data.len() as f64;
    let mut grad = vec![0.0; model.dim()];
    for q in data.rows() {
        let mut fd = false;
        value += score_term(model, theta, q, &mut grad, &mut fd);
        let analytic = !fd
            && model.accumulate_score_param_grad(theta, q, &grad, scale, &mut gradient)
            && model.accumulate_laplacian_param_grad(theta, q, -scale, &mut gradient);
        if !analytic {
            fd = true;
            let mut t = theta.to_vec();
            let mut scratch = vec![0.0; model.dim()];
            let mut ignored = false;
            for p in 0..n {
                t[p] = theta[p] + PARAM_STEP;
                let up = score_term(model, &t, q, &mut scratch, &mut ignored);
                t[p] = theta[p] - PARAM_STEP;
                let down = score_term(model, &t, q, &mut scratch, &mut ignored);
                t[p] = theta[p];
                gradient[p] += scale * (up - down) / (2.0 * PARAM_STEP);
            }
        }
        diagnostics.term_count += 1;
        diagnostics.finite_difference |= fd;
    }
    let eval = ObjectiveEval {
        value: value * scale,
        gradient,
        diagnostics,
    };
    if !eval.is_finite() {
        return Err(MpfError::NonFinite("score matching derivatives".into()));
    }
    Ok(eval)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, `n >= 2`.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // Recurrence leaves p1 = P_n(x), p0 = P_{n-1}(x).
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(1/N) sum_x int_{C_eps} exp((E(x) - E(x + a)) / 2) da` by tensor-product
/// Gauss-Legendre quadrature over the centered cube of side `epsilon`.
pub fn cube_mpf_objective<M: ContinuousModel + ?Sized>(
    model: &M,
    theta: &[f64],
    data: &ContinuousDataset,
    epsilon: f64,
    quad_points: usize,
) -> Result<f64> {
    let d = model.dim();
    if d > 2 {
        return Err(MpfError::TooLarge { d, max: 2 });
    }
    if quad_points < 8 {
        return Err(MpfError::InvalidArgument(format!(
            "cube quadrature needs >= 8 points per axis, got {quad_points}"
        )));
    }
    if !(epsilon > 0.0) {
        return Err(MpfError::InvalidArgument(format!("epsilon must be > 0, got {epsilon}")));
    }
    check_dim("dataset dimension", d, data.dim())?;
    check_dim("parameter vector", model.n_params(), theta.len())?;
    if data.is_empty() {
        return Ok(0.0);
    }
    let (nodes, weights) = gauss_legendre(quad_points);
    let half = 0.5 * epsilon;
    let total_points = quad_points.pow(d as u32);
    let mut sum = 0.0;
    let mut y = vec![0.0; d];
    for x in data.rows() {
        let e0 = model.energy(theta, x);
        let mut acc = 0.0;
        for flat in 0..total_points {
            let mut rem = flat;
            let mut w = 1.0;
            for axis in 0..d {
                let idx = rem % quad_points;
                rem /= quad_points;
                y[axis] = x[axis] + half * nodes[idx];
                w *= half * weights[idx];
            }
            acc += w * (0.5 * (e0 - model.energy(theta, &y))).exp();
        }
        sum += acc;
    }
    Ok(sum / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GaussianModel;
    use crate::oracle::finite_diff_grad;

    #[test]
    fn quadrature_rule_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(8);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        let m14: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((m14 - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn one_dimensional_closed_form() {
        let model = GaussianModel::new(1);
        let data = ContinuousDataset::new(1, vec![vec![1.0], vec![-1.0]]).unwrap();
        let eval = score_matching_objective(&model, &[1.0], &data).unwrap();
        assert!((eval.value + 0.5).abs() < 1e-15);
        assert!(eval.gradient[0].abs() < 1e-15);
        assert!(!eval.diagnostics.finite_difference);
        for theta in [0.3, 2.0] {
            let v = score_matching_objective(&model, &[theta], &data).unwrap().value;
            assert!((v - (0.5 * theta * theta - theta)).abs() < 1e-14);
        }
    }

    /// `E = c . x`, no analytic Laplacian: exercises the finite-difference path.
    struct Linear;
    impl ContinuousModel for Linear {
        fn dim(&self) -> usize { 2 }
        fn n_params(&self) -> usize { 2 }
        fn energy(&self, t: &[f64], q: &[f64]) -> f64 { t[0] * q[0] + t[1] * q[1] }
        fn grad_q(&self, t: &[f64], _q: &[f64], out: &mut [f64]) { out.copy_from_slice(t) }
        fn accumulate_param_grad(&self, _t: &[f64], q: &[f64], s: f64, out: &mut [f64]) {
            out[0] += s * q[0];
            out[1] += s * q[1];
        }
    }

    #[test]
    fn linear_energy_value_and_fd_fallback() {
        let data = ContinuousDataset::new(2, vec![vec![3.0, -1.0], vec![0.2, 8.0]]).unwrap();
        let eval = score_matching_objective(&Linear, &[1.5, -2.0], &data).unwrap();
        assert!((eval.value - 0.5 * (1.5f64 * 1.5 + 4.0)).abs() < 1e-9);
        assert!(eval.diagnostics.finite_difference);
        assert!((eval.gradient[0] - 1.5).abs() < 1e-6 && (eval.gradient[1] + 2.0).abs() < 1e-6);
    }

    #[test]
    fn two_dimensional_gaussian_matches_direct_summation() {
        let model = GaussianModel::new(2);
        let theta = [2.0, 0.5, 0.5, 1.0];
        let rows = vec![vec![0.1, -0.4], vec![1.2, 0.7], vec![-0.9, 2.2]];
        let data = ContinuousDataset::new(2, rows.clone()).unwrap();
        let eval = score_matching_objective(&model, &theta, &data).unwrap();
        let mut direct = 0.0;
        for x in &rows {
            let g0 = 2.0 * x[0] + 0.5 * x[1];
            let g1 = 0.5 * x[0] + 1.0 * x[1];
            direct += 0.5 * (g0 * g0 + g1 * g1) - 3.0;
        }
        direct /= 3.0;
        assert!((eval.value - direct).abs() <= 1e-10);
        let fd = finite_diff_grad(|t| score_matching_objective(&model, t, &data).unwrap().value, &theta, 1e-5);
        for (a, b) in eval.gradient.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn cube_objective_limits() {
        let model = GaussianModel::new(2);
        let data = ContinuousDataset::new(2, vec![vec![0.4, 0.1]]).unwrap();
        let v = cube_mpf_objective(&model, &[0.0; 4], &data, 0.3, 8).unwrap();
        assert!((v - 0.09).abs() <= 1e-12);
        assert!(cube_mpf_objective(&GaussianModel::new(3), &[0.0; 9], &ContinuousDataset::new(3, vec![]).unwrap(), 0.1, 8).is_err());
        assert!(cube_mpf_objective(&model, &[0.0; 4], &data, 0.3, 4).is_err());
    }

    #[test]
    fn cube_objective_matches_dense_simpson() {
        let model = GaussianModel::new(1);
        let data = ContinuousDataset::new(1, vec![vec![0.0]]).unwrap();
        let eps = 0.5;
        let v = cube_mpf_objective(&model, &[1.0], &data, eps, 16).unwrap();
        let n = 20_000;
        let h = eps / n as f64;
        let f = |a: f64| (-a * a / 4.0).exp();
        let mut s = f(-eps / 2.0) + f(eps / 2.0);
        for i in 1..n {
            let a = -eps / 2.0 + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a);
        }
        let simpson = s * h / 3.0;
        assert!((v - simpson).abs() <= 1e-10);
    }
}
