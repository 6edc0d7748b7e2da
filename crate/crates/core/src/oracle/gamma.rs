use super::{bits_of, check_gate, MAX_GAMMA_DIM};
use crate::error::{check_dim, MpfError, Result};
use crate::model::DiscreteModel;

/// Single-bit-flip rate matrix `Gamma_ij = exp((E_j - E_i) / 2)` for states
/// one flip apart, with the diagonal making every column sum to zero.
///
/// Stored sparsely: only the `d` outgoing rates of each state are kept.
#[derive(Debug, Clone)]
pub struct FullGamma {
    d: usize,
    /// `out_rates[j * d + k]` is the rate from state `j` to `j ^ (1 << k)`.
    out_rates: Vec<f64>,
    diag: Vec<f64>,
}

pub fn full_gamma<M: DiscreteModel + ?Sized>(model: &M, theta: &[f64]) -> Result<FullGamma> {
    let d = model.dim();
    check_gate(d, MAX_GAMMA_DIM)?;
    check_dim("parameter vector", model.n_params(), theta.len())?;
    let n = 1usize << d;
    let energies: Vec<f64> = (0..n).map(|i| model.energy(theta, &bits_of(i, d))).collect();
    let mut out_rates = vec![0.0; n * d];
    let mut diag = vec![0.0; n];
    for j in 0..n {
        let mut total = 0.0;
        for k in 0..d {
            let rate = (0.5 * (energies[j] - energies[j ^ (1 << k)])).exp();
            out_rates[j * d + k] = rate;
            total += rate;
        }
        diag[j] = -total;
    }
    if diag.iter().any(|v| !v.is_finite()) {
        return Err(MpfError::NonFinite("rate matrix entry".into()));
    }
    Ok(FullGamma { d, out_rates, diag })
}

impl FullGamma {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_states(&self) -> usize {
        self.diag.len()
    }

    /// Entry `Gamma_ij`: the rate from state `j` into state `i`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        let diff = i ^ j;
        if diff.count_ones() == 1 {
            self.out_rates[j * self.d + diff.trailing_zeros() as usize]
        } else {
            0.0
        }
    }

    /// `Gamma p`.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let d = self.d;
        (0..p.len())
            .map(|i| {
                let mut acc = self.diag[i] * p[i];
                for k in 0..d {
                    let j = i ^ (1 << k);
                    acc += self.out_rates[j * d + k] * p[j];
                }
                acc
            })
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n_states();
        (0..n).map(|i| (0..n).map(|j| self.get(i, j)).collect()).collect()
    }

    /// Largest `|sum_i Gamma_ij|` over columns.
    pub fn column_sum_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.n_states() {
            let off: f64 = self.out_rates[j * self.d..(j + 1) * self.d].iter().sum();
            worst = worst.max((off + self.diag[j]).abs());
        }
        worst
    }

    /// Largest `|Gamma_ji p_i - Gamma_ij p_j|` over connected pairs.
    pub fn detailed_balance_residual(&self, p: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.n_states() {
            for k in 0..self.d {
                let i = j ^ (1 << k);
                if i > j {
                    worst = worst.max((self.get(j, i) * p[i] - self.get(i, j) * p[j]).abs());
                }
            }
        }
        worst
    }

    fn max_exit_rate(&self) -> f64 {
        self.diag.iter().fold(0.0f64, |m, v| m.max(-v))
    }
}

/// Largest uniformized horizon `lambda * t` per step; keeps the Poisson
/// weights well inside floating-point range.
const MAX_HORIZON: f64 = 50.0;
const TAIL_TOL: f64 = 1e-20;

/// Solves the master equation: `p(t) = exp(t Gamma) p0`.
///
/// Uses uniformization: with `lambda >= max_j |Gamma_jj|`, `P = I + Gamma /
/// lambda` is a stochastic matrix and `exp(t Gamma) = sum_n Pois(n; lambda t)
/// P^n`. Every term is non-negative, so there is no cancellation. Long times
/// are split into steps of horizon at most 50.
pub fn propagate(p0: &[f64], gamma: &FullGamma, t: f64) -> Result<Vec<f64>> {
    check_dim("probability vector", gamma.n_states(), p0.len())?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(MpfError::InvalidArgument(format!("propagation time must be finite and >= 0, got {t}")));
    }
    let total: f64 = p0.iter().sum();
    if (total - 1.0).abs() > 1e-10 || p0.iter().any(|&v| v < 0.0) {
        return Err(MpfError::InvalidArgument(format!("p0 must be a probability vector (sum {total})")));
    }
    let lambda = gamma.max_exit_rate();
    if t == 0.0 || lambda == 0.0 {
        return Ok(p0.to_vec());
    }
    let steps = (lambda * t / MAX_HORIZON).ceil().max(1.0) as usize;
    let horizon = lambda * t / steps as f64;
    let mut p = p0.to_vec();
    for _ in 0..steps {
        p = uniformized_step(&p, gamma, lambda, horizon);
    }
    let sum: f64 = p.iter().sum();
    debug_assert!((sum - 1.0).abs() < 1e-10);
    p.iter_mut().for_each(|v| *v /= sum);
    Ok(p)
}

fn uniformized_step(p: &[f64], gamma: &FullGamma, lambda: f64, horizon: f64) -> Vec<f64> {
    let mut weight = (-horizon).exp();
    let mut term = p.to_vec();
    let mut out: Vec<f64> = term.iter().map(|v| weight * v).collect();
    let mut n = 0usize;
    // Past the Poisson mode the weights decay geometrically, so stopping at a
    // negligible weight bounds the discarded tail.
    while (n as f64) <= horizon || weight > TAIL_TOL {
        n += 1;
        let flow = gamma.apply(&term);
        for (t, f) in term.iter_mut().zip(&flow) {
            *t = (*t + f / lambda).max(0.0);
        }
        weight *= horizon / n as f64;
        for (o, t) in out.iter_mut().zip(&term) {
            *o += weight * t;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::DiscreteDataset;
    use crate::model::{random_full_glass, random_lattice_glass};
    use crate::oracle::{enumerate_distribution, exact_kl};

    #[test]
    fn structure_and_fixed_point() {
        let j = random_full_glass(6, 1.0, 21).unwrap();
        let gamma = full_gamma(j.model(), j.theta()).unwrap();
        let p = enumerate_distribution(j.model(), j.theta()).unwrap().probs;
        assert!(gamma.column_sum_residual() < 1e-10);
        assert!(gamma.detailed_balance_residual(&p) <= 1e-12);
        let flow = gamma.apply(&p);
        assert!(flow.iter().all(|v| v.abs() <= 1e-10));
        let dense = gamma.to_dense();
        for (i, row) in dense.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                assert!(i == k || v >= 0.0);
                assert_eq!(v, gamma.get(i, k));
            }
        }
    }

    #[test]
    fn propagation_conserves_and_converges() {
        let j = random_lattice_glass(2, 3, 1.0, 4).unwrap();
        let gamma = full_gamma(j.model(), j.theta()).unwrap();
        let pinf = enumerate_distribution(j.model(), j.theta()).unwrap().probs;
        let mut p0 = vec![0.0; 64];
        p0[5] = 0.75;
        p0[40] = 0.25;
        assert_eq!(propagate(&p0, &gamma, 0.0).unwrap(), p0);
        for t in [1e-6, 0.3, 2.0, 17.0] {
            let p = propagate(&p0, &gamma, t).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|&v| v >= -1e-12));
        }
        let p = propagate(&p0, &gamma, 1e3).unwrap();
        for (a, b) in p.iter().zip(&pinf) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn matches_dense_series_at_short_time() {
        let j = random_full_glass(3, 0.5, 8).unwrap();
        let gamma = full_gamma(j.model(), j.theta()).unwrap();
        let dense = gamma.to_dense();
        let p0 = vec![0.125; 8];
        let t = 0.05;
        // Plain Taylor series is accurate here because t * |Gamma| is small.
        let mut term = p0.clone();
        let mut sum = p0.clone();
        for n in 1..30 {
            let next: Vec<f64> = (0..8).map(|i| (0..8).map(|k| dense[i][k] * term[k]).sum::<f64>() * t / n as f64).collect();
            term = next;
            sum.iter_mut().zip(&term).for_each(|(s, v)| *s += v);
        }
        let p = propagate(&p0, &gamma, t).unwrap();
        for (a, b) in p.iter().zip(&sum) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn kl_slope_matches_flow_objective() {
        let j = random_full_glass(6, 0.5, 1).unwrap();
        let data = crate::samplers::exact_sample(j.model(), j.theta(), 30, 6).unwrap();
        let p0 = data.empirical_distribution().unwrap();
        let gamma = full_gamma(j.model(), j.theta()).unwrap();
        let eps = 1e-6;
        let slope = exact_kl(&p0, &propagate(&p0, &gamma, eps).unwrap()).unwrap() / eps;
        let k = crate::mpf::mpf_objective(j.model(), j.theta(), &data, crate::mpf::ConnectivityMode::Strict)
            .unwrap()
            .value;
        assert!(((slope - k) / k).abs() < 1e-5, "{slope} vs {k}");
        let _ = DiscreteDataset::empty(6);
    }
}
