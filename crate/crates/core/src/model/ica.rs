use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{sign0, ContinuousModel};
use crate::error::{check_dim, MpfError, Result};
use crate::params::{ParameterLayout, ParameterVector};

/// Square ICA filter matrix, stored row-major; row `k` is filter `J_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct IcaParameters {
    d: usize,
    filters: Vec<f64>,
}

impl IcaParameters {
    pub fn new(d: usize, filters: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(MpfError::InvalidArgument("ICA dimension must be >= 1".into()));
        }
        check_dim("ICA filter entries", d * d, filters.len())?;
        Ok(Self { d, filters })
    }

    pub fn identity(d: usize) -> Self {
        let mut filters = vec![0.0; d * d];
        for k in 0..d {
            filters[k * d + k] = 1.0;
        }
        Self { d, filters }
    }

    /// Isotropic Gaussian entries with the given variance.
    pub fn random_gaussian(d: usize, variance: f64, rng: &mut impl Rng) -> Self {
        let normal = Normal::new(0.0, variance.sqrt()).expect("finite variance");
        Self {
            d,
            filters: (0..d * d).map(|_| normal.sample(rng)).collect(),
        }
    }

    /// Filters whose inverse, the mixing matrix, is the identity plus
    /// `N(0, 0.1)` noise; redrawn until the mixing condition number is below 5.
    pub fn random_well_conditioned(d: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.1f64.sqrt()).expect("finite variance");
        loop {
            let mixing = DMatrix::from_fn(d, d, |i, j| f64::from(u8::from(i == j)) + noise.sample(&mut rng));
            let sv = mixing.singular_values();
            let cond = sv.max() / sv.min();
            if cond < 5.0 {
                if let Some(inv) = mixing.try_inverse() {
                    let filters = (0..d * d).map(|k| inv[(k / d, k % d)]).collect();
                    return Self { d, filters };
                }
            }
        }
    }

    /// `J^{-1}`, the matrix mapping sources to observations.
    pub fn mixing(&self) -> Result<Vec<f64>> {
        let inv = DMatrix::from_row_slice(self.d, self.d, &self.filters)
            .try_inverse()
            .ok_or_else(|| MpfError::NonFinite("singular filter matrix".into()))?;
        Ok((0..self.d * self.d).map(|k| inv[(k / self.d, k % self.d)]).collect())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.filters
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.filters[k * self.d..(k + 1) * self.d]
    }

    pub fn params(&self) -> ParameterVector {
        ParameterVector::new(self.filters.clone(), IcaModel::new(self.d).layout())
            .expect("layout matches")
    }
}

/// ICA with a Laplace prior: `E(x; J) = sum_k |J_k x|`.
///
/// The `-log|det J|` normalizer is left out; it cancels in every energy
/// difference at fixed parameters.
#[derive(Debug, Clone, Copy)]
pub struct IcaModel {
    d: usize,
}

impl IcaModel {
    pub fn new(d: usize) -> Self {
        Self { d }
    }

    pub fn layout(&self) -> Arc<ParameterLayout> {
        Arc::new(ParameterLayout::new([("filters", self.d * self.d)]))
    }

    fn projection(&self, theta: &[f64], q: &[f64], k: usize) -> f64 {
        let row = &theta[k * self.d..(k + 1) * self.d];
        row.iter().zip(q).map(|(a, b)| a * b).sum()
    }
}

impl ContinuousModel for IcaModel {
    fn dim(&self) -> usize {
        self.d
    }

    fn n_params(&self) -> usize {
        self.d * self.d
    }

    fn energy(&self, theta: &[f64], q: &[f64]) -> f64 {
        (0..self.d).map(|k| self.projection(theta, q, k).abs()).sum()
    }

    fn grad_q(&self, theta: &[f64], q: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for k in 0..self.d {
            let s = sign0(self.projection(theta, q, k));
            if s != 0.0 {
                let row = &theta[k * self.d..(k + 1) * self.d];
                for (o, r) in out.iter_mut().zip(row) {
                    *o += s * r;
                }
            }
        }
    }

    fn accumulate_param_grad(&self, theta: &[f64], q: &[f64], scale: f64, out: &mut [f64]) {
        for k in 0..self.d {
            let s = sign0(self.projection(theta, q, k)) * scale;
            if s != 0.0 {
                for (l, ql) in q.iter().enumerate() {
                    out[k * self.d + l] += s * ql;
                }
            }
        }
    }

    fn laplacian(&self, _theta: &[f64], _q: &[f64]) -> Option<f64> {
        // Piecewise linear energy: zero almost everywhere.
        Some(0.0)
    }

    fn accumulate_score_param_grad(
        &self,
        theta: &[f64],
        q: &[f64],
        u: &[f64],
        scale: f64,
        out: &mut [f64],
    ) -> bool {
        for k in 0..self.d {
            let s = sign0(self.projection(theta, q, k)) * scale;
            if s != 0.0 {
                for (l, ul) in u.iter().enumerate() {
                    out[k * self.d + l] += s * ul;
                }
            }
        }
        true
    }

    fn accumulate_laplacian_param_grad(&self, _: &[f64], _: &[f64], _: f64, _: &mut [f64]) -> bool {
        true
    }
}

pub fn ica_energy(x: &[f64], j: &IcaParameters) -> Result<f64> {
    check_dim("ICA state", j.d, x.len())?;
    Ok(IcaModel::new(j.d).energy(&j.filters, x))
}

/// `sum_k sign(J_k x) J_k^T`, with `sign(0) = 0`.
pub fn ica_energy_grad_x(x: &[f64], j: &IcaParameters) -> Result<Vec<f64>> {
    check_dim("ICA state", j.d, x.len())?;
    let mut g = vec![0.0; j.d];
    IcaModel::new(j.d).grad_q(&j.filters, x, &mut g);
    Ok(g)
}

/// `dE/dJ_kl = sign(J_k x) x_l`.
pub fn ica_param_grad(x: &[f64], j: &IcaParameters) -> Result<ParameterVector> {
    check_dim("ICA state", j.d, x.len())?;
    let model = IcaModel::new(j.d);
    let mut g = ParameterVector::zeros(model.layout());
    model.accumulate_param_grad(&j.filters, x, 1.0, &mut g);
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_values() {
        let j = IcaParameters::identity(3);
        assert_eq!(ica_energy(&[1.0, 0.0, 0.0], &j).unwrap(), 1.0);
        assert_eq!(ica_energy(&[0.0; 3], &j).unwrap(), 0.0);
        let j2 = IcaParameters::identity(2);
        assert_eq!(ica_energy_grad_x(&[2.0, -3.0], &j2).unwrap(), vec![1.0, -1.0]);
        assert!(ica_energy_grad_x(&[0.0, 0.0], &j2).unwrap().iter().all(|&v| v == 0.0));
        assert!(ica_param_grad(&[0.0, 0.0], &j2).unwrap().iter().all(|&v| v == 0.0));
        assert!(ica_energy(&[1.0], &j2).is_err());
    }

    #[test]
    fn matches_naive_sum_and_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let j = IcaParameters::random_gaussian(4, 1.0, &mut rng);
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut naive = 0.0;
        for k in 0..4 {
            let mut p = 0.0;
            for l in 0..4 {
                p += j.row(k)[l] * x[l];
            }
            naive += p.abs();
            assert!(p.abs() > 1e-3, "test point sits near a kink");
        }
        let e = ica_energy(&x, &j).unwrap();
        assert!((e - naive).abs() <= 1e-12 * naive);

        let h = 1e-6;
        let gx = ica_energy_grad_x(&x, &j).unwrap();
        for l in 0..4 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[l] += h;
            xm[l] -= h;
            let fd = (ica_energy(&xp, &j).unwrap() - ica_energy(&xm, &j).unwrap()) / (2.0 * h);
            assert!((fd - gx[l]).abs() <= 1e-5 * gx[l].abs().max(1.0));
        }
        let gp = ica_param_grad(&x, &j).unwrap();
        for p in 0..16 {
            let mut tp = j.as_slice().to_vec();
            let mut tm = tp.clone();
            tp[p] += h;
            tm[p] -= h;
            let ep = ica_energy(&x, &IcaParameters::new(4, tp).unwrap()).unwrap();
            let em = ica_energy(&x, &IcaParameters::new(4, tm).unwrap()).unwrap();
            let fd = (ep - em) / (2.0 * h);
            assert!((fd - gp[p]).abs() <= 1e-5 * gp[p].abs().max(1.0));
        }
    }
}
