use super::ContinuousModel;

/// Quadratic energy `E(x) = 1/2 sum_ij A_ij x_i x_j` with `theta = A` row-major.
///
/// A smooth test model for score matching and the leapfrog integrator; with
/// `d = 1` it is `E = theta x^2 / 2`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianModel {
    d: usize,
}

impl GaussianModel {
    pub fn new(d: usize) -> Self {
        Self { d }
    }
}

impl ContinuousModel for GaussianModel {
    fn dim(&self) -> usize {
        self.d
    }

    fn n_params(&self) -> usize {
        self.d * self.d
    }

    fn energy(&self, theta: &[f64], q: &[f64]) -> f64 {
        let d = self.d;
        let mut e = 0.0;
        for i in 0..d {
            for j in 0..d {
                e += theta[i * d + j] * q[i] * q[j];
            }
        }
        0.5 * e
    }

    fn grad_q(&self, theta: &[f64], q: &[f64], out: &mut [f64]) {
        let d = self.d;
        for i in 0..d {
            let mut g = 0.0;
            for j in 0..d {
                g += 0.5 * (theta[i * d + j] + theta[j * d + i]) * q[j];
            }
            out[i] = g;
        }
    }

    fn accumulate_param_grad(&self, _theta: &[f64], q: &[f64], scale: f64, out: &mut [f64]) {
        let d = self.d;
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] += scale * 0.5 * q[i] * q[j];
            }
        }
    }

    fn laplacian(&self, theta: &[f64], _q: &[f64]) -> Option<f64> {
        Some((0..self.d).map(|i| theta[i * self.d + i]).sum())
    }

    fn accumulate_score_param_grad(
        &self,
        _theta: &[f64],
        q: &[f64],
        u: &[f64],
        scale: f64,
        out: &mut [f64],
    ) -> bool {
        let d = self.d;
        for k in 0..d {
            for l in 0..d {
                out[k * d + l] += scale * 0.5 * (u[k] * q[l] + u[l] * q[k]);
            }
        }
        true
    }

    fn accumulate_laplacian_param_grad(&self, _: &[f64], _: &[f64], scale: f64, out: &mut [f64]) -> bool {
        for k in 0..self.d {
            out[k * self.d + k] += scale;
        }
        true
    }
}
