//! Energy models and the primitives every estimator consumes.
//!
//! Discrete models expose single-bit-flip energy deltas so that the flow
//! objective never has to materialize neighboring states. Continuous models
//! expose spatial gradients for the leapfrog transit and score matching.

mod gaussian;
mod ica;
mod ising;
mod state;

pub use gaussian::GaussianModel;
pub use ica::{ica_energy, ica_energy_grad_x, ica_param_grad, IcaModel, IcaParameters};
pub use ising::{
    flip_energy_delta, ising_energy, ising_param_grad, random_full_glass, random_lattice_glass,
    CouplingMatrix, IsingModel, SpinCouplings, Support, SupportKind,
};
pub use state::BinaryState;

/// Energy model over `{0,1}^d` with a flat parameter vector.
pub trait DiscreteModel: Sync {
    fn dim(&self) -> usize;

    fn n_params(&self) -> usize;

    /// `E(x; theta)`.
    fn energy(&self, theta: &[f64], x: &[u8]) -> f64;

    /// `E(x with bit k flipped) - E(x)`.
    fn flip_delta(&self, theta: &[f64], x: &[u8], k: usize) -> f64 {
        let mut y = x.to_vec();
        y[k] ^= 1;
        self.energy(theta, &y) - self.energy(theta, x)
    }

    /// `out += scale * dE(x)/dtheta`.
    fn accumulate_param_grad(&self, theta: &[f64], x: &[u8], scale: f64, out: &mut [f64]);

    /// `out += scale * (dE(x)/dtheta - dE(flip_k x)/dtheta)`.
    fn accumulate_flip_grad_diff(
        &self,
        theta: &[f64],
        x: &[u8],
        k: usize,
        scale: f64,
        out: &mut [f64],
    ) {
        let mut y = x.to_vec();
        y[k] ^= 1;
        self.accumulate_param_grad(theta, x, scale, out);
        self.accumulate_param_grad(theta, &y, -scale, out);
    }
}

/// Energy model over `R^d` with a flat parameter vector.
pub trait ContinuousModel: Sync {
    fn dim(&self) -> usize;

    fn n_params(&self) -> usize;

    fn energy(&self, theta: &[f64], q: &[f64]) -> f64;

    /// Writes `dE/dq` into `out`.
    fn grad_q(&self, theta: &[f64], q: &[f64], out: &mut [f64]);

    /// `out += scale * dE(q)/dtheta`.
    fn accumulate_param_grad(&self, theta: &[f64], q: &[f64], scale: f64, out: &mut [f64]);

    /// Analytic `sum_i d^2E/dq_i^2`, when the model provides one.
    fn laplacian(&self, _theta: &[f64], _q: &[f64]) -> Option<f64> {
        None
    }

    /// `out += scale * sum_i u_i d(dE/dq_i)/dtheta`. Returns `false` when not
    /// available analytically.
    fn accumulate_score_param_grad(
        &self,
        _theta: &[f64],
        _q: &[f64],
        _u: &[f64],
        _scale: f64,
        _out: &mut [f64],
    ) -> bool {
        false
    }

    /// `out += scale * d(laplacian)/dtheta`. Returns `false` when not available.
    fn accumulate_laplacian_param_grad(
        &self,
        _theta: &[f64],
        _q: &[f64],
        _scale: f64,
        _out: &mut [f64],
    ) -> bool {
        false
    }
}

/// Adds a constant to every energy of a discrete model.
#[derive(Debug, Clone)]
pub struct EnergyShift<M> {
    pub inner: M,
    pub offset: f64,
}

impl<M: DiscreteModel> DiscreteModel for EnergyShift<M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn n_params(&self) -> usize {
        self.inner.n_params()
    }
    fn energy(&self, theta: &[f64], x: &[u8]) -> f64 {
        self.inner.energy(theta, x) + self.offset
    }
    fn accumulate_param_grad(&self, theta: &[f64], x: &[u8], scale: f64, out: &mut [f64]) {
        self.inner.accumulate_param_grad(theta, x, scale, out)
    }
}

/// Subgradient sign with `sign(0) = 0`.
pub(crate) fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
