//! Continuous-state flow objective with Hamiltonian connectivity.
//!
//! States are augmented with unit-Gaussian momenta. Each data point is
//! connected to the point reached by a fixed leapfrog trajectory under the
//! connectivity parameters `theta_H`, followed by a momentum flip. That map is
//! an involution and preserves phase-space volume, so the connection is
//! symmetric. The same-position momentum term of the full connectivity does
//! not depend on `theta` and is omitted.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::ContinuousDataset;
use crate::error::{check_dim, MpfError, Result};
use crate::model::ContinuousModel;
use crate::objective::{reduce_partials, ObjectiveEval, Partial, REDUCE_CHUNK};
use crate::optimize::{lbfgs_minimize, OptimizerOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
}

impl PhaseState {
    pub fn new(q: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        check_dim("momentum", q.len(), v.len())?;
        Ok(Self { q, v })
    }

    fn kinetic(&self) -> f64 {
        0.5 * self.v.iter().map(|v| v * v).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeapfrogConfig {
    pub step_size: f64,
    pub n_steps: usize,
}

impl Default for LeapfrogConfig {
    fn default() -> Self {
        Self {
            step_size: 0.1,
            n_steps: 10,
        }
    }
}

impl LeapfrogConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) || self.n_steps == 0 {
            return Err(MpfError::InvalidArgument(format!(
                "leapfrog needs step_size > 0 and n_steps >= 1, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn total_time(&self) -> f64 {
        self.step_size * self.n_steps as f64
    }
}

/// Parameters driving the dynamics, held fixed while `theta` is optimized.
#[derive(Debug, Clone, PartialEq)]
pub struct HmcConnectivity {
    pub theta_h: Vec<f64>,
    pub config: LeapfrogConfig,
}

/// Pairs every observation with a momentum drawn from `N(0, I)`.
pub fn augment_momenta(data: &ContinuousDataset, seed: u64) -> Vec<PhaseState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    data.rows()
        .iter()
        .map(|q| PhaseState {
            q: q.clone(),
            v: (0..q.len()).map(|_| StandardNormal.sample(&mut rng)).collect(),
        })
        .collect()
}

/// Runs `n_steps` leapfrog steps under `H = E(q; theta_h) + v.v/2` and negates
/// the momentum. Applying it twice returns the input up to round-off.
pub fn leapfrog_transit<M: ContinuousModel + ?Sized>(
    x: &PhaseState,
    model: &M,
    theta_h: &[f64],
    config: &LeapfrogConfig,
) -> Result<PhaseState> {
    config.validate()?;
    check_dim("phase state", model.dim(), x.q.len())?;
    check_dim("momentum", model.dim(), x.v.len())?;
    check_dim("connectivity parameters", model.n_params(), theta_h.len())?;
    let h = config.step_size;
    let mut q = x.q.clone();
    let mut v = x.v.clone();
    let mut force = vec![0.0; q.len()];
    model.grad_q(theta_h, &q, &mut force);
    for _ in 0..config.n_steps {
        for (vi, fi) in v.iter_mut().zip(&force) {
            *vi -= 0.5 * h * fi;
        }
        for (qi, vi) in q.iter_mut().zip(&v) {
            *qi += h * vi;
        }
        model.grad_q(theta_h, &q, &mut force);
        if force.iter().any(|f| !f.is_finite()) {
            return Err(MpfError::NonFinite("energy gradient during leapfrog".into()));
        }
        for (vi, fi) in v.iter_mut().zip(&force) {
            *vi -= 0.5 * h * fi;
        }
    }
    v.iter_mut().for_each(|vi| *vi = -*vi);
    Ok(PhaseState { q, v })
}

/// Reduced Hamiltonian flow objective with cached transits:
///
/// `K(theta) = (1/M) sum_j exp((H(x_j; theta) - H(x'_j; theta)) / 2)`
///
/// where `x'_j` is the transit of `x_j` under the fixed connectivity.
pub struct HmpfObjective<'m, M: ContinuousModel + ?Sized> {
    model: &'m M,
    phase: Vec<PhaseState>,
    transits: Vec<PhaseState>,
    kinetic_gap: Vec<f64>,
    conn: HmcConnectivity,
}

impl<'m, M: ContinuousModel + ?Sized> HmpfObjective<'m, M> {
    pub fn new(model: &'m M, phase: Vec<PhaseState>, conn: HmcConnectivity) -> Result<Self> {
        if phase.is_empty() {
            return Err(MpfError::InvalidArgument("phase data must be nonempty".into()));
        }
        let transits = phase
            .par_iter()
            .map(|x| leapfrog_transit(x, model, &conn.theta_h, &conn.config))
            .collect::<Result<Vec<_>>>()?;
        let kinetic_gap = phase
            .iter()
            .zip(&transits)
            .map(|(a, b)| a.kinetic() - b.kinetic())
            .collect();
        Ok(Self {
            model,
            phase,
            transits,
            kinetic_gap,
            conn,
        })
    }

    pub fn connectivity(&self) -> &HmcConnectivity {
        &self.conn
    }

    pub fn transits(&self) -> &[PhaseState] {
        &self.transits
    }

    pub fn evaluate(&self, theta: &[f64]) -> Result<ObjectiveEval> {
        check_dim("parameter vector", self.model.n_params(), theta.len())?;
        let n = self.model.n_params();
        let index: Vec<usize> = (0..self.phase.len()).collect();
        let parts: Vec<Partial> = index
            .par_chunks(REDUCE_CHUNK)
            .map(|chunk| {
                let mut part = Partial::new(n);
                for &j in chunk {
                    let (x, y) = (&self.phase[j], &self.transits[j]);
                    let gap = self.model.energy(theta, &x.q) - self.model.energy(theta, &y.q)
                        + self.kinetic_gap[j];
                    let term = part.diagnostics.clamp(0.5 * gap).exp();
                    part.value += term;
                    self.model.accumulate_param_grad(theta, &x.q, 0.5 * term, &mut part.gradient);
                    self.model.accumulate_param_grad(theta, &y.q, -0.5 * term, &mut part.gradient);
                }
                part
            })
            .collect();
        let eval = reduce_partials(parts, n, 1.0 / self.phase.len() as f64);
        if !eval.is_finite() {
            return Err(MpfError::NonFinite("hamiltonian flow objective".into()));
        }
        Ok(eval)
    }
}

/// One-shot evaluation; prefer [`HmpfObjective`] when `theta_H` is reused.
pub fn hmpf_objective<M: ContinuousModel + ?Sized>(
    theta: &[f64],
    phase_data: &[PhaseState],
    conn: &HmcConnectivity,
    model: &M,
) -> Result<ObjectiveEval> {
    HmpfObjective::new(model, phase_data.to_vec(), conn.clone())?.evaluate(theta)
}

/// Settings for the alternating `theta` / `theta_H` refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmcSchedule {
    pub outer_rounds: usize,
    /// L-BFGS iterations per round.
    pub inner_steps: usize,
    pub leapfrog: LeapfrogConfig,
    pub seed: u64,
}

impl Default for HmcSchedule {
    fn default() -> Self {
        Self {
            outer_rounds: 10,
            inner_steps: 100,
            leapfrog: LeapfrogConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmcFit {
    /// `theta` at the start and after every round.
    pub trajectory: Vec<Vec<f64>>,
    /// Objective at the end of every round.
    pub round_objectives: Vec<f64>,
    /// Wall-clock seconds since the start at the end of every round.
    pub round_elapsed_s: Vec<f64>,
}

impl HmcFit {
    pub fn last(&self) -> &[f64] {
        self.trajectory.last().expect("trajectory holds theta0")
    }
}

/// Alternates truncated L-BFGS on the Hamiltonian flow objective with
/// `theta_H <- theta`. Momenta are redrawn every round from a round-derived seed.
pub fn iterate_mpf_hmc<M: ContinuousModel + ?Sized>(
    model: &M,
    theta0: &[f64],
    data: &ContinuousDataset,
    schedule: &HmcSchedule,
) -> Result<HmcFit> {
    check_dim("parameter vector", model.n_params(), theta0.len())?;
    check_dim("dataset dimension", model.dim(), data.dim())?;
    schedule.leapfrog.validate()?;
    let mut theta = theta0.to_vec();
    let mut fit = HmcFit {
        trajectory: vec![theta.clone()],
        round_objectives: Vec::new(),
        round_elapsed_s: Vec::new(),
    };
    let start = std::time::Instant::now();
    let opts = OptimizerOptions {
        max_iters: schedule.inner_steps,
        ..OptimizerOptions::default()
    };
    for round in 0..schedule.outer_rounds {
        let round_seed = schedule
            .seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(round as u64);
        let phase = augment_momenta(data, round_seed);
        let conn = HmcConnectivity {
            theta_h: theta.clone(),
            config: schedule.leapfrog,
        };
        let objective = HmpfObjective::new(model, phase, conn)?;
        let (next, trace) = lbfgs_minimize(|t| objective.evaluate(t), &theta, &opts)?;
        theta = next;
        fit.round_objectives
            .push(trace.records.last().map(|r| r.value).unwrap_or(f64::NAN));
        fit.trajectory.push(theta.clone());
        fit.round_elapsed_s.push(start.elapsed().as_secs_f64());
        log::debug!("hmc round {round}: objective {:?}", fit.round_objectives.last());
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GaussianModel, IcaModel, IcaParameters};
    use crate::oracle::finite_diff_grad;
    use rand::Rng;

    fn random_phase(d: usize, rng: &mut impl Rng) -> PhaseState {
        PhaseState {
            q: (0..d).map(|_| rng.random_range(-2.0..2.0)).collect(),
            v: (0..d).map(|_| rng.random_range(-2.0..2.0)).collect(),
        }
    }

    #[test]
    fn free_particle_drifts() {
        let model = GaussianModel::new(2);
        let cfg = LeapfrogConfig { step_size: 0.25, n_steps: 8 };
        let x = PhaseState::new(vec![1.0, -1.0], vec![0.5, 2.0]).unwrap();
        let y = leapfrog_transit(&x, &model, &[0.0; 4], &cfg).unwrap();
        assert!((y.q[0] - 2.0).abs() < 1e-14 && (y.q[1] - 3.0).abs() < 1e-14);
        assert_eq!(y.v, vec![-0.5, -2.0]);
    }

    #[test]
    fn transit_is_an_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ica = IcaModel::new(3);
        let theta = IcaParameters::random_gaussian(3, 1.0, &mut rng).as_slice().to_vec();
        let gauss = GaussianModel::new(2);
        for (step, n) in [(0.01, 1), (0.1, 10), (0.3, 25)] {
            let cfg = LeapfrogConfig { step_size: step, n_steps: n };
            for _ in 0..10 {
                let x = random_phase(3, &mut rng);
                let back = leapfrog_transit(&leapfrog_transit(&x, &ica, &theta, &cfg).unwrap(), &ica, &theta, &cfg).unwrap();
                for (a, b) in back.q.iter().chain(&back.v).zip(x.q.iter().chain(&x.v)) {
                    assert!((a - b).abs() <= 1e-10);
                }
                let x = random_phase(2, &mut rng);
                let th = [1.0, 0.3, 0.3, 2.0];
                let back = leapfrog_transit(&leapfrog_transit(&x, &gauss, &th, &cfg).unwrap(), &gauss, &th, &cfg).unwrap();
                for (a, b) in back.q.iter().chain(&back.v).zip(x.q.iter().chain(&x.v)) {
                    assert!((a - b).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn preserves_phase_volume() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = GaussianModel::new(2);
        let th = [1.5, 0.2, 0.2, 0.7];
        let cfg = LeapfrogConfig { step_size: 0.2, n_steps: 7 };
        let x = random_phase(2, &mut rng);
        let flat = |p: &PhaseState| [p.q[0], p.q[1], p.v[0], p.v[1]];
        let h = 1e-6;
        let mut jac = nalgebra::Matrix4::<f64>::zeros();
        for c in 0..4 {
            let mut plus = flat(&x);
            let mut minus = flat(&x);
            plus[c] += h;
            minus[c] -= h;
            let mk = |a: [f64; 4]| PhaseState { q: vec![a[0], a[1]], v: vec![a[2], a[3]] };
            let yp = flat(&leapfrog_transit(&mk(plus), &model, &th, &cfg).unwrap());
            let ym = flat(&leapfrog_transit(&mk(minus), &model, &th, &cfg).unwrap());
            for r in 0..4 {
                jac[(r, c)] = (yp[r] - ym[r]) / (2.0 * h);
            }
        }
        assert!((jac.determinant().abs() - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn rejects_bad_config_and_empty_data() {
        let model = GaussianModel::new(1);
        let x = PhaseState::new(vec![0.0], vec![1.0]).unwrap();
        assert!(leapfrog_transit(&x, &model, &[1.0], &LeapfrogConfig { step_size: 0.0, n_steps: 1 }).is_err());
        assert!(leapfrog_transit(&x, &model, &[1.0], &LeapfrogConfig { step_size: 0.1, n_steps: 0 }).is_err());
        let conn = HmcConnectivity { theta_h: vec![1.0], config: LeapfrogConfig::default() };
        assert!(hmpf_objective(&[1.0], &[], &conn, &model).is_err());
    }

    #[test]
    fn constant_energy_gives_unit_objective() {
        let model = GaussianModel::new(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let phase: Vec<_> = (0..20).map(|_| random_phase(2, &mut rng)).collect();
        let conn = HmcConnectivity { theta_h: vec![0.0; 4], config: LeapfrogConfig::default() };
        let eval = hmpf_objective(&[0.0; 4], &phase, &conn, &model).unwrap();
        assert!((eval.value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gradient_matches_finite_differences_and_is_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let model = IcaModel::new(2);
        let theta_h = IcaParameters::random_gaussian(2, 1.0, &mut rng).as_slice().to_vec();
        let theta = IcaParameters::random_gaussian(2, 1.0, &mut rng).as_slice().to_vec();
        let rows: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
        let phase = augment_momenta(&ContinuousDataset::new(2, rows).unwrap(), 3);
        let conn = HmcConnectivity { theta_h, config: LeapfrogConfig::default() };
        let obj = HmpfObjective::new(&model, phase.clone(), conn.clone()).unwrap();
        let eval = obj.evaluate(&theta).unwrap();
        let fd = finite_diff_grad(|t| obj.evaluate(t).unwrap().value, &theta, 1e-6);
        for (a, b) in eval.gradient.iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-5 * a.abs().max(1e-2), "{a} vs {b}");
        }
        let doubled: Vec<_> = phase.iter().chain(&phase).cloned().collect();
        let v2 = hmpf_objective(&theta, &doubled, &conn, &model).unwrap().value;
        assert!((v2 - eval.value).abs() <= 1e-12 * eval.value);
        let mut reversed = phase.clone();
        reversed.reverse();
        let v3 = hmpf_objective(&theta, &reversed, &conn, &model).unwrap().value;
        assert!((v3 - eval.value).abs() <= 1e-12 * eval.value);
    }

    #[test]
    fn momenta_are_unit_gaussian() {
        assert!(augment_momenta(&ContinuousDataset::new(2, vec![]).unwrap(), 0).is_empty());
        let n = 100_000;
        let data = ContinuousDataset::new(2, vec![vec![0.0, 0.0]; n]).unwrap();
        let phase = augment_momenta(&data, 5);
        for c in 0..2 {
            let var: f64 = phase.iter().map(|p| p.v[c] * p.v[c]).sum::<f64>() / n as f64;
            // Standard error of the sample second moment of N(0,1) is sqrt(2/n).
            assert!((var - 1.0).abs() <= 3.0 * (2.0 / n as f64).sqrt());
        }
    }

    #[test]
    fn zero_inner_steps_keeps_theta() {
        let model = IcaModel::new(2);
        let data = ContinuousDataset::new(2, vec![vec![0.3, -0.2], vec![1.0, 0.5]]).unwrap();
        let theta0 = vec![1.0, 0.1, -0.2, 0.8];
        let schedule = HmcSchedule { outer_rounds: 3, inner_steps: 0, ..HmcSchedule::default() };
        let fit = iterate_mpf_hmc(&model, &theta0, &data, &schedule).unwrap();
        assert_eq!(fit.trajectory.len(), 4);
        assert!(fit.trajectory.iter().all(|t| t == &theta0));
    }
}
