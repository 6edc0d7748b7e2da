use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::DiscreteDataset;
use crate::error::{check_dim, MpfError, Result};
use crate::model::DiscreteModel;
use crate::objective::{reduce_partials, ObjectiveEval, Partial, REDUCE_CHUNK};
use crate::oracle::enumerate_distribution;

/// Which single-bit-flip neighbors of a data state receive flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConnectivityMode {
    /// Only neighbors that are not themselves data states.
    #[default]
    Strict,
    /// Every neighbor.
    AllNeighbors,
}

/// Flow objective `K(theta)` and its gradient under single-bit-flip connectivity:
///
/// `K = (1/W) sum_j w_j sum_{i in N(j)} exp((E_j - E_i) / 2)`
///
/// with gradient `(1/2W) sum_j w_j sum_i exp(..) (dE_j - dE_i)`.
pub fn mpf_objective<M: DiscreteModel + ?Sized>(
    model: &M,
    theta: &[f64],
    data: &DiscreteDataset,
    mode: ConnectivityMode,
) -> Result<ObjectiveEval> {
    check_dim("dataset dimension", model.dim(), data.dim())?;
    check_dim("parameter vector", model.n_params(), theta.len())?;
    let n = model.n_params();
    let d = model.dim();
    if data.is_empty() {
        return Ok(ObjectiveEval::new(0.0, vec![0.0; n]));
    }
    let states = data.states();
    let weights = data.weights();
    let index: Vec<usize> = (0..states.len()).collect();
    let parts: Vec<Partial> = index
        .par_chunks(REDUCE_CHUNK)
        .map(|chunk| {
            let mut part = Partial::new(n);
            for &s in chunk {
                let x = states[s].bits();
                let w = weights[s];
                let skip = match mode {
                    ConnectivityMode::Strict => data.data_neighbors(s),
                    ConnectivityMode::AllNeighbors => &[],
                };
                let mut skip_iter = skip.iter().peekable();
                for k in 0..d {
                    if skip_iter.peek() == Some(&&k) {
                        skip_iter.next();
                        continue;
                    }
                    let exponent = part.diagnostics.clamp(-0.5 * model.flip_delta(theta, x, k));
                    let term = w * exponent.exp();
                    part.value += term;
                    model.accumulate_flip_grad_diff(theta, x, k, 0.5 * term, &mut part.gradient);
                }
            }
            part
        })
        .collect();
    let eval = reduce_partials(parts, n, 1.0 / data.total_weight());
    if !eval.is_finite() {
        return Err(MpfError::NonFinite("flow objective".into()));
    }
    Ok(eval)
}

/// Gradient infinity-norm of the flow objective (all neighbors) when the data
/// is the model's own enumerated distribution at `theta`. Detailed balance
/// makes this vanish.
pub fn stationarity_residual<M: DiscreteModel + ?Sized>(model: &M, theta: &[f64]) -> Result<f64> {
    let dist = enumerate_distribution(model, theta)?;
    let data = DiscreteDataset::from_probabilities(model.dim(), &dist.probs)?;
    Ok(mpf_objective(model, theta, &data, ConnectivityMode::AllNeighbors)?.grad_inf_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{random_full_glass, BinaryState, CouplingMatrix, EnergyShift, Support};
    use crate::oracle::{finite_diff_grad, full_gamma};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_data(d: usize, m: usize, seed: u64) -> DiscreteDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DiscreteDataset::from_samples(
            d,
            (0..m).map(|_| BinaryState::new((0..d).map(|_| rng.random_range(0..2)).collect()).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn single_bias_closed_form() {
        let j = CouplingMatrix::new(Support::full(1).unwrap(), vec![], vec![2.0]).unwrap();
        let data = DiscreteDataset::from_samples(1, [BinaryState::zeros(1)]).unwrap();
        let eval = mpf_objective(j.model(), j.theta(), &data, ConnectivityMode::Strict).unwrap();
        assert!((eval.value - (-1.0f64).exp()).abs() < 1e-15);
        assert!((eval.gradient[0] + 0.5 * (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(eval.diagnostics.term_count, 1);
    }

    #[test]
    fn zero_couplings_count_neighbors() {
        let j = CouplingMatrix::zeros(Support::full(4).unwrap());
        let s = |v: &str| v.parse::<BinaryState>().unwrap();
        // Pairwise Hamming distance >= 2.
        let data = DiscreteDataset::from_samples(4, [s("0000"), s("1100"), s("0011"), s("1111")]).unwrap();
        for mode in [ConnectivityMode::Strict, ConnectivityMode::AllNeighbors] {
            let eval = mpf_objective(j.model(), j.theta(), &data, mode).unwrap();
            assert_eq!(eval.value, 4.0);
        }
    }

    #[test]
    fn matches_full_gamma_sum() {
        let j = random_full_glass(3, 1.5, 4).unwrap();
        let s = |v: &str| v.parse::<BinaryState>().unwrap();
        let data = DiscreteDataset::from_samples(3, [s("010"), s("110")]).unwrap();
        let eval = mpf_objective(j.model(), j.theta(), &data, ConnectivityMode::Strict).unwrap();
        let gamma = full_gamma(j.model(), j.theta()).unwrap();
        let mut oracle = 0.0;
        for jdx in 0..8u64 {
            let sj = BinaryState::from_index(jdx, 3);
            if !data.contains(&sj) {
                continue;
            }
            for idx in 0..8u64 {
                if !data.contains(&BinaryState::from_index(idx, 3)) {
                    oracle += gamma.get(idx as usize, jdx as usize) / 2.0;
                }
            }
        }
        assert!((eval.value - oracle).abs() <= 1e-12 * oracle);
    }

    #[test]
    fn full_support_strict_is_degenerate() {
        let j = random_full_glass(4, 1.0, 1).unwrap();
        let data = DiscreteDataset::from_samples(4, (0..16).map(|i| BinaryState::from_index(i, 4))).unwrap();
        let eval = mpf_objective(j.model(), j.theta(), &data, ConnectivityMode::Strict).unwrap();
        assert_eq!(eval.value, 0.0);
        assert!(eval.gradient.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn weight_scale_and_energy_shift_invariance() {
        let j = random_full_glass(6, 1.0, 8).unwrap();
        let data = sample_data(6, 30, 2);
        let base = mpf_objective(j.model(), j.theta(), &data, ConnectivityMode::Strict).unwrap();
        let scaled = mpf_objective(j.model(), j.theta(), &data.scaled(7.5).unwrap(), ConnectivityMode::Strict).unwrap();
        let shifted_model = EnergyShift { inner: j.model().clone(), offset: 123.4 };
        let shifted = mpf_objective(&shifted_model, j.theta(), &data, ConnectivityMode::Strict).unwrap();
        for other in [&scaled, &shifted] {
            assert!((other.value - base.value).abs() <= 1e-12 * base.value);
            for (a, b) in other.gradient.iter().zip(&base.gradient) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn repeated_evaluation_is_bit_identical() {
        let j = random_full_glass(8, 1.0, 3).unwrap();
        let data = sample_data(8, 2000, 5);
        let a = mpf_objective(j.model(), j.theta(), &data, ConnectivityMode::Strict).unwrap();
        let b = mpf_objective(j.model(), j.theta(), &data, ConnectivityMode::Strict).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stationarity_at_generating_parameters() {
        let j = random_full_glass(6, 1.0, 6).unwrap();
        assert!(stationarity_residual(j.model(), j.theta()).unwrap() <= 1e-8);
        let single = CouplingMatrix::new(Support::full(1).unwrap(), vec![], vec![0.7]).unwrap();
        assert!(stationarity_residual(single.model(), single.theta()).unwrap() <= 1e-15);

        let dist = enumerate_distribution(j.model(), j.theta()).unwrap();
        let data = DiscreteDataset::from_probabilities(6, &dist.probs).unwrap();
        let mut perturbed = j.theta().to_vec();
        perturbed[0] += 0.1;
        let eval = mpf_objective(j.model(), &perturbed, &data, ConnectivityMode::AllNeighbors).unwrap();
        assert!(eval.grad_inf_norm() > 1e-3);
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let j = random_full_glass(3, 1.0, 0).unwrap();
        let data = sample_data(4, 3, 0);
        assert!(mpf_objective(j.model(), j.theta(), &data, ConnectivityMode::Strict).is_err());
        let data3 = sample_data(3, 3, 0);
        assert!(mpf_objective(j.model(), &[0.0], &data3, ConnectivityMode::Strict).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn gradient_matches_finite_differences(seed in 0u64..1000, strict in proptest::bool::ANY) {
            let j = random_full_glass(5, 1.0, seed).unwrap();
            let data = sample_data(5, 12, seed + 7);
            let mode = if strict { ConnectivityMode::Strict } else { ConnectivityMode::AllNeighbors };
            let eval = mpf_objective(j.model(), j.theta(), &data, mode).unwrap();
            let fd = finite_diff_grad(
                |t| mpf_objective(j.model(), t, &data, mode).unwrap().value,
                j.theta(),
                1e-5,
            );
            for (a, b) in eval.gradient.iter().zip(&fd) {
                prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1e-2));
            }
        }
    }
}
