use mpf::dataset::DiscreteDataset;
use mpf::harness::formats::{format_discrete, parse_discrete};
use mpf::model::{random_full_glass, BinaryState, GaussianModel, IcaModel, IcaParameters, SpinCouplings};
use mpf::mpf::{leapfrog_transit, mpf_objective, ConnectivityMode, LeapfrogConfig, PhaseState};
use mpf::oracle::{full_gamma, propagate};
use mpf::samplers::exact_sample;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mode(strict: bool) -> ConnectivityMode {
    if strict {
        ConnectivityMode::Strict
    } else {
        ConnectivityMode::AllNeighbors
    }
}

fn states(d: usize) -> impl Strategy<Value = Vec<BinaryState>> {
    prop::collection::vec(prop::collection::vec(0u8..2, d), 1..30)
        .prop_map(|rows| rows.into_iter().map(|b| BinaryState::new(b).unwrap()).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn objective_ignores_order_and_replication(seed in 0u64..500, rows in states(5), strict in any::<bool>(), copies in 1usize..4) {
        let j = random_full_glass(5, 1.0, seed).unwrap();
        let once = DiscreteDataset::from_samples(5, rows.clone()).unwrap();
        let mut reversed = rows.clone();
        reversed.reverse();
        let many = DiscreteDataset::from_samples(5, reversed.iter().cycle().take(copies * rows.len()).cloned()).unwrap();
        let a = mpf_objective(j.model(), j.theta(), &once, mode(strict)).unwrap();
        let b = mpf_objective(j.model(), j.theta(), &many, mode(strict)).unwrap();
        prop_assert!((a.value - b.value).abs() <= 1e-12 * a.value.max(1.0));
        for (x, y) in a.gradient.iter().zip(&b.gradient) {
            prop_assert!((x - y).abs() <= 1e-12 * a.value.max(1.0));
        }
    }

    #[test]
    fn objective_is_midpoint_convex(seed in 0u64..500, rows in states(4), strict in any::<bool>(), t in 0.0f64..1.0) {
        let j = random_full_glass(4, 1.0, seed).unwrap();
        let other = random_full_glass(4, 1.0, seed + 1000).unwrap();
        let data = DiscreteDataset::from_samples(4, rows).unwrap();
        let f = |th: &[f64]| mpf_objective(j.model(), th, &data, mode(strict)).unwrap().value;
        let mix: Vec<f64> = j.theta().iter().zip(other.theta()).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let bound = t * f(j.theta()) + (1.0 - t) * f(other.theta());
        prop_assert!(f(&mix) <= bound + 1e-10 * bound.max(1.0));
    }

    #[test]
    fn propagation_stays_a_distribution(seed in 0u64..500, t in 0.0f64..50.0) {
        let j = random_full_glass(5, 0.5, seed).unwrap();
        let gamma = full_gamma(j.model(), j.theta()).unwrap();
        let data = exact_sample(j.model(), j.theta(), 10, seed).unwrap();
        let p = propagate(&data.empirical_distribution().unwrap(), &gamma, t).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|&v| v >= -1e-12));
    }

    #[test]
    fn spin_couplings_round_trip(seed in 0u64..500, d in 2usize..8) {
        let j = random_full_glass(d, 2.0, seed).unwrap();
        let back = SpinCouplings::from_binary(&j).to_binary(j.support().clone()).unwrap();
        for (a, b) in back.theta().iter().zip(j.theta()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn dataset_text_round_trip(rows in states(7)) {
        let data = DiscreteDataset::from_samples(7, rows).unwrap();
        let back = parse_discrete(&format_discrete(&data)).unwrap();
        prop_assert_eq!(back.states(), data.states());
        prop_assert_eq!(back.weights(), data.weights());
    }

    #[test]
    fn leapfrog_transit_is_an_involution(seed in 0u64..500, q in prop::collection::vec(-2.0f64..2.0, 2), v in prop::collection::vec(-2.0f64..2.0, 2), n in 1usize..30) {
        let cfg = LeapfrogConfig { step_size: 0.05, n_steps: n };
        let x = PhaseState::new(q, v).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = IcaParameters::random_gaussian(2, 1.0, &mut rng).as_slice().to_vec();
        let ica = IcaModel::new(2);
        let back = leapfrog_transit(&leapfrog_transit(&x, &ica, &theta, &cfg).unwrap(), &ica, &theta, &cfg).unwrap();
        for (a, b) in back.q.iter().chain(&back.v).zip(x.q.iter().chain(&x.v)) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
        let gauss = GaussianModel::new(2);
        let th = [1.0, 0.2, 0.2, 0.5];
        let back = leapfrog_transit(&leapfrog_transit(&x, &gauss, &th, &cfg).unwrap(), &gauss, &th, &cfg).unwrap();
        for (a, b) in back.q.iter().chain(&back.v).zip(x.q.iter().chain(&x.v)) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }
}
