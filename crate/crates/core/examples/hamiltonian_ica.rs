//! Continuous-state flow with leapfrog connectivity on a synthetic ICA
//! problem, against the exact maximum-likelihood fit.

use mpf::model::{IcaModel, IcaParameters};
use mpf::mpf::{iterate_mpf_hmc, HmcSchedule};
use mpf::optimize::OptimizerOptions;
use mpf::oracle::{ica_exact_ml_fit, ica_log_likelihood};
use mpf::samplers::ica_sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> mpf::Result<()> {
    let d = 4;
    let truth = IcaParameters::random_well_conditioned(d, 11);
    let data = ica_sample(&truth, 10_000, 12)?;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let theta0 = IcaParameters::random_gaussian(d, 1.0 / d as f64, &mut rng);

    let fit = iterate_mpf_hmc(&IcaModel::new(d), theta0.as_slice(), &data, &HmcSchedule { seed: 14, ..HmcSchedule::default() })?;
    for (round, theta) in fit.trajectory.iter().enumerate() {
        println!("round {round:>2}: log-likelihood {:.4}", ica_log_likelihood(theta, &data)?);
    }
    let (ml, _) = ica_exact_ml_fit(&data, IcaParameters::identity(d).as_slice(), &OptimizerOptions::default())?;
    println!("maximum likelihood: {:.4}", ica_log_likelihood(&ml, &data)?);
    println!("generating filters: {:.4}", ica_log_likelihood(truth.as_slice(), &data)?);
    Ok(())
}
