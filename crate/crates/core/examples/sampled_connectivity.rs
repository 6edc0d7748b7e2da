//! Stochastic connectivity: every bit-flip neighbor is connected with
//! probability g. Single draws scatter around the expected objective.

use mpf::model::random_full_glass;
use mpf::mpf::{
    mpf_objective, mpf_objective_sampled, mpf_objective_sampled_expected, BitFlipConnectivity, ConnectivityMode,
    SampledConnectivity,
};
use mpf::samplers::exact_sample;

fn main() -> mpf::Result<()> {
    let truth = random_full_glass(10, 0.5, 1)?;
    let data = exact_sample(truth.model(), truth.theta(), 500, 2)?;
    let theta: Vec<f64> = truth.theta().iter().map(|v| 0.8 * v).collect();

    let full = mpf_objective(truth.model(), &theta, &data, ConnectivityMode::AllNeighbors)?.value;
    println!("all neighbors: {full:.6}");
    for g in [1.0, 0.5, 0.1] {
        let scheme = BitFlipConnectivity::symmetric(g);
        let expected = mpf_objective_sampled_expected(truth.model(), &theta, &data, &scheme)?.value;
        let draws: Vec<f64> = (0..200)
            .map(|seed| {
                let conn = SampledConnectivity { scheme, seed };
                mpf_objective_sampled(truth.model(), &theta, &data, &conn).map(|e| e.value)
            })
            .collect::<mpf::Result<_>>()?;
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let sd = (draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt();
        println!("g = {g}: expected {expected:.6}, mean of 200 draws {mean:.6} (sd {sd:.2e})");
    }
    Ok(())
}
