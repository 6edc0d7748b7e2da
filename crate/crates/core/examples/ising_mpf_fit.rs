//! Fit a lattice spin glass with minimum probability flow and compare the
//! estimate with the generating couplings.

use mpf::harness::metrics::{eps_j, MetricContext};
use mpf::model::{random_lattice_glass, CouplingMatrix};
use mpf::mpf::{mpf_objective, ConnectivityMode};
use mpf::optimize::{lbfgs_minimize, OptimizerOptions};
use mpf::samplers::{gibbs_sample, ChainConfig};

fn main() -> mpf::Result<()> {
    let truth = random_lattice_glass(4, 4, 1.0, 3)?;
    let data = gibbs_sample(&truth, 20_000, &ChainConfig { seed: 4, ..ChainConfig::default() })?;
    println!("{} samples, {} distinct states", data.total_weight(), data.len());

    let theta0 = vec![0.0; truth.theta().len()];
    for mode in [ConnectivityMode::Strict, ConnectivityMode::AllNeighbors] {
        let (theta, trace) =
            lbfgs_minimize(|t| mpf_objective(truth.model(), t, &data, mode), &theta0, &OptimizerOptions::default())?;
        let est = CouplingMatrix::from_params(truth.model().clone(), &theta)?;
        let metrics = MetricContext::new(truth.clone(), 0, 0)?.evaluate(&est)?;
        println!(
            "{mode:?}: {} iterations ({:?}), eps_J {:.5}, eps_corr {:.2e}",
            trace.records.len() - 1,
            trace.status,
            eps_j(&truth, &est)?,
            metrics.eps_corr
        );
    }
    Ok(())
}
