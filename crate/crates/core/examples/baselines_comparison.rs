//! Pseudolikelihood, contrastive divergence and mean field with TAP
//! correction on the same data, against the flow estimator.

use mpf::harness::fit::{fit_ising, Estimator, FitConfig};
use mpf::harness::metrics::MetricContext;
use mpf::baselines::{CdConfig, MftTapConfig};
use mpf::model::random_lattice_glass;
use mpf::mpf::ConnectivityMode;
use mpf::samplers::exact_sample;

fn main() -> mpf::Result<()> {
    let truth = random_lattice_glass(3, 4, 0.5, 21)?;
    let data = exact_sample(truth.model(), truth.theta(), 5_000, 22)?;
    let ctx = MetricContext::new(truth.clone(), 0, 0)?;
    let estimators = [
        Estimator::Mpf { mode: ConnectivityMode::AllNeighbors },
        Estimator::Pl,
        Estimator::Cd(CdConfig { n_updates: 300, ..CdConfig::default() }),
        Estimator::Cd(CdConfig { k: 10, n_updates: 300, ..CdConfig::default() }),
        Estimator::MftTap(MftTapConfig::default()),
    ];
    println!("{:<8} {:>10} {:>10} {:>8}", "method", "eps_J", "eps_corr", "seconds");
    for est in estimators {
        let cfg = FitConfig { estimator: est.clone(), ..FitConfig::default() };
        let report = fit_ising(truth.model(), &data, Some(&ctx), &cfg)?;
        let m = report.final_metrics.clone().unwrap_or_default();
        println!(
            "{:<8} {:>10.5} {:>10.2e} {:>8.2}",
            est.label(),
            m.eps_j.unwrap_or(f64::NAN),
            m.eps_corr.unwrap_or(f64::NAN),
            report.elapsed_s
        );
    }
    Ok(())
}
