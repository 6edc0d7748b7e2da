//! As the connectivity cube shrinks, the rescaled flow objective approaches
//! score matching with a residual of order eps^2.

use mpf::dataset::ContinuousDataset;
use mpf::model::GaussianModel;
use mpf::mpf::{cube_mpf_objective, score_matching_objective};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> mpf::Result<()> {
    let model = GaussianModel::new(1);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data = ContinuousDataset::new(1, (0..100).map(|_| vec![rng.random_range(-2.0..2.0)]).collect())?;
    let theta = [0.7];
    let sm = score_matching_objective(&model, &theta, &data)?.value;
    println!("score matching: {sm:.10}");
    for eps in [0.08, 0.04, 0.02, 0.01] {
        let k = cube_mpf_objective(&model, &theta, &data, eps, 16)?;
        let rescaled = (k - eps) * 48.0 / eps.powi(3);
        println!("eps {eps:<5} rescaled flow {rescaled:.10}  relative gap {:.3e}", ((rescaled - sm) / sm).abs());
    }
    Ok(())
}
