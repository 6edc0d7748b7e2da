//! Recovery metrics against a known generating model.

use std::collections::BTreeMap;

use crate::error::{check_dim, Result};
use crate::model::CouplingMatrix;
use crate::oracle::model_pair_correlations;

/// Gibbs sweeps used for model correlations when enumeration is out of reach.
pub const DEFAULT_CORR_BUDGET: usize = 200_000;

/// Mean square coupling error `eps_J` over the union of both supports plus
/// the `d` biases. A pair missing from one support counts as zero there.
pub fn eps_j(truth: &CouplingMatrix, estimate: &CouplingMatrix) -> Result<f64> {
    check_dim("model dimension", truth.dim(), estimate.dim())?;
    let mut pairs: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for (&e, &v) in truth.support().edges().iter().zip(truth.offdiag()) {
        pairs.entry(e).or_default().0 = v;
    }
    for (&e, &v) in estimate.support().edges().iter().zip(estimate.offdiag()) {
        pairs.entry(e).or_default().1 = v;
    }
    let pair_sq: f64 = pairs.values().map(|(a, b)| (a - b).powi(2)).sum();
    let bias_sq: f64 = truth.diag().iter().zip(estimate.diag()).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((pair_sq + bias_sq) / (pairs.len() + truth.dim()) as f64)
}

fn offdiag_pairs<'a>(a: &'a [Vec<f64>], b: &'a [Vec<f64>]) -> impl Iterator<Item = f64> + 'a {
    let d = a.len();
    (0..d).flat_map(move |i| (i + 1..d).map(move |j| a[i][j] - b[i][j]))
}

/// Mean square difference of connected correlations over `i < j`.
pub fn eps_corr_from(truth_corr: &[Vec<f64>], est_corr: &[Vec<f64>]) -> f64 {
    let d = truth_corr.len();
    let n = (d * d.saturating_sub(1) / 2).max(1) as f64;
    offdiag_pairs(truth_corr, est_corr).map(|v| v * v).sum::<f64>() / n
}

/// Mean absolute difference of connected correlations over `i < j`.
pub fn mean_abs_corr_error(truth_corr: &[Vec<f64>], est_corr: &[Vec<f64>]) -> f64 {
    let d = truth_corr.len();
    let n = (d * d.saturating_sub(1) / 2).max(1) as f64;
    offdiag_pairs(truth_corr, est_corr).map(f64::abs).sum::<f64>() / n
}

/// Truth-side state reused across many metric evaluations.
pub struct MetricContext {
    pub truth: CouplingMatrix,
    pub truth_corr: Vec<Vec<f64>>,
    pub corr_budget: usize,
    pub seed: u64,
}

impl MetricContext {
    pub fn new(truth: CouplingMatrix, corr_budget: usize, seed: u64) -> Result<Self> {
        let truth_corr = model_pair_correlations(&truth, corr_budget, seed)?;
        Ok(Self { truth, truth_corr, corr_budget, seed })
    }

    pub fn evaluate(&self, estimate: &CouplingMatrix) -> Result<RecoveryMetrics> {
        let corr = model_pair_correlations(estimate, self.corr_budget, self.seed.wrapping_add(1))?;
        Ok(RecoveryMetrics {
            eps_j: eps_j(&self.truth, estimate)?,
            eps_corr: eps_corr_from(&self.truth_corr, &corr),
            mean_abs_corr: mean_abs_corr_error(&self.truth_corr, &corr),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RecoveryMetrics {
    pub eps_j: f64,
    pub eps_corr: f64,
    pub mean_abs_corr: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{random_lattice_glass, Support};

    #[test]
    fn eps_j_over_union_of_supports() {
        let truth = random_lattice_glass(2, 2, 1.0, 3).unwrap();
        assert_eq!(eps_j(&truth, &truth).unwrap(), 0.0);
        let zero = CouplingMatrix::zeros(Support::full(4).unwrap());
        // 6 pairs in the union plus 4 biases.
        let expected = truth.theta().iter().map(|v| v * v).sum::<f64>() / 10.0;
        assert!((eps_j(&truth, &zero).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn corr_errors() {
        let a = vec![vec![0.25, 0.1], vec![0.1, 0.25]];
        let b = vec![vec![0.2, -0.1], vec![-0.1, 0.2]];
        assert!((eps_corr_from(&a, &b) - 0.04).abs() < 1e-15);
        assert!((mean_abs_corr_error(&a, &b) - 0.2).abs() < 1e-15);
    }
}
