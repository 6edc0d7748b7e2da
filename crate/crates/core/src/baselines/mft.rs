use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::DiscreteDataset;
use crate::error::{MpfError, Result};
use crate::model::{CouplingMatrix, SpinCouplings, Support};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MftTapConfig {
    /// Ridge term in `A = (C^T C + lambda I)^+ C^T`.
    pub lambda: f64,
    pub tap_enabled: bool,
}

impl Default for MftTapConfig {
    fn default() -> Self {
        Self { lambda: 1e-6, tap_enabled: true }
    }
}

#[derive(Debug, Clone)]
pub struct MftTapFit {
    /// Fully connected estimate in the `{0,1}` parameterization.
    pub couplings: CouplingMatrix,
    pub warnings: Vec<String>,
}

/// Means strictly inside this margin of 0 and 1 are treated as usable.
const MEAN_MARGIN: f64 = 1e-9;

/// Mean-field inversion of the susceptibility, optionally TAP corrected.
///
/// Works in spins `s = 2x - 1` with `p(s) ~ exp(sum_{i<j} W_ij s_i s_j +
/// sum_i h_i s_i)`. With spin means `m` and covariance `C = 4 chi`, and `A`
/// the regularized inverse of `C`:
///
/// * naive mean field: `W_ij = -A_ij`;
/// * TAP: `A_ij = -W_ij - 2 m_i m_j W_ij^2`, solved for the root that tends
///   to `-A_ij` as `m_i m_j -> 0`, i.e.
///   `W_ij = (sqrt(1 - 8 m_i m_j A_ij) - 1) / (4 m_i m_j)`; a negative
///   discriminant falls back to the naive estimate.
///
/// Fields come from the self-consistency
/// `atanh(m_i) = h_i + sum_j W_ij m_j - m_i sum_j W_ij^2 (1 - m_j^2)`, the
/// last (Onsager) term only with TAP.
pub fn mft_tap_fit(data: &DiscreteDataset, cfg: &MftTapConfig) -> Result<MftTapFit> {
    if !(cfg.lambda >= 0.0) {
        return Err(MpfError::InvalidArgument(format!("lambda must be >= 0, got {}", cfg.lambda)));
    }
    if data.total_weight() < 2.0 {
        return Err(MpfError::InvalidArgument("mean-field fit needs at least 2 samples".into()));
    }
    let d = data.dim();
    let mut warnings = Vec::new();
    let (mean, second) = data.moments();
    let degenerate: Vec<bool> = mean.iter().map(|&p| p <= MEAN_MARGIN || p >= 1.0 - MEAN_MARGIN).collect();
    for (i, _) in degenerate.iter().enumerate().filter(|(_, &b)| b) {
        warnings.push(format!("unit {i} has mean {} outside (0,1); its couplings are set to 0", mean[i]));
    }
    let c = DMatrix::from_fn(d, d, |i, j| 4.0 * (second[i][j] - mean[i] * mean[j]));
    let gram = c.transpose() * &c + DMatrix::identity(d, d) * cfg.lambda;
    let tol = 1e-14 * gram.norm().max(f64::MIN_POSITIVE);
    let a = gram
        .pseudo_inverse(tol)
        .map_err(|e| MpfError::NonFinite(format!("pseudoinverse: {e}")))?
        * c.transpose();
    let m: Vec<f64> = mean
        .iter()
        .map(|&p| (2.0 * p - 1.0).clamp(-1.0 + 2.0 * MEAN_MARGIN, 1.0 - 2.0 * MEAN_MARGIN))
        .collect();
    let mut w = DMatrix::zeros(d, d);
    let mut fallbacks = 0;
    for i in 0..d {
        for j in i + 1..d {
            if degenerate[i] || degenerate[j] {
                continue;
            }
            let a_ij = 0.5 * (a[(i, j)] + a[(j, i)]);
            let mm = m[i] * m[j];
            let value = if !cfg.tap_enabled || mm.abs() < 1e-12 {
                -a_ij
            } else {
                let disc = 1.0 - 8.0 * mm * a_ij;
                if disc < 0.0 {
                    fallbacks += 1;
                    -a_ij
                } else {
                    (disc.sqrt() - 1.0) / (4.0 * mm)
                }
            };
            w[(i, j)] = value;
            w[(j, i)] = value;
        }
    }
    if fallbacks > 0 {
        warnings.push(format!("{fallbacks} pair(s) had no real TAP root; naive estimate used"));
    }
    let h: Vec<f64> = (0..d)
        .map(|i| {
            let mut h = m[i].atanh();
            for j in 0..d {
                h -= w[(i, j)] * m[j];
                if cfg.tap_enabled {
                    h += m[i] * w[(i, j)].powi(2) * (1.0 - m[j] * m[j]);
                }
            }
            h
        })
        .collect();
    let support = Support::full(d)?;
    let spin = SpinCouplings {
        w: support.edges().iter().map(|&(i, j)| w[(i, j)]).collect(),
        h,
    };
    for msg in &warnings {
        log::warn!("mft-tap: {msg}");
    }
    Ok(MftTapFit { couplings: spin.to_binary(support)?, warnings })
}
