//! Comparison estimators: pseudolikelihood, contrastive divergence and
//! mean-field inversion with a TAP correction.

mod cd;
mod mft;
mod pseudolikelihood;

pub use cd::{cd_gradient, cd_train, cd_train_observed, CdConfig, CdStep, CdTrajectory};
pub use mft::{mft_tap_fit, MftTapConfig, MftTapFit};
pub use pseudolikelihood::pseudolikelihood_objective;
