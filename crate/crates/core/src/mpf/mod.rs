//! Minimum probability flow objectives.
//!
//! * [`discrete`]: single-bit-flip connectivity over `{0,1}^d`.
//! * [`sampled`]: stochastically sampled connectivity with bias correction.
//! * [`hamiltonian`]: momentum-augmented continuous states connected by a
//!   leapfrog transit, plus the alternating `theta_H` refinement loop.
//! * [`score`]: score matching and the small-hypercube flow objective it is
//!   the limit of.

pub mod discrete;
pub mod hamiltonian;
pub mod sampled;
pub mod score;

pub use discrete::{mpf_objective, stationarity_residual, ConnectivityMode};
pub use hamiltonian::{
    augment_momenta, iterate_mpf_hmc, leapfrog_transit, HmcConnectivity, HmcFit, HmcSchedule,
    HmpfObjective, LeapfrogConfig, PhaseState,
};
pub use sampled::{
    mpf_objective_sampled, mpf_objective_sampled_expected, BitFlipConnectivity, Candidate,
    Connectivity, SampledConnectivity,
};
pub use score::{cube_mpf_objective, score_matching_objective};
