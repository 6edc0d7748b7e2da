//! Minimum probability flow estimation for energy-based models.
//!
//! The flow objective replaces the intractable partition function with the
//! initial rate at which probability leaves the data under dynamics that
//! converge to the model. This crate provides the objective for binary Ising
//! models (exact and sampled single-bit-flip connectivity) and for continuous
//! models (Hamiltonian transit and the score-matching limit), together with
//! baseline estimators, samplers and a brute-force oracle.
//!
//! ```
//! use mpf::model::random_lattice_glass;
//! use mpf::mpf::{mpf_objective, ConnectivityMode};
//! use mpf::optimize::{lbfgs_minimize, OptimizerOptions};
//! use mpf::samplers::exact_sample;
//!
//! let truth = random_lattice_glass(2, 3, 1.0, 7).unwrap();
//! let data = exact_sample(truth.model(), truth.theta(), 2000, 1).unwrap();
//! let theta0 = vec![0.0; truth.theta().len()];
//! let (theta, _) = lbfgs_minimize(
//!     |t| mpf_objective(truth.model(), t, &data, ConnectivityMode::Strict),
//!     &theta0,
//!     &OptimizerOptions::default(),
//! )
//! .unwrap();
//! assert_eq!(theta.len(), theta0.len());
//! ```

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod model;
pub mod mpf;
pub mod objective;
pub mod optimize;
pub mod oracle;
pub mod params;
pub mod samplers;

pub use error::{MpfError, Result};
