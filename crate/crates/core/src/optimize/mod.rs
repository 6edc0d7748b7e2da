//! Deterministic minimizers: L-BFGS with a strong-Wolfe line search, and
//! fixed-schedule gradient descent.

mod gd;
mod lbfgs;

pub use gd::{gd_minimize, RateSchedule};
pub use lbfgs::{lbfgs_minimize, lbfgs_minimize_observed};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    /// Stored correction pairs.
    pub memory: usize,
    pub max_iters: usize,
    /// Stop when the gradient infinity-norm drops below this.
    pub grad_tol: f64,
    /// Stop when the relative objective change drops below this.
    pub f_tol: f64,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    /// Function evaluations allowed per line search.
    pub max_line_search: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iters: 2000,
            grad_tol: 1e-7,
            f_tol: 1e-12,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            max_line_search: 40,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> crate::Result<()> {
        if self.memory == 0 || !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err(crate::MpfError::InvalidArgument(format!(
                "optimizer options need memory >= 1 and 0 < c1 < c2 < 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizeStatus {
    GradientTolerance,
    FunctionTolerance,
    MaxIterations,
    /// No acceptable step was found; the best point so far is returned.
    LineSearchFailed,
    /// A non-finite gradient stopped the run.
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub value: f64,
    pub grad_norm: f64,
    pub elapsed_s: f64,
}

/// Accepted iterates, starting with the initial point as iteration 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeTrace {
    pub records: Vec<IterationRecord>,
    pub status: OptimizeStatus,
}

impl OptimizeTrace {
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }
}
