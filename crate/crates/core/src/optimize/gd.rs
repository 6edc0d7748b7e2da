use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{IterationRecord, OptimizeStatus, OptimizeTrace};
use crate::error::{MpfError, Result};
use crate::objective::ObjectiveEval;

/// Step-size schedule over `n_updates` updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RateSchedule {
    Constant { rate: f64 },
    /// Linear interpolation from `start` at update 0 to `end` at the last update.
    Linear { start: f64, end: f64 },
}

impl RateSchedule {
    pub fn rate(&self, update: usize, n_updates: usize) -> f64 {
        match *self {
            RateSchedule::Constant { rate } => rate,
            RateSchedule::Linear { start, end } => {
                if n_updates <= 1 {
                    start
                } else {
                    let f = update as f64 / (n_updates - 1) as f64;
                    start + (end - start) * f
                }
            }
        }
    }
}

/// `theta <- theta - rate_t * grad` for `n_updates` steps, no line search.
pub fn gd_minimize<F>(
    mut objective: F,
    theta0: &[f64],
    schedule: RateSchedule,
    n_updates: usize,
) -> Result<(Vec<f64>, OptimizeTrace)>
where
    F: FnMut(&[f64]) -> Result<ObjectiveEval>,
{
    let start = Instant::now();
    let mut theta = theta0.to_vec();
    let mut eval = objective(&theta)?;
    if !eval.value.is_finite() {
        return Err(MpfError::NonFinite("objective at theta0".into()));
    }
    let mut records = vec![IterationRecord {
        iter: 0,
        value: eval.value,
        grad_norm: eval.grad_inf_norm(),
        elapsed_s: start.elapsed().as_secs_f64(),
    }];
    for t in 0..n_updates {
        if !eval.is_finite() {
            return Ok((theta, OptimizeTrace { records, status: OptimizeStatus::NonFinite }));
        }
        let rate = schedule.rate(t, n_updates);
        for (p, g) in theta.iter_mut().zip(&eval.gradient) {
            *p -= rate * g;
        }
        eval = objective(&theta)?;
        records.push(IterationRecord {
            iter: t + 1,
            value: eval.value,
            grad_norm: eval.grad_inf_norm(),
            elapsed_s: start.elapsed().as_secs_f64(),
        });
    }
    let status = if eval.is_finite() {
        OptimizeStatus::MaxIterations
    } else {
        OptimizeStatus::NonFinite
    };
    Ok((theta, OptimizeTrace { records, status }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_square(t: &[f64]) -> Result<ObjectiveEval> {
        Ok(ObjectiveEval::new(0.5 * t[0] * t[0], vec![t[0]]))
    }

    #[test]
    fn halves_on_quadratic() {
        let (theta, trace) = gd_minimize(half_square, &[8.0], RateSchedule::Constant { rate: 0.5 }, 3).unwrap();
        assert_eq!(theta, vec![1.0]);
        assert_eq!(trace.records.len(), 4);
        let (theta, _) = gd_minimize(half_square, &[8.0], RateSchedule::Constant { rate: 0.0 }, 5).unwrap();
        assert_eq!(theta, vec![8.0]);
    }

    #[test]
    fn linear_schedule_endpoints() {
        let s = RateSchedule::Linear { start: 3.0, end: 0.1 };
        assert!((s.rate(0, 500) - 3.0).abs() < 1e-12);
        assert!((s.rate(499, 500) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn stops_on_non_finite_gradient() {
        let f = |t: &[f64]| Ok(ObjectiveEval::new(t[0], vec![if t[0] < 0.0 { f64::NAN } else { 1.0 }]));
        let (_, trace) = gd_minimize(f, &[0.5], RateSchedule::Constant { rate: 1.0 }, 10).unwrap();
        assert_eq!(trace.status, OptimizeStatus::NonFinite);
        assert_eq!(trace.records.len(), 2);
    }
}
