use std::collections::VecDeque;
use std::time::Instant;

use super::{IterationRecord, OptimizeStatus, OptimizeTrace, OptimizerOptions};
use crate::error::{MpfError, Result};
use crate::objective::ObjectiveEval;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Point {
    alpha: f64,
    theta: Vec<f64>,
    eval: ObjectiveEval,
    dphi: f64,
}

struct LineSearch<'a, F> {
    objective: &'a mut F,
    theta: &'a [f64],
    dir: &'a [f64],
    phi0: f64,
    dphi0: f64,
    c1: f64,
    c2: f64,
    budget: usize,
}

impl<F> LineSearch<'_, F>
where
    F: FnMut(&[f64]) -> Result<ObjectiveEval>,
{
    fn eval(&mut self, alpha: f64) -> Result<Option<Point>> {
        if self.budget == 0 {
            return Ok(None);
        }
        self.budget -= 1;
        let theta: Vec<f64> = self
            .theta
            .iter()
            .zip(self.dir)
            .map(|(t, d)| t + alpha * d)
            .collect();
        let eval = (self.objective)(&theta)?;
        let dphi = dot(&eval.gradient, self.dir);
        Ok(Some(Point {
            alpha,
            theta,
            eval,
            dphi,
        }))
    }

    fn armijo(&self, p: &Point) -> bool {
        p.eval.is_finite() && p.eval.value <= self.phi0 + self.c1 * p.alpha * self.dphi0
    }

    fn curvature(&self, p: &Point) -> bool {
        p.dphi.abs() <= -self.c2 * self.dphi0
    }

    fn origin(&self) -> Point {
        Point {
            alpha: 0.0,
            theta: self.theta.to_vec(),
            eval: ObjectiveEval::new(self.phi0, Vec::new()),
            dphi: self.dphi0,
        }
    }

    /// Bracketing phase; returns a strong-Wolfe point, or the best
    /// sufficient-decrease point when the budget runs out.
    fn run(&mut self, alpha0: f64) -> Result<Option<Point>> {
        let mut prev = self.origin();
        let mut alpha = alpha0;
        loop {
            let Some(p) = self.eval(alpha)? else {
                return Ok(accepted(prev));
            };
            if !p.eval.is_finite() {
                alpha = 0.5 * (prev.alpha + alpha);
                continue;
            }
            if !self.armijo(&p) || (prev.alpha > 0.0 && p.eval.value >= prev.eval.value) {
                return self.zoom(prev, p);
            }
            if self.curvature(&p) {
                return Ok(Some(p));
            }
            if p.dphi >= 0.0 {
                return self.zoom(p, prev);
            }
            alpha = 2.0 * p.alpha;
            prev = p;
        }
    }

    /// `lo` satisfies sufficient decrease and has the lower value; the
    /// minimizer lies between `lo` and `hi`.
    fn zoom(&mut self, mut lo: Point, mut hi: Point) -> Result<Option<Point>> {
        loop {
            if (hi.alpha - lo.alpha).abs() <= 1e-16 * lo.alpha.abs().max(hi.alpha.abs()) {
                return Ok(accepted(lo));
            }
            let alpha = if hi.eval.is_finite() {
                cubic_min(lo.alpha, lo.eval.value, lo.dphi, hi.alpha, hi.eval.value, hi.dphi)
            } else {
                0.5 * (lo.alpha + hi.alpha)
            };
            let Some(p) = self.eval(alpha)? else {
                return Ok(accepted(lo));
            };
            if !self.armijo(&p) || p.eval.value >= lo.eval.value {
                hi = p;
            } else {
                if self.curvature(&p) {
                    return Ok(Some(p));
                }
                if p.dphi * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = p;
            }
        }
    }
}

/// The origin is never an acceptable step.
fn accepted(p: Point) -> Option<Point> {
    (p.alpha > 0.0).then_some(p)
}

/// Minimizer of the cubic matching values and slopes at both ends, kept
/// away from the endpoints; falls back to bisection.
fn cubic_min(a: f64, fa: f64, ga: f64, b: f64, fb: f64, gb: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let width = hi - lo;
    let d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - ga * gb;
    let mid = 0.5 * (lo + hi);
    if disc < 0.0 || !disc.is_finite() {
        return mid;
    }
    let d2 = disc.sqrt() * (b - a).signum();
    let denom = gb - ga + 2.0 * d2;
    if denom == 0.0 || !denom.is_finite() {
        return mid;
    }
    let t = b - (b - a) * ((gb + d2 - d1) / denom);
    if !t.is_finite() {
        return mid;
    }
    t.clamp(lo + 0.1 * width, hi - 0.1 * width)
}

/// L-BFGS with two-loop recursion and strong-Wolfe line search.
pub fn lbfgs_minimize<F>(
    objective: F,
    theta0: &[f64],
    opts: &OptimizerOptions,
) -> Result<(Vec<f64>, OptimizeTrace)>
where
    F: FnMut(&[f64]) -> Result<ObjectiveEval>,
{
    lbfgs_minimize_observed(objective, theta0, opts, |_, _| {})
}

/// As [`lbfgs_minimize`], calling `observer` after the initial point and every
/// accepted step.
pub fn lbfgs_minimize_observed<F, O>(
    mut objective: F,
    theta0: &[f64],
    opts: &OptimizerOptions,
    mut observer: O,
) -> Result<(Vec<f64>, OptimizeTrace)>
where
    F: FnMut(&[f64]) -> Result<ObjectiveEval>,
    O: FnMut(&IterationRecord, &[f64]),
{
    opts.validate()?;
    let start = Instant::now();
    let mut theta = theta0.to_vec();
    let mut eval = objective(&theta)?;
    if !eval.is_finite() {
        return Err(MpfError::NonFinite("objective or gradient at theta0".into()));
    }
    let record = |iter: usize, e: &ObjectiveEval| IterationRecord {
        iter,
        value: e.value,
        grad_norm: e.grad_inf_norm(),
        elapsed_s: start.elapsed().as_secs_f64(),
    };
    let mut records = vec![record(0, &eval)];
    observer(&records[0], &theta);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut status = OptimizeStatus::MaxIterations;
    let mut iter = 0;
    loop {
        if eval.grad_inf_norm() <= opts.grad_tol {
            status = OptimizeStatus::GradientTolerance;
            break;
        }
        if iter >= opts.max_iters {
            break;
        }
        let g = &eval.gradient;
        // Two-loop recursion.
        let mut dir: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &dir);
            dir.iter_mut().zip(y).for_each(|(d, yi)| *d -= a * yi);
            alphas.push(a);
        }
        let gamma = history
            .back()
            .map(|(s, y, _)| dot(s, y) / dot(y, y))
            .unwrap_or_else(|| 1.0 / dot(g, g).sqrt().max(1.0));
        dir.iter_mut().for_each(|d| *d *= gamma);
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &dir);
            dir.iter_mut().zip(s).for_each(|(d, si)| *d += (a - b) * si);
        }
        let mut dphi0 = dot(g, &dir);
        if !(dphi0 < 0.0) {
            history.clear();
            dir = g.iter().map(|v| -v / dot(g, g).sqrt().max(1.0)).collect();
            dphi0 = dot(g, &dir);
        }
        let found = LineSearch {
            objective: &mut objective,
            theta: &theta,
            dir: &dir,
            phi0: eval.value,
            dphi0,
            c1: opts.wolfe_c1,
            c2: opts.wolfe_c2,
            budget: opts.max_line_search,
        }
        .run(1.0)?;
        let Some(p) = found else {
            if history.is_empty() {
                status = OptimizeStatus::LineSearchFailed;
                log::warn!("line search failed at iteration {iter}; returning best point");
                break;
            }
            history.clear();
            continue;
        };
        let s: Vec<f64> = p.theta.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = p.eval.gradient.iter().zip(&eval.gradient).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let f_prev = eval.value;
        theta = p.theta;
        eval = p.eval;
        iter += 1;
        records.push(record(iter, &eval));
        observer(records.last().expect("just pushed"), &theta);
        let scale = f_prev.abs().max(eval.value.abs()).max(1.0);
        if (f_prev - eval.value).abs() <= opts.f_tol * scale {
            status = if eval.grad_inf_norm() <= opts.grad_tol {
                OptimizeStatus::GradientTolerance
            } else {
                OptimizeStatus::FunctionTolerance
            };
            break;
        }
    }
    Ok((theta, OptimizeTrace { records, status }))
}
