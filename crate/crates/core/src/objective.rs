use serde::{Deserialize, Serialize};

/// Exponents are clamped to this magnitude before `exp`.
pub const EXPONENT_CLAMP: f64 = 700.0;

/// Numeric bookkeeping attached to an objective evaluation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub max_exponent: f64,
    pub term_count: usize,
    pub clamped_terms: usize,
    /// Set when some derivative had to be taken by finite differences.
    pub finite_difference: bool,
}

impl Diagnostics {
    pub(crate) fn empty() -> Self {
        Self {
            max_exponent: f64::NEG_INFINITY,
            ..Self::default()
        }
    }

    pub(crate) fn merge(&mut self, other: &Diagnostics) {
        self.max_exponent = self.max_exponent.max(other.max_exponent);
        self.term_count += other.term_count;
        self.clamped_terms += other.clamped_terms;
        self.finite_difference |= other.finite_difference;
    }

    /// Records an exponent and returns its clamped value.
    pub(crate) fn clamp(&mut self, exponent: f64) -> f64 {
        self.term_count += 1;
        self.max_exponent = self.max_exponent.max(exponent);
        if exponent.abs() > EXPONENT_CLAMP {
            self.clamped_terms += 1;
            exponent.clamp(-EXPONENT_CLAMP, EXPONENT_CLAMP)
        } else {
            exponent
        }
    }
}

/// Objective value, flat gradient and diagnostics from one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl ObjectiveEval {
    pub fn new(value: f64, gradient: Vec<f64>) -> Self {
        Self {
            value,
            gradient,
            diagnostics: Diagnostics::default(),
        }
    }

    pub fn grad_inf_norm(&self) -> f64 {
        self.gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.gradient.iter().all(|g| g.is_finite())
    }
}

/// Chunk size for the parallel map; fixed so reductions are bit-identical
/// regardless of thread count.
pub(crate) const REDUCE_CHUNK: usize = 256;

/// Partial sums from one chunk of a parallel objective evaluation.
pub(crate) struct Partial {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl Partial {
    pub fn new(n: usize) -> Self {
        Self {
            value: 0.0,
            gradient: vec![0.0; n],
            diagnostics: Diagnostics::empty(),
        }
    }
}

/// Ordered reduction of chunk partials followed by a uniform scale.
pub(crate) fn reduce_partials(parts: Vec<Partial>, n: usize, scale: f64) -> ObjectiveEval {
    let mut total = Partial::new(n);
    for p in parts {
        total.value += p.value;
        for (t, g) in total.gradient.iter_mut().zip(&p.gradient) {
            *t += g;
        }
        total.diagnostics.merge(&p.diagnostics);
    }
    if total.diagnostics.clamped_terms > 0 {
        log::warn!(
            "{} exponent(s) clamped at +/-{EXPONENT_CLAMP}",
            total.diagnostics.clamped_terms
        );
    }
    total.gradient.iter_mut().for_each(|g| *g *= scale);
    ObjectiveEval {
        value: total.value * scale,
        gradient: total.gradient,
        diagnostics: total.diagnostics,
    }
}
