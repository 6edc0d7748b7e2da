//! Weighted binary datasets and continuous datasets.

use std::collections::HashMap;

use crate::error::{check_dim, MpfError, Result};
use crate::model::BinaryState;

/// Weighted multiset of `d`-bit states. Repeated states are consolidated into
/// one entry with accumulated weight; entries keep first-seen order.
#[derive(Debug, Clone)]
pub struct DiscreteDataset {
    d: usize,
    states: Vec<BinaryState>,
    weights: Vec<f64>,
    total_weight: f64,
    index: HashMap<Vec<u64>, usize>,
    /// Per entry, the bit positions whose flip lands on another entry.
    data_neighbors: Vec<Vec<usize>>,
}

impl PartialEq for DiscreteDataset {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.states == other.states && self.weights == other.weights
    }
}

impl DiscreteDataset {
    pub fn empty(d: usize) -> Self {
        Self {
            d,
            states: Vec::new(),
            weights: Vec::new(),
            total_weight: 0.0,
            index: HashMap::new(),
            data_neighbors: Vec::new(),
        }
    }

    /// Unit-weight samples.
    pub fn from_samples(d: usize, samples: impl IntoIterator<Item = BinaryState>) -> Result<Self> {
        Self::from_weighted(d, samples.into_iter().map(|s| (s, 1.0)))
    }

    pub fn from_weighted(
        d: usize,
        entries: impl IntoIterator<Item = (BinaryState, f64)>,
    ) -> Result<Self> {
        let mut out = Self::empty(d);
        for (state, w) in entries {
            check_dim("dataset state", d, state.dim())?;
            if !(w > 0.0 && w.is_finite()) {
                return Err(MpfError::InvalidArgument(format!(
                    "sample weights must be positive and finite, got {w}"
                )));
            }
            let key = state.packed();
            match out.index.get(&key) {
                Some(&i) => out.weights[i] += w,
                None => {
                    out.index.insert(key, out.states.len());
                    out.states.push(state);
                    out.weights.push(w);
                }
            }
        }
        out.total_weight = out.weights.iter().sum();
        out.data_neighbors = out.compute_data_neighbors();
        Ok(out)
    }

    /// Full-support weighted dataset from a probability vector over `2^d`
    /// states; zero-probability states are skipped.
    pub fn from_probabilities(d: usize, probs: &[f64]) -> Result<Self> {
        check_dim("probability vector", 1usize << d, probs.len())?;
        Self::from_weighted(
            d,
            probs
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(i, &p)| (BinaryState::from_index(i as u64, d), p)),
        )
    }

    fn compute_data_neighbors(&self) -> Vec<Vec<usize>> {
        self.states
            .iter()
            .map(|s| {
                let mut key = s.packed();
                let mut hits = Vec::new();
                for k in 0..self.d {
                    key[k / 64] ^= 1u64 << (k % 64);
                    if self.index.contains_key(&key) {
                        hits.push(k);
                    }
                    key[k / 64] ^= 1u64 << (k % 64);
                }
                hits
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of distinct states.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn states(&self) -> &[BinaryState] {
        &self.states
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BinaryState, f64)> {
        self.states.iter().zip(self.weights.iter().copied())
    }

    pub fn contains(&self, state: &BinaryState) -> bool {
        self.index.contains_key(&state.packed())
    }

    pub fn weight_of(&self, state: &BinaryState) -> f64 {
        self.index
            .get(&state.packed())
            .map(|&i| self.weights[i])
            .unwrap_or(0.0)
    }

    pub(crate) fn data_neighbors(&self, entry: usize) -> &[usize] {
        &self.data_neighbors[entry]
    }

    /// Same states with every weight multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::from_weighted(self.d, self.iter().map(|(s, w)| (s.clone(), w * c)))
    }

    /// Empirical probability vector over `2^d` states.
    pub fn empirical_distribution(&self) -> Result<Vec<f64>> {
        if self.d > 24 {
            return Err(MpfError::TooLarge { d: self.d, max: 24 });
        }
        let mut p = vec![0.0; 1usize << self.d];
        for (s, w) in self.iter() {
            p[s.to_index() as usize] += w / self.total_weight;
        }
        Ok(p)
    }

    /// Weighted means `<x_i>` and second moments `<x_i x_j>`.
    pub fn moments(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let d = self.d;
        let mut mean = vec![0.0; d];
        let mut second = vec![vec![0.0; d]; d];
        for (s, w) in self.iter() {
            let b = s.bits();
            for i in 0..d {
                if b[i] == 1 {
                    mean[i] += w;
                    for j in 0..d {
                        if b[j] == 1 {
                            second[i][j] += w;
                        }
                    }
                }
            }
        }
        let tw = self.total_weight;
        mean.iter_mut().for_each(|m| *m /= tw);
        second.iter_mut().flatten().for_each(|m| *m /= tw);
        (mean, second)
    }
}

/// Rows of real-valued observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousDataset {
    d: usize,
    rows: Vec<Vec<f64>>,
}

impl ContinuousDataset {
    pub fn new(d: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        for r in &rows {
            check_dim("continuous row", d, r.len())?;
        }
        Ok(Self { d, rows })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}
