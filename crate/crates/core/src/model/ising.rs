use std::collections::HashMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{BinaryState, DiscreteModel};
use crate::error::{check_dim, MpfError, Result};
use crate::params::{ParameterLayout, ParameterVector};

/// How a support set was generated; recorded in model files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SupportKind {
    /// Nearest neighbors on an open-boundary `rows x cols` square lattice.
    Lattice { rows: usize, cols: usize },
    /// Every unordered pair.
    Full,
    /// An explicit edge list.
    Custom,
}

/// The set of unordered pairs `(i, j)`, `i < j`, that may carry a coupling.
#[derive(Debug, Clone)]
pub struct Support {
    d: usize,
    kind: SupportKind,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<(usize, usize)>>,
    index: HashMap<(usize, usize), usize>,
}

impl Support {
    pub fn from_edges(d: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::build(d, SupportKind::Custom, edges)
    }

    pub fn lattice(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(MpfError::InvalidArgument(format!(
                "lattice needs rows, cols >= 1 (got {rows}x{cols})"
            )));
        }
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                if c + 1 < cols {
                    edges.push((i, i + 1));
                }
                if r + 1 < rows {
                    edges.push((i, i + cols));
                }
            }
        }
        Self::build(rows * cols, SupportKind::Lattice { rows, cols }, edges)
    }

    pub fn full(d: usize) -> Result<Self> {
        let edges = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j)));
        Self::build(d, SupportKind::Full, edges.collect::<Vec<_>>())
    }

    fn build(
        d: usize,
        kind: SupportKind,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        if d == 0 {
            return Err(MpfError::InvalidArgument("model dimension must be >= 1".into()));
        }
        let mut out = Self {
            d,
            kind,
            edges: Vec::new(),
            adjacency: vec![Vec::new(); d],
            index: HashMap::new(),
        };
        for (a, b) in edges {
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if i == j || j >= d {
                return Err(MpfError::InvalidArgument(format!(
                    "invalid edge ({a}, {b}) for d = {d}"
                )));
            }
            if out.index.contains_key(&(i, j)) {
                return Err(MpfError::InvalidArgument(format!("duplicate edge ({i}, {j})")));
            }
            let e = out.edges.len();
            out.edges.push((i, j));
            out.index.insert((i, j), e);
            out.adjacency[i].push((j, e));
            out.adjacency[j].push((i, e));
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn kind(&self) -> &SupportKind {
        &self.kind
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// `(neighbor, edge index)` pairs of site `i`.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        let key = if i < j { (i, j) } else { (j, i) };
        self.index.get(&key).copied()
    }
}

/// Ising spin glass over `{0,1}^d`:
/// `E(x) = sum_{i != j} J_ij x_i x_j + sum_i J_ii x_i`.
///
/// Each unordered pair is stored once, so its effective weight in the energy
/// is `2 J_ij`. Parameters are laid out as `[pairs (edge order) | biases]`.
#[derive(Debug, Clone)]
pub struct IsingModel {
    support: Arc<Support>,
    layout: Arc<ParameterLayout>,
}

impl IsingModel {
    pub fn new(support: Support) -> Self {
        let layout = Arc::new(ParameterLayout::new([
            ("pairs", support.n_edges()),
            ("bias", support.dim()),
        ]));
        Self {
            support: Arc::new(support),
            layout,
        }
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn layout(&self) -> &Arc<ParameterLayout> {
        &self.layout
    }

    pub fn n_edges(&self) -> usize {
        self.support.n_edges()
    }

    /// `E(x_k = 1) - E(x_k = 0)` given the other bits.
    pub fn local_gap(&self, theta: &[f64], x: &[u8], k: usize) -> f64 {
        let e = self.n_edges();
        let field: f64 = self.support.adjacency[k]
            .iter()
            .map(|&(m, idx)| theta[idx] * x[m] as f64)
            .sum();
        2.0 * field + theta[e + k]
    }

    pub fn check_theta(&self, theta: &[f64]) -> Result<()> {
        check_dim("ising parameters", self.layout.len(), theta.len())
    }
}

impl DiscreteModel for IsingModel {
    fn dim(&self) -> usize {
        self.support.d
    }

    fn n_params(&self) -> usize {
        self.layout.len()
    }

    fn energy(&self, theta: &[f64], x: &[u8]) -> f64 {
        let e = self.n_edges();
        let mut pair = 0.0;
        for (idx, &(i, j)) in self.support.edges.iter().enumerate() {
            if x[i] & x[j] == 1 {
                pair += theta[idx];
            }
        }
        let mut bias = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            if xi == 1 {
                bias += theta[e + i];
            }
        }
        2.0 * pair + bias
    }

    fn flip_delta(&self, theta: &[f64], x: &[u8], k: usize) -> f64 {
        (1.0 - 2.0 * x[k] as f64) * self.local_gap(theta, x, k)
    }

    fn accumulate_param_grad(&self, _theta: &[f64], x: &[u8], scale: f64, out: &mut [f64]) {
        let e = self.n_edges();
        for (idx, &(i, j)) in self.support.edges.iter().enumerate() {
            if x[i] & x[j] == 1 {
                out[idx] += 2.0 * scale;
            }
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi == 1 {
                out[e + i] += scale;
            }
        }
    }

    fn accumulate_flip_grad_diff(
        &self,
        _theta: &[f64],
        x: &[u8],
        k: usize,
        scale: f64,
        out: &mut [f64],
    ) {
        let s = 2.0 * x[k] as f64 - 1.0;
        for &(m, idx) in &self.support.adjacency[k] {
            if x[m] == 1 {
                out[idx] += 2.0 * s * scale;
            }
        }
        out[self.n_edges() + k] += s * scale;
    }
}

/// An Ising model together with concrete coupling values.
#[derive(Debug, Clone)]
pub struct CouplingMatrix {
    model: IsingModel,
    theta: Vec<f64>,
}

impl CouplingMatrix {
    pub fn new(support: Support, offdiag: Vec<f64>, diag: Vec<f64>) -> Result<Self> {
        check_dim("pair couplings", support.n_edges(), offdiag.len())?;
        check_dim("bias terms", support.dim(), diag.len())?;
        let mut theta = offdiag;
        theta.extend(diag);
        Ok(Self {
            model: IsingModel::new(support),
            theta,
        })
    }

    pub fn from_params(model: IsingModel, theta: &[f64]) -> Result<Self> {
        model.check_theta(theta)?;
        Ok(Self {
            model,
            theta: theta.to_vec(),
        })
    }

    pub fn zeros(support: Support) -> Self {
        let n = support.n_edges() + support.dim();
        Self {
            model: IsingModel::new(support),
            theta: vec![0.0; n],
        }
    }

    pub fn model(&self) -> &IsingModel {
        &self.model
    }

    pub fn support(&self) -> &Support {
        self.model.support()
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn params(&self) -> ParameterVector {
        ParameterVector::new(self.theta.clone(), self.model.layout.clone())
            .expect("layout matches by construction")
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.theta[..self.model.n_edges()]
    }

    pub fn diag(&self) -> &[f64] {
        &self.theta[self.model.n_edges()..]
    }

    /// Symmetric lookup; zero off the support. `get(i, i)` is the bias.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag()[i];
        }
        self.support()
            .edge_index(i, j)
            .map(|e| self.theta[e])
            .unwrap_or(0.0)
    }

    /// Dense symmetric `d x d` matrix with biases on the diagonal.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut m = vec![vec![0.0; d]; d];
        for (e, &(i, j)) in self.support().edges().iter().enumerate() {
            m[i][j] = self.theta[e];
            m[j][i] = self.theta[e];
        }
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = self.diag()[i];
        }
        m
    }

    pub fn energy(&self, x: &BinaryState) -> Result<f64> {
        check_dim("binary state", self.dim(), x.dim())?;
        Ok(self.model.energy(&self.theta, x.bits()))
    }

    pub fn local_gap(&self, x: &[u8], k: usize) -> f64 {
        self.model.local_gap(&self.theta, x, k)
    }
}

pub fn ising_energy(x: &BinaryState, j: &CouplingMatrix) -> Result<f64> {
    j.energy(x)
}

/// `E(x with bit k flipped) - E(x)` in time proportional to the degree of `k`.
pub fn flip_energy_delta(x: &BinaryState, k: usize, j: &CouplingMatrix) -> Result<f64> {
    check_dim("binary state", j.dim(), x.dim())?;
    if k >= x.dim() {
        return Err(MpfError::IndexOutOfRange {
            index: k,
            dim: x.dim(),
        });
    }
    Ok(j.model.flip_delta(&j.theta, x.bits(), k))
}

pub fn ising_param_grad(x: &BinaryState, j: &CouplingMatrix) -> Result<ParameterVector> {
    check_dim("binary state", j.dim(), x.dim())?;
    let mut g = ParameterVector::zeros(j.model.layout.clone());
    j.model.accumulate_param_grad(&j.theta, x.bits(), 1.0, &mut g);
    Ok(g)
}

/// The same model in spin variables `s = 2x - 1`:
/// `E = -sum_edges w_e s_i s_j - sum_i h_i s_i + const`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinCouplings {
    /// One per support edge, in edge order.
    pub w: Vec<f64>,
    pub h: Vec<f64>,
}

impl SpinCouplings {
    pub fn from_binary(j: &CouplingMatrix) -> Self {
        let w = j.offdiag().iter().map(|v| -0.5 * v).collect();
        let mut h: Vec<f64> = j.diag().iter().map(|v| -0.5 * v).collect();
        for (e, &(a, b)) in j.support().edges().iter().enumerate() {
            h[a] -= 0.5 * j.offdiag()[e];
            h[b] -= 0.5 * j.offdiag()[e];
        }
        Self { w, h }
    }

    /// Inverse of [`SpinCouplings::from_binary`] on the given support.
    pub fn to_binary(&self, support: Support) -> Result<CouplingMatrix> {
        check_dim("spin couplings", support.n_edges(), self.w.len())?;
        check_dim("spin fields", support.dim(), self.h.len())?;
        let offdiag: Vec<f64> = self.w.iter().map(|v| -2.0 * v).collect();
        let mut diag: Vec<f64> = self.h.iter().map(|v| -2.0 * v).collect();
        for (e, &(a, b)) in support.edges().iter().enumerate() {
            diag[a] -= offdiag[e];
            diag[b] -= offdiag[e];
        }
        CouplingMatrix::new(support, offdiag, diag)
    }
}

fn glass_on(support: Support, sigma2: f64, seed: u64) -> Result<CouplingMatrix> {
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(MpfError::InvalidArgument(format!("sigma2 must be >= 0, got {sigma2}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma2.sqrt()).expect("finite standard deviation");
    let offdiag: Vec<f64> = (0..support.n_edges()).map(|_| normal.sample(&mut rng)).collect();
    // Each full column, diagonal included, sums to zero.
    let mut diag = vec![0.0; support.dim()];
    for (e, &(i, j)) in support.edges().iter().enumerate() {
        diag[i] -= offdiag[e];
        diag[j] -= offdiag[e];
    }
    CouplingMatrix::new(support, offdiag, diag)
}

/// Nearest-neighbor glass on an open-boundary lattice with `N(0, sigma2)`
/// couplings and column-sum-zero biases.
pub fn random_lattice_glass(rows: usize, cols: usize, sigma2: f64, seed: u64) -> Result<CouplingMatrix> {
    glass_on(Support::lattice(rows, cols)?, sigma2, seed)
}

/// Fully connected glass with `N(0, sigma2)` couplings and column-sum-zero biases.
pub fn random_full_glass(d: usize, sigma2: f64, seed: u64) -> Result<CouplingMatrix> {
    glass_on(Support::full(d)?, sigma2, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn pair_model() -> CouplingMatrix {
        CouplingMatrix::new(Support::full(2).unwrap(), vec![1.0], vec![0.0, 0.0]).unwrap()
    }

    fn random_state(d: usize, rng: &mut impl Rng) -> BinaryState {
        BinaryState::new((0..d).map(|_| rng.random_range(0..2u8)).collect()).unwrap()
    }

    /// Naive double loop over the dense matrix with both pair orders.
    fn naive_energy(j: &CouplingMatrix, x: &BinaryState) -> f64 {
        let dense = j.to_dense();
        let b = x.bits();
        let d = b.len();
        let mut e = 0.0;
        for i in 0..d {
            for k in 0..d {
                if i != k {
                    e += dense[i][k] * (b[i] * b[k]) as f64;
                }
            }
            e += dense[i][i] * b[i] as f64;
        }
        e
    }

    #[test]
    fn hand_computed_values() {
        let j = pair_model();
        let x = BinaryState::new(vec![1, 1]).unwrap();
        assert_eq!(ising_energy(&x, &j).unwrap(), 2.0);
        assert_eq!(flip_energy_delta(&x, 0, &j).unwrap(), -2.0);
        let g = ising_param_grad(&x, &j).unwrap();
        assert_eq!(&g[..], &[2.0, 1.0, 1.0]);
        let zero = BinaryState::zeros(2);
        assert_eq!(ising_energy(&zero, &j).unwrap(), 0.0);
        assert!(ising_param_grad(&zero, &j).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn errors_on_bad_input() {
        let j = pair_model();
        let x3 = BinaryState::zeros(3);
        assert!(ising_energy(&x3, &j).is_err());
        assert!(flip_energy_delta(&BinaryState::zeros(2), 2, &j).is_err());
        assert!(random_lattice_glass(0, 3, 1.0, 0).is_err());
    }

    #[test]
    fn energy_matches_double_loop() {
        let j = random_full_glass(8, 2.0, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x = random_state(8, &mut rng);
            let fast = ising_energy(&x, &j).unwrap();
            let slow = naive_energy(&j, &x);
            assert!((fast - slow).abs() <= 1e-12 * slow.abs().max(1.0));
        }
    }

    #[test]
    fn zero_couplings_give_zero_delta() {
        let j = CouplingMatrix::zeros(Support::lattice(2, 3).unwrap());
        for idx in 0..64 {
            let x = BinaryState::from_index(idx, 6);
            for k in 0..6 {
                assert_eq!(flip_energy_delta(&x, k, &j).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn param_grad_matches_finite_differences() {
        let j = random_lattice_glass(3, 3, 1.0, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = 1e-6;
        for _ in 0..10 {
            let x = random_state(9, &mut rng);
            let g = ising_param_grad(&x, &j).unwrap();
            for p in 0..g.len() {
                let mut tp = j.theta().to_vec();
                let mut tm = j.theta().to_vec();
                tp[p] += h;
                tm[p] -= h;
                let ep = j.model().energy(&tp, x.bits());
                let em = j.model().energy(&tm, x.bits());
                let fd = (ep - em) / (2.0 * h);
                assert!((fd - g[p]).abs() <= 1e-6 * g[p].abs().max(1.0), "param {p}");
            }
        }
    }

    #[test]
    fn column_sums_vanish_and_complement_symmetry_holds() {
        let j = random_lattice_glass(3, 4, 10.0, 7).unwrap();
        let dense = j.to_dense();
        for c in 0..12 {
            let s: f64 = dense.iter().map(|row| row[c]).sum();
            assert!(s.abs() <= 1e-12);
        }
        for idx in 0..(1u64 << 12) {
            let x = BinaryState::from_index(idx, 12);
            let a = ising_energy(&x, &j).unwrap();
            let b = ising_energy(&x.complement(), &j).unwrap();
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        }
    }

    #[test]
    fn lattice_has_open_boundary() {
        let s = Support::lattice(3, 3).unwrap();
        assert_eq!(s.n_edges(), 12);
        assert!(s.edge_index(2, 3).is_none());
        assert!(s.edge_index(0, 3).is_some());
        assert_eq!(s.neighbors(4).len(), 4);
        assert_eq!(s.neighbors(0).len(), 2);
    }

    proptest! {
        #[test]
        fn flip_delta_matches_recompute_and_is_antisymmetric(seed in 0u64..500, k in 0usize..10) {
            let j = random_full_glass(10, 3.0, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
            let x = random_state(10, &mut rng);
            let y = x.flipped(k);
            let delta = flip_energy_delta(&x, k, &j).unwrap();
            let full = ising_energy(&y, &j).unwrap() - ising_energy(&x, &j).unwrap();
            prop_assert!((delta - full).abs() <= 1e-12 * full.abs().max(1.0));
            let back = flip_energy_delta(&y, k, &j).unwrap();
            prop_assert_eq!(delta + back, 0.0);
        }
    }

    #[test]
    fn spin_form_round_trips_and_matches_energy_differences() {
        let j = random_lattice_glass(2, 3, 1.0, 17).unwrap();
        let spin = SpinCouplings::from_binary(&j);
        let back = spin.to_binary(j.support().clone()).unwrap();
        for (a, b) in back.theta().iter().zip(j.theta()) {
            assert!((a - b).abs() < 1e-12);
        }
        let spin_energy = |x: &BinaryState| {
            let s: Vec<f64> = x.bits().iter().map(|&b| 2.0 * b as f64 - 1.0).collect();
            let mut e = 0.0;
            for (k, &(a, b)) in j.support().edges().iter().enumerate() {
                e -= spin.w[k] * s[a] * s[b];
            }
            e - s.iter().zip(&spin.h).map(|(s, h)| s * h).sum::<f64>()
        };
        let zero = BinaryState::zeros(6);
        let offset = j.energy(&zero).unwrap() - spin_energy(&zero);
        for idx in 0..64 {
            let x = BinaryState::from_index(idx, 6);
            assert!((j.energy(&x).unwrap() - spin_energy(&x) - offset).abs() < 1e-12);
        }
        // Column-sum-zero biases mean zero spin fields.
        assert!(spin.h.iter().all(|h| h.abs() < 1e-12));
    }
}
