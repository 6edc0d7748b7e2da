//! Data generators: heat-bath Gibbs and Swendsen-Wang chains for the Ising
//! model, and exact i.i.d. draws for small systems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use rand_distr::{Distribution, Exp1};

use crate::dataset::{ContinuousDataset, DiscreteDataset};
use crate::error::{MpfError, Result};
use crate::model::{BinaryState, CouplingMatrix, DiscreteModel, IcaParameters, IsingModel, SpinCouplings};
use crate::oracle::{bits_of, enumerate_distribution};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Sweeps discarded before the first kept state.
    pub burn_in: usize,
    /// Sweeps between kept states.
    pub thin: usize,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { burn_in: 1000, thin: 10, seed: 0 }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(MpfError::InvalidArgument("thin must be >= 1".into()));
        }
        Ok(())
    }
}

/// `p(x_k = 1 | rest)` given the on-minus-off energy gap of site `k`.
/// Shared by the Gibbs kernel and the pseudolikelihood.
pub fn conditional_on_probability(gap: f64) -> f64 {
    1.0 / (1.0 + gap.exp())
}

/// One ascending-order heat-bath sweep over all sites.
pub(crate) fn gibbs_sweep(model: &IsingModel, theta: &[f64], x: &mut [u8], rng: &mut impl Rng) {
    for k in 0..x.len() {
        let p_on = conditional_on_probability(model.local_gap(theta, x, k));
        x[k] = u8::from(rng.random::<f64>() < p_on);
    }
}

fn random_start(d: usize, rng: &mut impl Rng) -> Vec<u8> {
    (0..d).map(|_| u8::from(rng.random::<bool>())).collect()
}

/// Runs a chain and hands every kept state to `keep`.
fn run_chain(
    d: usize,
    n_kept: usize,
    cfg: &ChainConfig,
    mut sweep: impl FnMut(&mut [u8], &mut ChaCha8Rng),
    mut keep: impl FnMut(&[u8]),
) -> Result<()> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = random_start(d, &mut rng);
    for _ in 0..cfg.burn_in {
        sweep(&mut x, &mut rng);
    }
    for _ in 0..n_kept {
        for _ in 0..cfg.thin {
            sweep(&mut x, &mut rng);
        }
        keep(&x);
    }
    Ok(())
}

/// Kept Gibbs states in chain order.
pub fn gibbs_states(model: &CouplingMatrix, n_samples: usize, cfg: &ChainConfig) -> Result<Vec<BinaryState>> {
    let mut out = Vec::with_capacity(n_samples);
    let (m, theta) = (model.model(), model.theta());
    run_chain(
        model.dim(),
        n_samples,
        cfg,
        |x, rng| gibbs_sweep(m, theta, x, rng),
        |x| out.push(BinaryState::new(x.to_vec()).expect("chain states are binary")),
    )?;
    Ok(out)
}

pub fn gibbs_sample(model: &CouplingMatrix, n_samples: usize, cfg: &ChainConfig) -> Result<DiscreteDataset> {
    DiscreteDataset::from_samples(model.dim(), gibbs_states(model, n_samples, cfg)?)
}

/// Means and raw second moments over `n_samples` kept Gibbs states, without
/// storing the states.
pub fn gibbs_moments(
    model: &CouplingMatrix,
    n_samples: usize,
    cfg: &ChainConfig,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let d = model.dim();
    let mut mean = vec![0.0; d];
    let mut second = vec![vec![0.0; d]; d];
    let (m, theta) = (model.model(), model.theta());
    run_chain(d, n_samples, cfg, |x, rng| gibbs_sweep(m, theta, x, rng), |x| {
        for i in (0..d).filter(|&i| x[i] == 1) {
            mean[i] += 1.0;
            for j in (0..d).filter(|&j| x[j] == 1) {
                second[i][j] += 1.0;
            }
        }
    })?;
    let n = n_samples.max(1) as f64;
    mean.iter_mut().for_each(|v| *v /= n);
    second.iter_mut().flatten().for_each(|v| *v /= n);
    Ok((mean, second))
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

struct SwKernel<'a> {
    edges: &'a [(usize, usize)],
    spin: SpinCouplings,
    /// Bond activation probabilities `1 - exp(-2|w|)`.
    p_bond: Vec<f64>,
    parent: Vec<usize>,
    field: Vec<f64>,
}

impl<'a> SwKernel<'a> {
    fn new(model: &'a CouplingMatrix) -> Self {
        let spin = SpinCouplings::from_binary(model);
        let p_bond = spin.w.iter().map(|w| -(-2.0 * w.abs()).exp_m1()).collect();
        let d = model.dim();
        Self {
            edges: model.support().edges(),
            spin,
            p_bond,
            parent: vec![0; d],
            field: vec![0.0; d],
        }
    }

    fn sweep(&mut self, x: &mut [u8], rng: &mut impl Rng) {
        let d = x.len();
        let s = |b: u8| if b == 1 { 1.0 } else { -1.0 };
        self.parent.iter_mut().enumerate().for_each(|(i, p)| *p = i);
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            // Only bonds in their lower-energy configuration may activate.
            if self.spin.w[e] * s(x[i]) * s(x[j]) > 0.0 && rng.random::<f64>() < self.p_bond[e] {
                let (ri, rj) = (find(&mut self.parent, i), find(&mut self.parent, j));
                if ri != rj {
                    self.parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
        self.field.iter_mut().for_each(|f| *f = 0.0);
        for i in 0..d {
            let r = find(&mut self.parent, i);
            self.field[r] += self.spin.h[i] * s(x[i]);
        }
        // Roots are visited in ascending order. Each cluster takes a heat-bath
        // flip on its field energy; a Metropolis flip would always fire at
        // zero field and make the chain periodic.
        let mut flip = vec![false; d];
        for r in 0..d {
            if self.parent[r] == r {
                let accept = 1.0 / (1.0 + (2.0 * self.field[r]).exp());
                flip[r] = rng.random::<f64>() < accept;
            }
        }
        for i in 0..d {
            if flip[find(&mut self.parent, i)] {
                x[i] ^= 1;
            }
        }
    }
}

/// Kept Swendsen-Wang states in chain order.
pub fn swendsen_wang_states(
    model: &CouplingMatrix,
    n_samples: usize,
    cfg: &ChainConfig,
) -> Result<Vec<BinaryState>> {
    let mut kernel = SwKernel::new(model);
    let mut out = Vec::with_capacity(n_samples);
    run_chain(
        model.dim(),
        n_samples,
        cfg,
        |x, rng| kernel.sweep(x, rng),
        |x| out.push(BinaryState::new(x.to_vec()).expect("chain states are binary")),
    )?;
    Ok(out)
}

pub fn swendsen_wang_sample(model: &CouplingMatrix, n_samples: usize, cfg: &ChainConfig) -> Result<DiscreteDataset> {
    DiscreteDataset::from_samples(model.dim(), swendsen_wang_states(model, n_samples, cfg)?)
}

/// I.i.d. draws from the enumerated distribution.
pub fn exact_sample<M: DiscreteModel + ?Sized>(
    model: &M,
    theta: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<DiscreteDataset> {
    let d = model.dim();
    let dist = enumerate_distribution(model, theta)?;
    let mut cdf = Vec::with_capacity(dist.probs.len());
    let mut acc = 0.0;
    for p in &dist.probs {
        acc += p;
        cdf.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n_samples).map(|_| {
        let u = rng.random::<f64>() * acc;
        let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        BinaryState::new(bits_of(idx, d)).expect("binary by construction")
    });
    DiscreteDataset::from_samples(d, samples.collect::<Vec<_>>())
}

/// Observations `x = J^{-1} s` with i.i.d. unit Laplace sources, density
/// `exp(-|s|) / 2`, so the data follow the ICA model with filters `J`.
pub fn ica_sample(filters: &IcaParameters, n_samples: usize, seed: u64) -> Result<ContinuousDataset> {
    let d = filters.dim();
    let mixing = filters.mixing()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n_samples)
        .map(|_| {
            let s: Vec<f64> = (0..d)
                .map(|_| {
                    let e: f64 = Exp1.sample(&mut rng);
                    if rng.random::<bool>() { e } else { -e }
                })
                .collect();
            (0..d).map(|i| (0..d).map(|k| mixing[i * d + k] * s[k]).sum()).collect()
        })
        .collect();
    ContinuousDataset::new(d, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{random_lattice_glass, Support};
    use crate::oracle::EnumeratedDistribution;

    /// Multinomial 3-sigma check of state frequencies against `p`.
    fn within_three_sigma(data: &DiscreteDataset, dist: &EnumeratedDistribution) {
        let n = data.total_weight();
        let freq = data.empirical_distribution().unwrap();
        for (f, p) in freq.iter().zip(&dist.probs) {
            let sigma = (p * (1.0 - p) / n).sqrt();
            assert!((f - p).abs() <= 3.0 * sigma + 1e-12, "freq {f} vs p {p}");
        }
    }

    #[test]
    fn zero_couplings_give_fair_bits() {
        let j = CouplingMatrix::zeros(Support::lattice(2, 2).unwrap());
        let cfg = ChainConfig { burn_in: 10, thin: 1, seed: 5 };
        for data in [gibbs_sample(&j, 100_000, &cfg).unwrap(), swendsen_wang_sample(&j, 100_000, &cfg).unwrap()] {
            let (mean, _) = data.moments();
            let sigma = (0.25f64 / 1e5).sqrt();
            assert!(mean.iter().all(|m| (m - 0.5).abs() <= 3.0 * sigma), "{mean:?}");
        }
    }

    #[test]
    fn gibbs_kernel_preserves_the_distribution() {
        // Push the exact distribution through one sweep, site by site.
        let j = random_lattice_glass(2, 3, 2.0, 8).unwrap();
        let d = j.dim();
        let dist = enumerate_distribution(j.model(), j.theta()).unwrap();
        let mut p = dist.probs.clone();
        for k in 0..d {
            let mut next = vec![0.0; p.len()];
            for (idx, &mass) in p.iter().enumerate() {
                let x = bits_of(idx, d);
                let on = conditional_on_probability(j.local_gap(&x, k));
                next[idx | (1 << k)] += mass * on;
                next[idx & !(1 << k)] += mass * (1.0 - on);
            }
            p = next;
        }
        for (a, b) in p.iter().zip(&dist.probs) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn gibbs_matches_enumeration_d2() {
        let j = CouplingMatrix::new(Support::full(2).unwrap(), vec![0.9], vec![-0.4, 0.3]).unwrap();
        let cfg = ChainConfig { burn_in: 100, thin: 1, seed: 1 };
        let data = gibbs_sample(&j, 1_000_000, &cfg).unwrap();
        within_three_sigma(&data, &enumerate_distribution(j.model(), j.theta()).unwrap());
    }

    #[test]
    fn swendsen_wang_matches_enumeration_2x2() {
        let j = CouplingMatrix::new(
            Support::lattice(2, 2).unwrap(),
            vec![0.8, -0.6, 0.5, -0.7],
            vec![0.2, -0.3, 0.4, 0.1],
        )
        .unwrap();
        let cfg = ChainConfig { burn_in: 100, thin: 1, seed: 2 };
        let data = swendsen_wang_sample(&j, 1_000_000, &cfg).unwrap();
        within_three_sigma(&data, &enumerate_distribution(j.model(), j.theta()).unwrap());
    }

    #[test]
    fn exact_sample_basics() {
        let j = CouplingMatrix::zeros(Support::full(1).unwrap());
        assert!(exact_sample(j.model(), j.theta(), 0, 0).unwrap().is_empty());
        let data = exact_sample(j.model(), j.theta(), 100_000, 3).unwrap();
        let (mean, _) = data.moments();
        assert!((mean[0] - 0.5).abs() < 3.0 * (0.25f64 / 1e5).sqrt());
    }

    #[test]
    fn exact_sample_kl_is_small() {
        let j = random_lattice_glass(2, 4, 0.5, 12).unwrap();
        let dist = enumerate_distribution(j.model(), j.theta()).unwrap();
        let data = exact_sample(j.model(), j.theta(), 1_000_000, 4).unwrap();
        let kl = crate::oracle::exact_kl(&data.empirical_distribution().unwrap(), &dist.probs).unwrap();
        assert!(kl <= 5e-4, "kl {kl}");
    }

    #[test]
    fn same_seed_same_stream() {
        let j = random_lattice_glass(2, 3, 1.0, 3).unwrap();
        let cfg = ChainConfig { burn_in: 5, thin: 2, seed: 44 };
        assert_eq!(gibbs_states(&j, 200, &cfg).unwrap(), gibbs_states(&j, 200, &cfg).unwrap());
        assert_eq!(swendsen_wang_states(&j, 200, &cfg).unwrap(), swendsen_wang_states(&j, 200, &cfg).unwrap());
        assert!(ChainConfig { thin: 0, ..cfg }.validate().is_err());
    }

    #[test]
    fn ica_sources_are_unit_laplace() {
        let j = IcaParameters::random_well_conditioned(3, 1);
        let data = ica_sample(&j, 50_000, 2).unwrap();
        // Recovered sources: mean |s| = 1 and E[s^2] = 2 for unit Laplace.
        let mut abs = 0.0;
        let mut sq = 0.0;
        for x in data.rows() {
            for k in 0..3 {
                let s: f64 = j.row(k).iter().zip(x).map(|(a, b)| a * b).sum();
                abs += s.abs();
                sq += s * s;
            }
        }
        let n = 150_000.0;
        assert!((abs / n - 1.0).abs() < 0.02);
        assert!((sq / n - 2.0).abs() < 0.06);
    }
}
