use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::brute::{single_link_value, Kernel};
use super::{AmplitudeGrid, CorrelatorEstimate, Method};
use crate::error::{Error, Result};
use crate::hamiltonian::{BoundaryPair, HamiltonianSpec};
use crate::lattice::LatticeSpec;
use crate::numerics::ComplexSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetropolisOptions {
    pub chains: usize,
    /// Proposals per chain after burn-in.
    pub steps: usize,
    #[serde(default)]
    pub burn_in: usize,
    pub seed: u64,
}

impl MetropolisOptions {
    pub fn new(chains: usize, steps: usize, seed: u64) -> Self {
        Self {
            chains,
            steps,
            burn_in: steps / 10,
            seed,
        }
    }
}

struct ChainResult {
    mean: Complex64,
    accepted: u64,
    proposed: u64,
}

/// Sample of interior slices on the amplitude grid.
struct State {
    quanta: Vec<Vec<u32>>,
    phases: Vec<Vec<u32>>,
    amps: Vec<Vec<Complex64>>,
}

impl State {
    fn start(interior: usize, sites: usize, grid: &AmplitudeGrid) -> Self {
        let base = grid.k / sites as u32;
        let extra = grid.k as usize % sites;
        let ns: Vec<u32> = (0..sites).map(|j| base + u32::from(j < extra)).collect();
        Self {
            quanta: vec![ns; interior],
            phases: vec![vec![0; sites]; interior],
            amps: vec![vec![Complex64::new(0.0, 0.0); sites]; interior],
        }
    }

    fn refresh(&mut self, t: usize, grid: &AmplitudeGrid, spacing: f64) {
        let p = grid.phase_points as f64;
        for j in 0..self.quanta[t].len() {
            let r = grid.ln_modulus(self.quanta[t][j], spacing).exp();
            let th = 2.0 * std::f64::consts::PI * self.phases[t][j] as f64 / p;
            self.amps[t][j] = Complex64::from_polar(r, th);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_chain(
    chain: usize,
    opts: &MetropolisOptions,
    grid: &AmplitudeGrid,
    kernel: &Kernel,
    psi1: &[Complex64],
    psi2: &[Complex64],
    interior: usize,
    spacing: f64,
) -> ChainResult {
    let m = psi1.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(chain as u64);
    let mut st = State::start(interior, m, grid);
    for t in 0..interior {
        st.refresh(t, grid, spacing);
    }
    let phase_of = |st: &State| {
        let mut chain: Vec<&[Complex64]> = Vec::with_capacity(interior + 2);
        chain.push(psi1);
        chain.extend(st.amps.iter().map(|v| v.as_slice()));
        chain.push(psi2);
        kernel.phase(&chain)
    };
    let mut s = phase_of(&st);
    let mut sum = ComplexSum::default();
    let (mut accepted, mut proposed) = (0u64, 0u64);
    let p = grid.phase_points;
    for step in 0..opts.burn_in + opts.steps {
        let t = rng.random_range(0..interior);
        let i = rng.random_range(0..m);
        let j = (i + rng.random_range(1..m)) % m;
        let di = rng.random_range(0..p);
        let dj = rng.random_range(0..p);
        let u: f64 = rng.random();
        let counted = step >= opts.burn_in;
        if counted {
            proposed += 1;
        }
        let (ni, nj) = (st.quanta[t][i], st.quanta[t][j]);
        if ni > 1 {
            // measure ratio prod (n/n')^2 for the two changed sites
            let log_ratio = 2.0 * ((ni as f64 / (ni - 1) as f64).ln() + (nj as f64 / (nj + 1) as f64).ln());
            if log_ratio >= 0.0 || u < log_ratio.exp() {
                st.quanta[t][i] = ni - 1;
                st.quanta[t][j] = nj + 1;
                st.phases[t][i] = (st.phases[t][i] + di) % p;
                st.phases[t][j] = (st.phases[t][j] + dj) % p;
                st.refresh(t, grid, spacing);
                s = phase_of(&st);
                if counted {
                    accepted += 1;
                }
            }
        }
        if counted {
            sum.add(Complex64::from_polar(1.0, s));
        }
    }
    ChainResult {
        mean: sum.value() / opts.steps as f64,
        accepted,
        proposed,
    }
}

/// Metropolis estimate of the grid correlator.
///
/// Configurations are drawn with probability proportional to their measure, so the
/// chain average of `exp(i S)` times the exact grid partition function `Z` estimates
/// the same sum as [`super::correlator_bruteforce`]. Each proposal moves one quantum
/// between two sites of one slice and shifts both phases, which keeps the slice on
/// the normalization sphere and is symmetric. Chain `c` draws from the ChaCha8
/// stream `c` of the run seed; results are identical for identical seeds.
pub fn correlator_metropolis(
    pair: &BoundaryPair,
    h: &HamiltonianSpec,
    lattice: &LatticeSpec,
    grid: &AmplitudeGrid,
    opts: &MetropolisOptions,
) -> Result<CorrelatorEstimate> {
    lattice.validate()?;
    let m = lattice.sites;
    grid.validate(m)?;
    if opts.chains < 2 || opts.steps == 0 {
        return Err(Error::Config("Metropolis needs at least two chains and one step".into()));
    }
    let kernel = Kernel::new(pair, h, lattice)?;
    let interior = pair.interior_slices();
    if interior == 0 {
        let v = single_link_value(pair, h, lattice)?;
        return Ok(CorrelatorEstimate {
            value: v,
            abs_error: 0.0,
            n_points: 0,
            sign_diagnostic: 1.0,
            reliable: true,
            method: Method::Metropolis,
            acceptance_rate: None,
            warnings: Vec::new(),
        }
        .finish());
    }
    let psi1 = pair.psi1.amplitudes();
    let psi2 = pair.psi2.amplitudes();
    let results: Vec<ChainResult> = (0..opts.chains)
        .into_par_iter()
        .map(|c| run_chain(c, opts, grid, &kernel, psi1, psi2, interior, lattice.spacing))
        .collect();

    let n = results.len() as f64;
    let mut acc = ComplexSum::default();
    for r in &results {
        acc.add(r.mean);
    }
    let mean = acc.value() / n;
    let var: f64 = results.iter().map(|r| (r.mean - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
    let log_z = interior as f64 * grid.log_partition_slice(m, lattice.spacing);
    let z = log_z.exp();
    let accepted: u64 = results.iter().map(|r| r.accepted).sum();
    let proposed: u64 = results.iter().map(|r| r.proposed).sum();
    let rate = accepted as f64 / proposed as f64;
    let mut warnings = Vec::new();
    if !(0.01..=0.99).contains(&rate) {
        warnings.push(format!("acceptance rate {rate:.4} suggests a non-ergodic chain"));
    }
    Ok(CorrelatorEstimate {
        value: mean * z,
        abs_error: z * (var / n).sqrt(),
        n_points: proposed,
        sign_diagnostic: mean.norm(),
        reliable: true,
        method: Method::Metropolis,
        acceptance_rate: Some(rate),
        warnings,
    }
    .finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlator::{correlator_bruteforce, DEFAULT_BUDGET};
    use crate::wavefunction::{make_homogeneous, DiscreteWaveFunction};

    fn instance() -> (BoundaryPair, HamiltonianSpec, LatticeSpec) {
        let l = LatticeSpec::new(3, 0.5, 0.1, 0.5, 8);
        let a = make_homogeneous(&l).unwrap();
        let b = DiscreteWaveFunction::from_probabilities(&[0.5, 0.3, 0.2], &[0.0, 0.7, -0.4], 0.5).unwrap();
        (BoundaryPair::new(a, b, 0, 2).unwrap(), HamiltonianSpec::pinning(1, 0.5), l)
    }

    #[test]
    fn same_seed_same_bits() {
        let (pair, h, l) = instance();
        let g = AmplitudeGrid::new(8, 4);
        let o = MetropolisOptions::new(4, 2000, 7);
        let x = correlator_metropolis(&pair, &h, &l, &g, &o).unwrap();
        let y = correlator_metropolis(&pair, &h, &l, &g, &o).unwrap();
        assert_eq!(x.value.re.to_bits(), y.value.re.to_bits());
        assert_eq!(x.value.im.to_bits(), y.value.im.to_bits());
        assert_eq!(x.abs_error.to_bits(), y.abs_error.to_bits());
        let z = correlator_metropolis(&pair, &h, &l, &g, &MetropolisOptions::new(4, 2000, 8)).unwrap();
        assert_ne!(x.value, z.value);
    }

    #[test]
    fn agrees_with_brute_force_on_three_sites() {
        let (pair, h, l) = instance();
        let g = AmplitudeGrid::new(8, 4);
        let bf = correlator_bruteforce(&pair, &h, &l, &g, DEFAULT_BUDGET).unwrap();
        let mc = correlator_metropolis(&pair, &h, &l, &g, &MetropolisOptions::new(16, 20_000, 11)).unwrap();
        assert!((mc.value - bf.value).norm() <= 3.0 * mc.abs_error, "{:?} vs {:?}", mc, bf);
    }

    #[test]
    fn rejects_single_chain() {
        let (pair, h, l) = instance();
        assert!(correlator_metropolis(&pair, &h, &l, &AmplitudeGrid::new(8, 4), &MetropolisOptions::new(1, 10, 0)).is_err());
    }
}
