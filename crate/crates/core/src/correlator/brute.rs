use num_complex::Complex64;
use rayon::prelude::*;

use super::{AmplitudeGrid, CorrelatorEstimate, Method};
use crate::error::{Error, Result};
use crate::hamiltonian::{BoundaryPair, HamiltonianSpec};
use crate::lattice::LatticeSpec;
use crate::numerics::{CompensatedSum, ComplexSum};

pub const DEFAULT_BUDGET: u128 = 100_000_000;

const CHUNK: u128 = 1 << 12;

/// Link action on raw slices with the Hamiltonian held as a dense row-major table.
pub(crate) struct Kernel {
    m: usize,
    h: Vec<Complex64>,
    spacing: f64,
    step: f64,
    hbar: f64,
    inv_alpha_hbar: f64,
}

impl Kernel {
    pub(crate) fn new(pair: &BoundaryPair, h: &HamiltonianSpec, lattice: &LatticeSpec) -> Result<Self> {
        let m = lattice.sites;
        if pair.psi1.sites() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: pair.psi1.sites(),
            });
        }
        let hm = h.matrix(lattice)?;
        let mut table = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                table.push(hm[(i, j)]);
            }
        }
        Ok(Self {
            m,
            h: table,
            spacing: lattice.spacing,
            step: lattice.dt * pair.direction(),
            hbar: lattice.hbar,
            inv_alpha_hbar: 1.0 / (lattice.alpha * lattice.hbar),
        })
    }

    /// `-hbar Im<u|v> - step Re<m|H|m>`.
    pub(crate) fn link(&self, u: &[Complex64], v: &[Complex64]) -> f64 {
        let mut ov = 0.0;
        let mut e = 0.0;
        for i in 0..self.m {
            ov += (u[i].conj() * v[i]).im;
            let mi = (u[i] + v[i]) * 0.5;
            let row = &self.h[i * self.m..(i + 1) * self.m];
            let mut hm = Complex64::new(0.0, 0.0);
            for j in 0..self.m {
                hm += row[j] * (u[j] + v[j]) * 0.5;
            }
            e += (mi.conj() * hm).re;
        }
        (-self.hbar * ov - self.step * e) * self.spacing
    }

    /// Phase `S` of a full chain of slices.
    pub(crate) fn phase(&self, slices: &[&[Complex64]]) -> f64 {
        let r: f64 = slices.windows(2).map(|w| self.link(w[0], w[1])).sum();
        r * self.inv_alpha_hbar
    }
}

/// Weight `exp(i S)` of the single link joining the two boundaries.
pub fn single_link_value(pair: &BoundaryPair, h: &HamiltonianSpec, lattice: &LatticeSpec) -> Result<Complex64> {
    let k = Kernel::new(pair, h, lattice)?;
    let s = k.phase(&[pair.psi1.amplitudes(), pair.psi2.amplitudes()]);
    Ok(Complex64::from_polar(1.0, s))
}

/// Slice tables shared by the grid enumerators.
pub(crate) struct SliceTable {
    pub moduli: Vec<Vec<f64>>,
    pub log_measure: Vec<f64>,
    pub phases: Vec<Complex64>,
    pub phase_count: usize,
    pub sites: usize,
    pub p: usize,
}

impl SliceTable {
    pub(crate) fn new(grid: &AmplitudeGrid, sites: usize, spacing: f64) -> Self {
        let comps = grid.compositions(sites);
        let moduli = comps
            .iter()
            .map(|c| c.iter().map(|&n| grid.ln_modulus(n, spacing).exp()).collect())
            .collect();
        let log_measure = comps.iter().map(|c| grid.slice_log_measure(c, spacing)).collect();
        let p = grid.phase_points as usize;
        let phases = (0..p)
            .map(|j| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / p as f64))
            .collect();
        Self {
            moduli,
            log_measure,
            phases,
            phase_count: p.pow(sites as u32),
            sites,
            p,
        }
    }

    /// Writes slice configuration `s` into `out`, returning its log measure.
    pub(crate) fn fill(&self, s: usize, out: &mut [Complex64]) -> f64 {
        let comp = s / self.phase_count;
        let mut ph = s % self.phase_count;
        let md = &self.moduli[comp];
        for j in 0..self.sites {
            out[j] = self.phases[ph % self.p] * md[j];
            ph /= self.p;
        }
        self.log_measure[comp]
    }

    pub(crate) fn len(&self) -> usize {
        self.moduli.len() * self.phase_count
    }
}

/// Exact sum of `measure * exp(i S)` over every interior configuration of the grid.
///
/// The work is split into fixed chunks evaluated in parallel and merged in chunk
/// order, so the result does not depend on the thread count.
pub fn correlator_bruteforce(
    pair: &BoundaryPair,
    h: &HamiltonianSpec,
    lattice: &LatticeSpec,
    grid: &AmplitudeGrid,
    budget: u128,
) -> Result<CorrelatorEstimate> {
    lattice.validate()?;
    let m = lattice.sites;
    let kernel = Kernel::new(pair, h, lattice)?;
    let interior = pair.interior_slices();
    if interior == 0 {
        let v = single_link_value(pair, h, lattice)?;
        return Ok(CorrelatorEstimate {
            value: v,
            abs_error: 0.0,
            n_points: 1,
            sign_diagnostic: 1.0,
            reliable: true,
            method: Method::BruteForce,
            acceptance_rate: None,
            warnings: Vec::new(),
        }
        .finish());
    }
    grid.validate(m)?;
    let total = grid.total(m, interior);
    if total > budget {
        return Err(Error::BudgetExceeded {
            required: total,
            budget,
        });
    }
    let table = SliceTable::new(grid, m, lattice.spacing);
    let per = table.len() as u128;
    let n_chunks = total.div_ceil(CHUNK) as usize;
    let psi1 = pair.psi1.amplitudes();
    let psi2 = pair.psi2.amplitudes();

    let partial: Vec<(ComplexSum, CompensatedSum)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c as u128 * CHUNK;
            let hi = (lo + CHUNK).min(total);
            let mut buf = vec![vec![Complex64::new(0.0, 0.0); m]; interior];
            let mut sum = ComplexSum::default();
            let mut abs = CompensatedSum::new();
            for idx in lo..hi {
                let mut rest = idx;
                let mut lm = 0.0;
                for slot in buf.iter_mut() {
                    lm += table.fill((rest % per) as usize, slot);
                    rest /= per;
                }
                let mut chain: Vec<&[Complex64]> = Vec::with_capacity(interior + 2);
                chain.push(psi1);
                chain.extend(buf.iter().map(|v| v.as_slice()));
                chain.push(psi2);
                let s = kernel.phase(&chain);
                let mag = lm.exp();
                sum.add(Complex64::from_polar(mag, s));
                abs.add(mag);
            }
            (sum, abs)
        })
        .collect();

    let mut sum = ComplexSum::default();
    let mut abs = CompensatedSum::new();
    for (s, a) in &partial {
        sum.merge(s);
        abs.add(a.value());
    }
    let value = sum.value();
    Ok(CorrelatorEstimate {
        value,
        abs_error: 0.0,
        n_points: total as u64,
        sign_diagnostic: value.norm() / abs.value(),
        reliable: true,
        method: Method::BruteForce,
        acceptance_rate: None,
        warnings: Vec::new(),
    }
    .finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::WaveHistory;
    use crate::measure::action_phase;
    use crate::wavefunction::{gaussian, make_homogeneous, DiscreteWaveFunction};

    fn lat() -> LatticeSpec {
        LatticeSpec::new(2, 0.5, 0.1, 0.3, 8)
    }

    #[test]
    fn kernel_matches_history_action() {
        let l = LatticeSpec::new(4, 0.5, 0.1, 0.02, 16);
        let h = HamiltonianSpec::harmonic(1.0, 1.0);
        let a = gaussian(&l, 0.5, 0.4, 1.0).unwrap();
        let b = gaussian(&l, 1.5, 0.6, -1.0).unwrap();
        let c = gaussian(&l, 1.0, 0.3, 0.5).unwrap();
        let pair = BoundaryPair::new(a.clone(), c.clone(), 0, 2).unwrap();
        let k = Kernel::new(&pair, &h, &l).unwrap();
        let s = k.phase(&[a.amplitudes(), b.amplitudes(), c.amplitudes()]);
        let hist = WaveHistory::new(&l, vec![a, b, c]).unwrap();
        let oracle = action_phase(&hist, &h).unwrap().value;
        assert!((s - oracle).abs() < 1e-9 * oracle.abs().max(1.0));
    }

    #[test]
    fn zero_interior_slices_is_the_single_link_weight() {
        let l = lat();
        let h = HamiltonianSpec::free();
        let a = make_homogeneous(&l).unwrap();
        let b = DiscreteWaveFunction::from_probabilities(&[0.3, 0.7], &[0.0, 1.0], 0.5).unwrap();
        let pair = BoundaryPair::new(a.clone(), b.clone(), 3, 4).unwrap();
        let est = correlator_bruteforce(&pair, &h, &l, &AmplitudeGrid::new(8, 8), DEFAULT_BUDGET).unwrap();
        let hist = WaveHistory::new(&l, vec![a, b]).unwrap();
        let s = action_phase(&hist, &h).unwrap().value;
        assert!((est.value - Complex64::from_polar(1.0, s)).norm() < 1e-12);
        assert_eq!(est.n_points, 1);
    }

    #[test]
    fn budget_refusal_reports_required_points() {
        let l = LatticeSpec::new(3, 0.5, 0.1, 0.3, 16);
        let a = make_homogeneous(&l).unwrap();
        let pair = BoundaryPair::new(a.clone(), a, 0, 4).unwrap();
        let grid = AmplitudeGrid::new(16, 8);
        match correlator_bruteforce(&pair, &HamiltonianSpec::free(), &l, &grid, 1000) {
            Err(Error::BudgetExceeded { required, budget }) => {
                assert_eq!(required, (105u128 * 512).pow(3));
                assert_eq!(budget, 1000);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn large_alpha_gives_constant_phase() {
        let l = lat().with_alpha(1e3);
        let a = make_homogeneous(&l).unwrap();
        let b = DiscreteWaveFunction::from_probabilities(&[0.3, 0.7], &[0.0, 0.4], 0.5).unwrap();
        let pair = BoundaryPair::new(a, b, 0, 2).unwrap();
        let est = correlator_bruteforce(&pair, &HamiltonianSpec::free(), &l, &AmplitudeGrid::new(8, 8), DEFAULT_BUDGET).unwrap();
        assert!(est.sign_diagnostic > 0.99, "{}", est.sign_diagnostic);
    }

    #[test]
    fn grid_size_for_two_sites_one_slice() {
        let l = lat();
        let a = make_homogeneous(&l).unwrap();
        let pair = BoundaryPair::new(a.clone(), a, 0, 2).unwrap();
        let est = correlator_bruteforce(&pair, &HamiltonianSpec::free(), &l, &AmplitudeGrid::new(8, 8), DEFAULT_BUDGET).unwrap();
        assert_eq!(est.n_points, 7 * 64);
    }
}
