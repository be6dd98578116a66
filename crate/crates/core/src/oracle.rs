//! Crank–Nicolson reference dynamics, residuals of arbitrary histories and the
//! search for non-dispersing solutions.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{apply, HamiltonianSpec};
use crate::history::WaveHistory;
use crate::lattice::LatticeSpec;
use crate::wavefunction::{gaussian, lattice_norm_sq, DiscreteWaveFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    CrankNicolson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagatorSpec {
    pub hamiltonian: HamiltonianSpec,
    /// Signed time step; a negative value runs the dynamics backwards.
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
}

impl PropagatorSpec {
    pub fn new(hamiltonian: HamiltonianSpec, dt: f64) -> Self {
        Self {
            hamiltonian,
            dt,
            scheme: Scheme::CrankNicolson,
        }
    }

    pub fn reversed(&self) -> Self {
        Self {
            dt: -self.dt,
            ..self.clone()
        }
    }

    /// Largest `dt` with `dt ||H|| / hbar <= 0.1` on this lattice.
    pub fn default_dt(hamiltonian: &HamiltonianSpec, lattice: &LatticeSpec) -> Result<f64> {
        let h = hamiltonian.real_matrix(lattice)?;
        let norm = nalgebra::SymmetricEigen::new(h)
            .eigenvalues
            .iter()
            .fold(0.0f64, |m, e| m.max(e.abs()));
        Ok(if norm > 0.0 { 0.1 * lattice.hbar / norm } else { lattice.dt })
    }
}

/// The one-step map `U = (1 + i dt H / 2 hbar)^-1 (1 - i dt H / 2 hbar)` as a dense matrix.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub spec: PropagatorSpec,
    pub lattice: LatticeSpec,
    u: DMatrix<Complex64>,
}

impl Propagator {
    pub fn new(spec: &PropagatorSpec, lattice: &LatticeSpec) -> Result<Self> {
        if !(spec.dt.is_finite() && spec.dt != 0.0) {
            return Err(Error::InvalidLattice(format!("time step must be nonzero, got {}", spec.dt)));
        }
        let h = spec.hamiltonian.matrix(lattice)?;
        let m = lattice.sites;
        let c = Complex64::new(0.0, spec.dt / (2.0 * lattice.hbar));
        let id = DMatrix::<Complex64>::identity(m, m);
        let plus = &id + &h * c;
        let minus = &id - &h * c;
        let u = plus.lu().solve(&minus).ok_or_else(|| {
            Error::SingularOperator(format!(
                "1 + i dt H / 2hbar is singular for dt = {}",
                spec.dt
            ))
        })?;
        Ok(Self {
            spec: spec.clone(),
            lattice: lattice.clone(),
            u,
        })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.u
    }

    pub fn step_amplitudes(&self, v: &[Complex64]) -> Vec<Complex64> {
        apply(&self.u, v)
    }

    pub fn step(&self, psi: &DiscreteWaveFunction) -> DiscreteWaveFunction {
        DiscreteWaveFunction::from_raw(self.step_amplitudes(psi.amplitudes()), psi.spacing())
    }

    /// `steps + 1` slices starting at `psi0`, with `step = dt`.
    pub fn run(&self, psi0: &DiscreteWaveFunction, steps: usize) -> Result<WaveHistory> {
        if psi0.sites() != self.lattice.sites {
            return Err(Error::DimensionMismatch {
                expected: self.lattice.sites,
                found: psi0.sites(),
            });
        }
        let mut slices = Vec::with_capacity(steps + 1);
        slices.push(psi0.clone());
        for _ in 0..steps {
            let next = self.step(slices.last().unwrap());
            slices.push(next);
        }
        let mut lattice = self.lattice.clone();
        lattice.dt = self.spec.dt.abs();
        Ok(WaveHistory::new(&lattice, slices)?.with_step(self.spec.dt))
    }
}

/// Crank–Nicolson evolution of `psi0` for `steps` steps.
pub fn propagate(
    psi0: &DiscreteWaveFunction,
    prop: &PropagatorSpec,
    lattice: &LatticeSpec,
    steps: usize,
) -> Result<WaveHistory> {
    Propagator::new(prop, lattice)?.run(psi0, steps)
}

/// Per-link distance `||psi(t+1) - U psi(t)||` and its root-sum-square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryResidual {
    pub per_link: Vec<f64>,
    pub total: f64,
}

impl HistoryResidual {
    /// Index of the link with the largest residual.
    pub fn worst_link(&self) -> Option<usize> {
        (0..self.per_link.len()).max_by(|&i, &j| self.per_link[i].total_cmp(&self.per_link[j]))
    }
}

pub fn schrodinger_residual(
    history: &WaveHistory,
    prop: &PropagatorSpec,
) -> Result<HistoryResidual> {
    let p = Propagator::new(prop, &history.lattice)?;
    let a = history.lattice.spacing;
    let per_link: Vec<f64> = history
        .slices
        .windows(2)
        .map(|w| {
            let pred = p.step_amplitudes(w[0].amplitudes());
            let diff: Vec<Complex64> = w[1]
                .amplitudes()
                .iter()
                .zip(&pred)
                .map(|(x, y)| x - y)
                .collect();
            lattice_norm_sq(&diff, a).sqrt()
        })
        .collect();
    let total = per_link.iter().map(|r| r * r).sum::<f64>().sqrt();
    Ok(HistoryResidual { per_link, total })
}

/// Witness for [`admits_local_solutions`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalityEvidence {
    pub admits: bool,
    pub threshold: f64,
    pub horizon: usize,
    /// Description of the best candidate.
    pub witness: String,
    /// Locality score of the best candidate at every step.
    pub scores: Vec<f64>,
}

pub const DEFAULT_LOCALITY_THRESHOLD: f64 = 0.5;

/// Searches energy eigenstates and Gaussian packets for a state that stays local
/// (locality score at least `threshold`) for `horizon` steps.
pub fn admits_local_solutions(
    prop: &PropagatorSpec,
    lattice: &LatticeSpec,
    horizon: usize,
    threshold: f64,
) -> Result<LocalityEvidence> {
    let p = Propagator::new(prop, lattice)?;
    let mut candidates: Vec<(String, DiscreteWaveFunction)> = Vec::new();
    let (energies, states) = prop.hamiltonian.eigenstates(lattice)?;
    for (i, (e, s)) in energies.iter().zip(states).enumerate() {
        candidates.push((format!("eigenstate {i} (E = {e:.6})"), s));
    }
    let stride = (lattice.sites / 8).max(1);
    for n in (0..lattice.sites).step_by(stride) {
        for w in [0.5, 1.0, 2.0, 4.0] {
            let c = lattice.position(n);
            let width = w * lattice.spacing;
            candidates.push((
                format!("gaussian at x = {c:.4}, width {width:.4}"),
                gaussian(lattice, c, width, 0.0)?,
            ));
        }
    }
    let mut best: Option<(f64, String, Vec<f64>)> = None;
    for (name, psi) in candidates {
        if psi.locality_score() < threshold {
            continue;
        }
        let mut scores = Vec::with_capacity(horizon + 1);
        let mut cur = psi;
        scores.push(cur.locality_score());
        for _ in 0..horizon {
            cur = p.step(&cur);
            scores.push(cur.locality_score());
        }
        let worst = scores.iter().copied().fold(f64::INFINITY, f64::min);
        if best.as_ref().is_none_or(|b| worst > b.0) {
            best = Some((worst, name, scores));
        }
    }
    Ok(match best {
        Some((worst, witness, scores)) => LocalityEvidence {
            admits: worst >= threshold,
            threshold,
            horizon,
            witness,
            scores,
        },
        None => LocalityEvidence {
            admits: false,
            threshold,
            horizon,
            witness: "no candidate starts local".into(),
            scores: Vec::new(),
        },
    })
}
