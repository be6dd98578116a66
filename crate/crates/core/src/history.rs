//! Time-ordered sequences of wave functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::wavefunction::DiscreteWaveFunction;

/// Slices `psi(t_0), psi(t_0 + step), ...` on one lattice.
///
/// `step` carries a sign: a history read backwards in time has `step = -dt`.
/// Boundary slices flagged as fixed are not integrated over and carry no measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveHistory {
    pub lattice: LatticeSpec,
    pub slices: Vec<DiscreteWaveFunction>,
    pub step: f64,
    pub fixed_start: bool,
    pub fixed_end: bool,
}

impl WaveHistory {
    /// History with both ends fixed and `step = lattice.dt`; `lattice.time_slices`
    /// is reset to the number of slices.
    pub fn new(lattice: &LatticeSpec, slices: Vec<DiscreteWaveFunction>) -> Result<Self> {
        if slices.len() < 2 {
            return Err(Error::InvalidHistory(format!(
                "need at least two slices, got {}",
                slices.len()
            )));
        }
        for (t, s) in slices.iter().enumerate() {
            if s.sites() != lattice.sites {
                return Err(Error::DimensionMismatch {
                    expected: lattice.sites,
                    found: s.sites(),
                });
            }
            if (s.norm_sq() - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidHistory(format!(
                    "slice {t} has norm {} instead of 1",
                    s.norm_sq()
                )));
            }
        }
        let mut lattice = lattice.clone();
        lattice.time_slices = slices.len();
        Ok(Self {
            step: lattice.dt,
            lattice,
            slices,
            fixed_start: true,
            fixed_end: true,
        })
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    pub fn with_fixed(mut self, start: bool, end: bool) -> Self {
        self.fixed_start = start;
        self.fixed_end = end;
        self
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    /// Indices of slices that are integrated over.
    pub fn free_slices(&self) -> std::ops::Range<usize> {
        let lo = usize::from(self.fixed_start);
        let hi = self.slices.len() - usize::from(self.fixed_end);
        lo..hi.max(lo)
    }

    pub fn first(&self) -> &DiscreteWaveFunction {
        &self.slices[0]
    }

    pub fn last(&self) -> &DiscreteWaveFunction {
        &self.slices[self.slices.len() - 1]
    }

    /// Joins `self` and `other` where the last slice of `self` is followed by the first
    /// slice of `other` one link later.
    pub fn concat(&self, other: &WaveHistory) -> Result<WaveHistory> {
        let mut slices = self.slices.clone();
        slices.extend(other.slices.iter().cloned());
        Ok(WaveHistory::new(&self.lattice, slices)?.with_step(self.step))
    }
}
