use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluctuation::{expand, log_fluctuation, FluctuationOptions};
use crate::hamiltonian::{BoundaryPair, HamiltonianSpec};
use crate::history::WaveHistory;
use crate::lattice::LatticeSpec;
use crate::measure::{action_phase, measure_log_density};
use crate::oracle::{schrodinger_residual, Propagator, PropagatorSpec};
use crate::wavefunction::DiscreteWaveFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// Exact Schrödinger evolution of the initial state.
    Schrodinger,
    /// Schrödinger evolution, a jump to a target state across one link, then
    /// Schrödinger evolution of the target.
    Collapse,
    /// The initial state held fixed.
    Frozen,
}

/// Histories near a center history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryFamily {
    pub kind: FamilyKind,
    pub label: String,
    pub center: WaveHistory,
    /// Slice that first holds the target state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collapse_slice: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collapse_target: Option<DiscreteWaveFunction>,
}

impl HistoryFamily {
    pub fn schrodinger(
        psi1: &DiscreteWaveFunction,
        prop: &PropagatorSpec,
        lattice: &LatticeSpec,
        links: usize,
    ) -> Result<Self> {
        let center = Propagator::new(prop, lattice)?.run(psi1, links)?;
        Ok(Self {
            kind: FamilyKind::Schrodinger,
            label: "schrodinger".into(),
            center,
            collapse_slice: None,
            collapse_target: None,
        })
    }

    /// Evolves `psi1` up to slice `collapse_slice - 1`, then evolves `target`
    /// from slice `collapse_slice` to the end.
    pub fn collapse(
        psi1: &DiscreteWaveFunction,
        target: &DiscreteWaveFunction,
        collapse_slice: usize,
        prop: &PropagatorSpec,
        lattice: &LatticeSpec,
        links: usize,
    ) -> Result<Self> {
        if collapse_slice == 0 || collapse_slice > links {
            return Err(Error::InvalidHistory(format!(
                "collapse slice {collapse_slice} must lie in 1..={links}"
            )));
        }
        let p = Propagator::new(prop, lattice)?;
        let mut slices = Vec::with_capacity(links + 1);
        for (start, count) in [(psi1, collapse_slice), (target, links + 1 - collapse_slice)] {
            let mut psi = start.clone();
            for i in 0..count {
                if i > 0 {
                    psi = p.step(&psi);
                }
                slices.push(psi.clone());
            }
        }
        let mut l = lattice.clone();
        l.dt = prop.dt.abs();
        let center = WaveHistory::new(&l, slices)?.with_step(prop.dt);
        Ok(Self {
            kind: FamilyKind::Collapse,
            label: "collapse".into(),
            center,
            collapse_slice: Some(collapse_slice),
            collapse_target: Some(target.clone()),
        })
    }

    pub fn frozen(psi1: &DiscreteWaveFunction, prop: &PropagatorSpec, lattice: &LatticeSpec, links: usize) -> Result<Self> {
        let center = WaveHistory::new(lattice, vec![psi1.clone(); links + 1])?.with_step(prop.dt);
        Ok(Self {
            kind: FamilyKind::Frozen,
            label: "frozen".into(),
            center,
            collapse_slice: None,
            collapse_target: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Checks the residual shape expected for the family kind.
    pub fn check_center(&self, prop: &PropagatorSpec) -> Result<()> {
        let r = schrodinger_residual(&self.center, prop)?;
        match self.kind {
            FamilyKind::Schrodinger if r.total > 1e-10 => Err(Error::FamilyPrecondition(format!(
                "schrodinger center has residual {:e}",
                r.total
            ))),
            FamilyKind::Collapse => {
                let jump = self.collapse_slice.unwrap_or(0).saturating_sub(1);
                let stray = r
                    .per_link
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != jump)
                    .map(|(_, v)| *v)
                    .fold(0.0, f64::max);
                if stray > 1e-10 {
                    Err(Error::FamilyPrecondition(format!(
                        "collapse center has residual {stray:e} away from link {jump}"
                    )))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyContribution {
    pub label: String,
    pub kind: FamilyKind,
    /// `ln |fluctuation integral|`.
    pub log_fluctuation: f64,
    pub log_measure: f64,
    /// `ln |exp(i S)|`, identically zero for real `S`.
    pub log_weight: f64,
    pub action_phase: f64,
    pub log_contribution: f64,
    pub stationary_slices: usize,
    pub non_stationary_slices: usize,
    pub quadrature_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRanking {
    /// Contributions sorted from largest to smallest.
    pub ranked: Vec<FamilyContribution>,
    /// `log_ratios[i][j] = ln |C_i| - ln |C_j|` in ranked order.
    pub log_ratios: Vec<Vec<f64>>,
}

impl FamilyRanking {
    pub fn leader(&self) -> &FamilyContribution {
        &self.ranked[0]
    }

    /// Log gap between the first and second family.
    pub fn separation(&self) -> f64 {
        self.log_ratios.first().and_then(|r| r.get(1)).copied().unwrap_or(f64::INFINITY)
    }

    pub fn get(&self, label: &str) -> Option<&FamilyContribution> {
        self.ranked.iter().find(|c| c.label == label)
    }
}

/// Ranks families by `|fluctuation integral| * measure(center) * |weight(center)|`,
/// with the fluctuation integral in the quadratic (stationary slices) or linear
/// (non-stationary slices) approximation.
pub fn compare_history_families(
    families: &[HistoryFamily],
    pair: &BoundaryPair,
    h: &HamiltonianSpec,
    opts: &FluctuationOptions,
) -> Result<FamilyRanking> {
    if families.is_empty() {
        return Err(Error::Config("no families to compare".into()));
    }
    let mut out = Vec::with_capacity(families.len());
    for f in families {
        let c = &f.center;
        let start_gap = c
            .first()
            .amplitudes()
            .iter()
            .zip(pair.psi1.amplitudes())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        if start_gap > 1e-10 {
            return Err(Error::InconsistentBoundaries(format!(
                "family '{}' starts {start_gap:e} away from psi1",
                f.label
            )));
        }
        if c.len() != pair.links() + 1 || c.step.signum() != pair.direction() {
            return Err(Error::InconsistentBoundaries(format!(
                "family '{}' spans {} links, pair spans {}",
                f.label,
                c.len() - 1,
                pair.links()
            )));
        }
        let exp = expand(c, h, opts)?;
        let (lf, err) = log_fluctuation(&exp, c.lattice.alpha, c.lattice.hbar, opts)?;
        let lm = measure_log_density(c)?.value;
        let s = action_phase(c, h)?.value;
        out.push(FamilyContribution {
            label: f.label.clone(),
            kind: f.kind,
            log_fluctuation: lf,
            log_measure: lm,
            log_weight: 0.0,
            action_phase: s,
            log_contribution: lf + lm,
            stationary_slices: exp.solution_blocks.len(),
            non_stationary_slices: exp.non_solution_blocks.len(),
            quadrature_rel_error: err,
        });
    }
    out.sort_by(|a, b| b.log_contribution.total_cmp(&a.log_contribution));
    let log_ratios = out
        .iter()
        .map(|a| out.iter().map(|b| a.log_contribution - b.log_contribution).collect())
        .collect();
    Ok(FamilyRanking {
        ranked: out,
        log_ratios,
    })
}
