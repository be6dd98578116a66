//! Particle plus pointer composite used for the branch-ratio experiment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{BoundaryPair, HamiltonianSpec};
use crate::lattice::LatticeSpec;
use crate::wavefunction::DiscreteWaveFunction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BornBranch {
    pub particle_site: usize,
    pub pointer_site: usize,
    /// Flattened composite index `particle_site * pointer_sites + pointer_site`.
    pub site: usize,
    /// Particle probability at `particle_site` in the initial state.
    pub probability: f64,
    pub final_state: DiscreteWaveFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BornSetup {
    pub lattice: LatticeSpec,
    pub hamiltonian: HamiltonianSpec,
    pub initial: DiscreteWaveFunction,
    pub branches: Vec<BornBranch>,
    pub pairs: Vec<BoundaryPair>,
    /// A single branch: there is no ratio to test.
    pub trivial: bool,
}

/// Initial product state `sqrt(p_r)` (particle) times a uniform pointer, and one
/// final state per particle site: the bound state of the coupled Hamiltonian
/// localized where the pointer records that site.
///
/// A single particle site is padded with an empty second site so the composite
/// lattice stays valid; that setup is flagged trivial.
pub fn born_rule_setup(
    particle_probs: &[f64],
    pointer_sites: usize,
    coupling: f64,
    lattice: &LatticeSpec,
    links: usize,
) -> Result<BornSetup> {
    let quantum = 1.0 / lattice.prob_quantum as f64;
    let total: f64 = particle_probs.iter().sum();
    if particle_probs.is_empty() || (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("particle probabilities sum to {total}, not 1")));
    }
    let trivial = particle_probs.len() == 1;
    if let Some(p) = particle_probs.iter().find(|&&p| p < quantum) {
        return Err(Error::Config(format!(
            "particle probability {p} is below the grid quantum 1/K = {quantum}"
        )));
    }
    let mut probs = particle_probs.to_vec();
    if trivial {
        probs.push(0.0);
    }
    let np = probs.len();
    let mut lattice = lattice.clone();
    lattice.sites = np * pointer_sites;
    lattice.validate()?;
    let hamiltonian = HamiltonianSpec::composite(pointer_sites, coupling);
    let joint: Vec<f64> = probs
        .iter()
        .flat_map(|&p| std::iter::repeat_n(p / pointer_sites as f64, pointer_sites))
        .collect();
    let initial = DiscreteWaveFunction::from_probabilities(&joint, &vec![0.0; joint.len()], lattice.spacing)?;
    let mut branches = Vec::new();
    let mut pairs = Vec::new();
    for (r, &p) in particle_probs.iter().enumerate() {
        let q = r % pointer_sites;
        let site = r * pointer_sites + q;
        // The branch sites are related by a lattice symmetry, so each bound eigenstate
        // is shared between them. The bound states sit about `coupling` below the band
        // and their splitting is small, so projecting the site onto that cluster gives
        // a branch-local state that is stationary over short horizons.
        let (_, state) = hamiltonian.localized_eigenstate(&lattice, site, 0.5 * coupling)?;
        pairs.push(BoundaryPair::new(initial.clone(), state.clone(), 0, links as i64)?);
        branches.push(BornBranch {
            particle_site: r,
            pointer_site: q,
            site,
            probability: p,
            final_state: state,
        });
    }
    Ok(BornSetup {
        lattice,
        hamiltonian,
        initial,
        branches,
        pairs,
        trivial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lat() -> LatticeSpec {
        LatticeSpec::new(4, 1.0, 0.1, 1e-3, 16).with_boundary(crate::lattice::Boundary::Dirichlet)
    }

    #[test]
    fn two_branches_on_the_diagonal() {
        let s = born_rule_setup(&[0.8, 0.2], 2, 4.0, &lat(), 2).unwrap();
        assert_eq!(s.branches.len(), 2);
        assert_eq!(s.branches[0].site, 0);
        assert_eq!(s.branches[1].site, 3);
        assert!(!s.trivial);
        let p = s.initial.probabilities();
        assert!((p[0] - 0.4).abs() < 1e-12 && (p[3] - 0.1).abs() < 1e-12);
        for b in &s.branches {
            assert!(b.final_state.probabilities()[b.site] > 0.9, "{:?}", b.final_state.probabilities());
        }
    }

    #[test]
    fn certainty_is_trivial_and_small_probabilities_are_refused() {
        let s = born_rule_setup(&[1.0], 2, 4.0, &lat(), 2).unwrap();
        assert!(s.trivial);
        assert_eq!(s.branches.len(), 1);
        assert!(born_rule_setup(&[0.97, 0.03], 2, 4.0, &lat(), 2).is_err());
        assert!(born_rule_setup(&[0.5, 0.4], 2, 4.0, &lat(), 2).is_err());
    }
}
