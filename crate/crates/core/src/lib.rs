//! Lattice laboratory for correlators defined as path integrals over normalized
//! wave-function histories.
//!
//! The crate covers the lattice and its states ([`lattice`], [`wavefunction`],
//! [`hamiltonian`]), reference Crank–Nicolson dynamics ([`oracle`]), the measure and
//! action of a history ([`measure`], [`fluctuation`]), closed-form contribution
//! ratios ([`ratios`]), correlator estimators ([`correlator`]) and the experiment
//! harness ([`experiment`]).

pub mod correlator;
pub mod error;
pub mod experiment;
pub mod fluctuation;
pub mod hamiltonian;
pub mod history;
pub mod lattice;
pub mod measure;
pub mod numerics;
pub mod oracle;
pub mod quadrature;
pub mod ratios;
pub mod wavefunction;

pub use correlator::{
    compare_history_families, correlator_bruteforce, correlator_metropolis, AmplitudeGrid,
    CorrelatorEstimate, FamilyKind, HistoryFamily,
};
pub use error::{Error, Result};
pub use fluctuation::{fluctuation_scaling, Chart, Family, FluctuationOptions, FluctuationScaling};
pub use hamiltonian::{
    expectations, validate_boundary_pair, BoundaryCheck, BoundaryPair, HamiltonianKind,
    HamiltonianSpec,
};
pub use history::WaveHistory;
pub use lattice::{Boundary, LatticeSpec, LatticeWarning};
pub use measure::{action_phase, measure_log_density, ActionPhase, LogMeasure};
pub use oracle::{admits_local_solutions, propagate, schrodinger_residual, HistoryResidual, PropagatorSpec};
pub use ratios::RatioInputs;
pub use wavefunction::{make_homogeneous, make_inhomogeneous, DiscreteWaveFunction};
