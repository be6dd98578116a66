use thiserror::Error;

/// Errors raised by the lattice, dynamics and correlator layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid wave function: {0}")]
    InvalidWaveFunction(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("inhomogeneous state outside the window 0 < a*B2 < 1 (a*B2 = {0})")]
    OutsideRatioWindow(f64),

    #[error("invalid hamiltonian: {0}")]
    InvalidHamiltonian(String),

    #[error("linear solve failed: {0}")]
    SingularOperator(String),

    #[error("amplitude floor violated at slice {slice}, site {site}: |psi|^2 = {value:e} < {floor:e}")]
    AmplitudeFloor {
        slice: usize,
        site: usize,
        value: f64,
        floor: f64,
    },

    #[error("invalid history: {0}")]
    InvalidHistory(String),

    #[error("family precondition failed: {0}")]
    FamilyPrecondition(String),

    #[error("quadrature did not converge: estimated error {estimate:e} exceeds {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("grid budget exceeded: {required} points required, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("inconsistent boundaries: {0}")]
    InconsistentBoundaries(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
