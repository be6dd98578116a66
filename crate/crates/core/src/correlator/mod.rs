//! Correlator estimators: exhaustive summation on the amplitude grid, Metropolis
//! sampling with phase reweighting, and dominance ranking of history families.

mod brute;
mod families;
mod grid;
mod metropolis;

pub use brute::{correlator_bruteforce, single_link_value, DEFAULT_BUDGET};
pub use families::{
    compare_history_families, FamilyContribution, FamilyKind, FamilyRanking, HistoryFamily,
};
pub use grid::AmplitudeGrid;
pub use metropolis::{correlator_metropolis, MetropolisOptions};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Below this sign diagnostic an estimate is flagged unreliable.
pub const SIGN_DIAGNOSTIC_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BruteForce,
    Metropolis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorEstimate {
    #[serde(with = "complex_pair")]
    pub value: Complex64,
    pub abs_error: f64,
    /// Grid points summed, or Monte Carlo samples kept.
    pub n_points: u64,
    /// `|sum w| / sum |w|`.
    pub sign_diagnostic: f64,
    pub reliable: bool,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acceptance_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl CorrelatorEstimate {
    pub(crate) fn finish(mut self) -> Self {
        self.reliable = self.sign_diagnostic >= SIGN_DIAGNOSTIC_FLOOR;
        if !self.reliable {
            self.warnings.push(format!(
                "sign diagnostic {:.3e} below {SIGN_DIAGNOSTIC_FLOOR}: estimate is unreliable",
                self.sign_diagnostic
            ));
        }
        self
    }
}

pub(crate) mod complex_pair {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}
