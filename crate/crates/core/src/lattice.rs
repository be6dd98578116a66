//! One-dimensional lattice geometry and run constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Treatment of the lattice edges when building kinetic operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Periodic,
    Dirichlet,
}

/// Discretization of space and time plus the constants that enter the weight.
///
/// `sites` points `x_n = a n`, `time_slices` slices of width `dt`; `alpha` scales
/// the action phase and `prob_quantum` is the number of probability quanta `K`
/// used both by the amplitude grid and by the measure floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub sites: usize,
    pub spacing: f64,
    #[serde(default = "default_slices")]
    pub time_slices: usize,
    pub dt: f64,
    #[serde(default = "default_hbar")]
    pub hbar: f64,
    pub alpha: f64,
    pub prob_quantum: u32,
    #[serde(default)]
    pub boundary: Boundary,
}

fn default_slices() -> usize {
    3
}

fn default_hbar() -> f64 {
    1.0
}

/// Non-fatal findings from [`LatticeSpec::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum LatticeWarning {
    /// `alpha >= 1/K^2`: solutions are not guaranteed to dominate every history family.
    AlphaAboveGlobalBound { alpha: f64, bound: f64 },
}

impl std::fmt::Display for LatticeWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LatticeWarning::AlphaAboveGlobalBound { alpha, bound } => write!(
                f,
                "alpha = {alpha:e} is not below the global dominance bound 1/K^2 = {bound:e}"
            ),
        }
    }
}

impl LatticeSpec {
    pub fn new(sites: usize, spacing: f64, dt: f64, alpha: f64, prob_quantum: u32) -> Self {
        Self {
            sites,
            spacing,
            time_slices: default_slices(),
            dt,
            hbar: 1.0,
            alpha,
            prob_quantum,
            boundary: Boundary::Periodic,
        }
    }

    pub fn with_time_slices(mut self, t: usize) -> Self {
        self.time_slices = t;
        self
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_hbar(mut self, hbar: f64) -> Self {
        self.hbar = hbar;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// Checks hard invariants; returns soft warnings.
    pub fn validate(&self) -> Result<Vec<LatticeWarning>> {
        let bad = |msg: String| Err(Error::InvalidLattice(msg));
        if self.sites < 2 {
            return bad(format!("need at least 2 sites, got {}", self.sites));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return bad(format!("spacing must be positive, got {}", self.spacing));
        }
        if self.time_slices < 2 {
            return bad(format!("need at least 2 time slices, got {}", self.time_slices));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.hbar.is_finite() && self.hbar > 0.0) {
            return bad(format!("hbar must be positive, got {}", self.hbar));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.prob_quantum < 2 {
            return bad(format!("K must be at least 2, got {}", self.prob_quantum));
        }
        let mut warnings = Vec::new();
        let bound = self.global_alpha_bound();
        if self.alpha >= bound {
            warnings.push(LatticeWarning::AlphaAboveGlobalBound {
                alpha: self.alpha,
                bound,
            });
        }
        Ok(warnings)
    }

    pub fn length(&self) -> f64 {
        self.spacing * self.sites as f64
    }

    /// `1/K^2`.
    pub fn global_alpha_bound(&self) -> f64 {
        let k = self.prob_quantum as f64;
        1.0 / (k * k)
    }

    /// Smallest admissible `|psi|^2` at a site: `1/(K a M)`.
    pub fn amplitude_floor(&self) -> f64 {
        1.0 / (self.prob_quantum as f64 * self.spacing * self.sites as f64)
    }

    pub fn position(&self, n: usize) -> f64 {
        self.spacing * n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_lattices() {
        assert!(LatticeSpec::new(1, 0.1, 0.01, 1e-3, 16).validate().is_err());
        assert!(LatticeSpec::new(4, 0.0, 0.01, 1e-3, 16).validate().is_err());
        assert!(LatticeSpec::new(4, 0.1, 0.01, 0.0, 16).validate().is_err());
        assert!(LatticeSpec::new(4, 0.1, 0.01, 1e-3, 1).validate().is_err());
        assert!(LatticeSpec::new(4, 0.1, 0.01, 1e-3, 16)
            .with_time_slices(1)
            .validate()
            .is_err());
    }

    #[test]
    fn warns_when_alpha_not_below_one_over_k_squared() {
        let w = LatticeSpec::new(4, 0.1, 0.01, 1e-2, 16).validate().unwrap();
        assert_eq!(w.len(), 1);
        let w = LatticeSpec::new(4, 0.1, 0.01, 1e-4, 64).validate().unwrap();
        assert!(w.is_empty());
    }
}
