//! Closed-form per-slice measure contributions of the homogeneous and the
//! single-peak states, their ratio in several algebraic forms, and the alpha
//! thresholds. Everything is computed in log space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::compensated_sum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioInputs {
    pub m: u64,
    pub a: f64,
    pub b2: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_k")]
    pub k: u64,
}

fn default_alpha() -> f64 {
    1e-3
}

fn default_k() -> u64 {
    16
}

impl RatioInputs {
    pub fn new(m: u64, a: f64, b2: f64) -> Self {
        Self {
            m,
            a,
            b2,
            alpha: default_alpha(),
            k: default_k(),
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_k(mut self, k: u64) -> Self {
        self.k = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::Config(format!("M must be at least 2, got {}", self.m)));
        }
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::Config(format!("spacing must be positive, got {}", self.a)));
        }
        let ab2 = self.a * self.b2;
        if !(ab2 > 0.0 && ab2 < 1.0) {
            return Err(Error::OutsideRatioWindow(ab2));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) || self.k < 2 {
            return Err(Error::Config("alpha must be positive and K at least 2".into()));
        }
        Ok(())
    }

    fn mf(&self) -> f64 {
        self.m as f64
    }

    fn ab2(&self) -> f64 {
        self.a * self.b2
    }

    /// `ln(1 - a B2)` without cancellation for small `a B2`.
    fn ln_rest(&self) -> f64 {
        (-self.ab2()).ln_1p()
    }
}

/// `2M ln(aM)`.
pub fn homogeneous_contribution(i: &RatioInputs) -> Result<f64> {
    i.validate()?;
    Ok(2.0 * i.mf() * (i.a * i.mf()).ln())
}

/// `-2 [ln B2 + (M-1) ln(1 - aB2) - (M-1) ln(a(M-1))]`.
pub fn inhomogeneous_contribution(i: &RatioInputs) -> Result<f64> {
    i.validate()?;
    let m1 = i.mf() - 1.0;
    Ok(-2.0 * compensated_sum([i.b2.ln(), m1 * i.ln_rest(), -m1 * (i.a * m1).ln()]))
}

/// `ln` of the exact homogeneous-to-inhomogeneous ratio
/// `[B2 (1-aB2)^(M-1) (aM)^M / (a(M-1))^(M-1)]^2`.
pub fn log_ratio_exact(i: &RatioInputs) -> Result<f64> {
    i.validate()?;
    let m = i.mf();
    let m1 = m - 1.0;
    // M ln(aM) - (M-1) ln(a(M-1)) regrouped so the two large terms never meet
    Ok(2.0 * compensated_sum([i.b2.ln(), m1 * i.ln_rest(), (i.a * m).ln(), m1 * (1.0 / m1).ln_1p()]))
}

pub fn contribution_ratio_exact(i: &RatioInputs) -> Result<f64> {
    Ok(log_ratio_exact(i)?.exp())
}

/// The same ratio rearranged as `[M aB2 (1-aB2)^(M-1) (M/(M-1))^(M-1)]^2`.
pub fn log_ratio_rearranged(i: &RatioInputs) -> Result<f64> {
    i.validate()?;
    let m = i.mf();
    let m1 = m - 1.0;
    Ok(2.0 * compensated_sum([m.ln(), i.ab2().ln(), m1 * i.ln_rest(), m1 * (1.0 / m1).ln_1p()]))
}

pub fn contribution_ratio_rearranged(i: &RatioInputs) -> Result<f64> {
    Ok(log_ratio_rearranged(i)?.exp())
}

/// Large-`M` form with `(M/(M-1))^(M-1)` replaced by `e`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRatio {
    /// `[M aB2 (1-aB2)^(M-1) e]^2`.
    pub value: f64,
    pub log_value: f64,
    /// `[M (1-aB2)^(M-1)]^2`.
    pub reduced: f64,
    pub log_reduced: f64,
}

pub fn contribution_ratio_asymptotic(i: &RatioInputs) -> Result<AsymptoticRatio> {
    i.validate()?;
    let m = i.mf();
    let m1 = m - 1.0;
    let log_value = 2.0 * compensated_sum([m.ln(), i.ab2().ln(), m1 * i.ln_rest(), 1.0]);
    let log_reduced = 2.0 * compensated_sum([m.ln(), m1 * i.ln_rest()]);
    Ok(AsymptoticRatio {
        value: log_value.exp(),
        log_value,
        reduced: log_reduced.exp(),
        log_reduced,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaThreshold {
    /// `(1 - aB2)^2`.
    pub threshold: f64,
    pub schrodinger_dominates: bool,
    /// `1/K^2`, the bound that holds for every admissible state.
    pub global_bound: f64,
    pub below_global_bound: bool,
}

pub fn alpha_threshold(i: &RatioInputs) -> Result<AlphaThreshold> {
    i.validate()?;
    let threshold = (1.0 - i.ab2()).powi(2);
    let k = i.k as f64;
    let global_bound = 1.0 / (k * k);
    Ok(AlphaThreshold {
        threshold,
        schrodinger_dominates: i.alpha < threshold,
        global_bound,
        below_global_bound: i.alpha < global_bound,
    })
}


/// Disagreement between the equivalent ratio forms at one input.
///
/// `forms` compares the exact and rearranged logs directly. `contributions`
/// compares the exact log with the difference of the two log contributions,
/// scaled by the magnitude of those contributions, since each of them carries
/// its own rounding at that scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityDeviation {
    pub forms: f64,
    pub contributions: f64,
    pub contributions_absolute: f64,
}

pub fn identity_deviation(i: &RatioInputs) -> Result<IdentityDeviation> {
    let ex = log_ratio_exact(i)?;
    let re = log_ratio_rearranged(i)?;
    let hom = homogeneous_contribution(i)?;
    let inh = inhomogeneous_contribution(i)?;
    let abs = (ex - (hom - inh)).abs();
    Ok(IdentityDeviation {
        forms: (ex - re).abs(),
        contributions: abs / hom.abs().max(inh.abs()).max(1.0),
        contributions_absolute: abs,
    })
}
