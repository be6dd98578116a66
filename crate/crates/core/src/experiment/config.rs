//! Declarative experiment descriptions.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::correlator::{AmplitudeGrid, MetropolisOptions, DEFAULT_BUDGET};
use crate::error::{Error, Result};
use crate::fluctuation::{Chart, FluctuationOptions};
use crate::hamiltonian::HamiltonianSpec;
use crate::lattice::{LatticeSpec, LatticeWarning};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    MeasureDominance,
    AlphaScaling,
    CollapseTiming,
    TimeSymmetry,
    Nonlinearity,
    BornRule,
    RatiosSweep,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::MeasureDominance,
        ExperimentKind::AlphaScaling,
        ExperimentKind::CollapseTiming,
        ExperimentKind::TimeSymmetry,
        ExperimentKind::Nonlinearity,
        ExperimentKind::BornRule,
        ExperimentKind::RatiosSweep,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::MeasureDominance => "measure_dominance",
            ExperimentKind::AlphaScaling => "alpha_scaling",
            ExperimentKind::CollapseTiming => "collapse_timing",
            ExperimentKind::TimeSymmetry => "time_symmetry",
            ExperimentKind::Nonlinearity => "nonlinearity",
            ExperimentKind::BornRule => "born_rule",
            ExperimentKind::RatiosSweep => "ratios_sweep",
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment kind '{s}'")))
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Correlator engine knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    /// Probability quanta of the brute-force grid; defaults to the lattice `K`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_k: Option<u32>,
    #[serde(default = "default_phase_points")]
    pub phase_points: u32,
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_budget")]
    pub budget: u64,
}

fn default_phase_points() -> u32 {
    8
}
fn default_chains() -> usize {
    16
}
fn default_steps() -> usize {
    20_000
}
fn default_budget() -> u64 {
    DEFAULT_BUDGET as u64
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            grid_k: None,
            phase_points: default_phase_points(),
            chains: default_chains(),
            steps: default_steps(),
            seed: 0,
            budget: default_budget(),
        }
    }
}

impl EngineConfig {
    pub fn grid(&self, lattice: &LatticeSpec) -> AmplitudeGrid {
        AmplitudeGrid::new(self.grid_k.unwrap_or(lattice.prob_quantum), self.phase_points)
    }

    pub fn metropolis(&self) -> MetropolisOptions {
        MetropolisOptions::new(self.chains, self.steps, self.seed)
    }
}

fn default_window() -> f64 {
    0.25
}

fn default_factor() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureDominanceParams {
    pub b2_values: Vec<f64>,
    #[serde(default)]
    pub peak_site: usize,
    /// Largest `M` of the reduced-ratio scan.
    #[serde(default = "default_scan_max")]
    pub scan_max_sites: u64,
    /// Peak density used by the reduced-ratio scan.
    #[serde(default = "default_scan_b2")]
    pub scan_b2: f64,
}

fn default_scan_b2() -> f64 {
    2.0
}

fn default_scan_max() -> u64 {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaScalingParams {
    pub alphas: Vec<f64>,
    #[serde(default = "default_window")]
    pub window: f64,
    /// Peak density of the single-peak state placed in the interior of the
    /// non-stationary center.
    pub b2: f64,
    #[serde(default)]
    pub peak_site: usize,
    #[serde(default)]
    pub chart: Chart,
    /// Relative tolerance on both slopes.
    #[serde(default = "default_slope_tol")]
    pub slope_tolerance: f64,
}

fn default_slope_tol() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollapseTimingParams {
    pub short_links: usize,
    pub long_links: usize,
    #[serde(default = "default_window")]
    pub window: f64,
    /// Site whose localized eigenstate is the collapse target.
    pub target_site: usize,
    /// Required ratio between the leading and the second family.
    #[serde(default = "default_factor")]
    pub separation_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSymmetryParams {
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_sym_links")]
    pub links: usize,
    #[serde(default = "default_sym_tol")]
    pub tolerance: f64,
}

fn default_pairs() -> usize {
    10
}
fn default_sym_links() -> usize {
    2
}
fn default_sym_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityParams {
    pub links: usize,
    #[serde(default = "default_window")]
    pub window: f64,
    pub site_a: usize,
    pub site_b: usize,
    /// `|C(psi1, cat)|` must not exceed this fraction of the smaller branch.
    #[serde(default = "default_nl_fraction")]
    pub max_fraction: f64,
}

fn default_nl_fraction() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BornRuleParams {
    pub particle_probs: Vec<f64>,
    #[serde(default = "default_sym_links")]
    pub links: usize,
    #[serde(default = "default_born_tol")]
    pub tolerance: f64,
}

fn default_born_tol() -> f64 {
    0.15
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatiosSweepParams {
    pub sites: Vec<u64>,
    pub b2_values: Vec<f64>,
    #[serde(default = "default_identity_tol")]
    pub identity_tolerance: f64,
}

fn default_identity_tol() -> f64 {
    1e-12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ExperimentParams {
    MeasureDominance(MeasureDominanceParams),
    AlphaScaling(AlphaScalingParams),
    CollapseTiming(CollapseTimingParams),
    TimeSymmetry(TimeSymmetryParams),
    Nonlinearity(NonlinearityParams),
    BornRule(BornRuleParams),
    RatiosSweep(RatiosSweepParams),
}

impl ExperimentParams {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            ExperimentParams::MeasureDominance(_) => ExperimentKind::MeasureDominance,
            ExperimentParams::AlphaScaling(_) => ExperimentKind::AlphaScaling,
            ExperimentParams::CollapseTiming(_) => ExperimentKind::CollapseTiming,
            ExperimentParams::TimeSymmetry(_) => ExperimentKind::TimeSymmetry,
            ExperimentParams::Nonlinearity(_) => ExperimentKind::Nonlinearity,
            ExperimentParams::BornRule(_) => ExperimentKind::BornRule,
            ExperimentParams::RatiosSweep(_) => ExperimentKind::RatiosSweep,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub params: ExperimentParams,
    pub lattice: LatticeSpec,
    pub hamiltonian: HamiltonianSpec,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn kind(&self) -> ExperimentKind {
        self.params.kind()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Schema checks that do not need any computation.
    pub fn validate(&self) -> Result<Vec<LatticeWarning>> {
        let warnings = self.lattice.validate()?;
        self.hamiltonian.real_matrix(&self.lattice)?;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        match &self.params {
            ExperimentParams::MeasureDominance(p) => {
                if p.b2_values.is_empty() || p.peak_site >= self.lattice.sites {
                    return bad("measure_dominance needs b2 values and a peak site on the lattice");
                }
            }
            ExperimentParams::AlphaScaling(p) => {
                if p.alphas.len() < 2 || p.window <= 0.0 {
                    return bad("alpha_scaling needs two alphas and a positive window");
                }
            }
            ExperimentParams::CollapseTiming(p) => {
                if p.short_links < 2 || p.long_links <= p.short_links || p.target_site >= self.lattice.sites {
                    return bad("collapse_timing needs 2 <= short_links < long_links and a target on the lattice");
                }
            }
            ExperimentParams::TimeSymmetry(p) => {
                if p.pairs == 0 || p.links == 0 {
                    return bad("time_symmetry needs at least one pair and one link");
                }
            }
            ExperimentParams::Nonlinearity(p) => {
                if p.links < 2 || p.site_a == p.site_b || p.site_a.max(p.site_b) >= self.lattice.sites {
                    return bad("nonlinearity needs two distinct lattice sites and at least two links");
                }
            }
            ExperimentParams::BornRule(p) => {
                let s: f64 = p.particle_probs.iter().sum();
                if p.particle_probs.is_empty() || (s - 1.0).abs() > 1e-9 {
                    return bad("born_rule particle probabilities must sum to 1");
                }
            }
            ExperimentParams::RatiosSweep(p) => {
                if p.sites.is_empty() || p.b2_values.is_empty() {
                    return bad("ratios_sweep needs sites and b2 values");
                }
            }
        }
        Ok(warnings)
    }

    pub fn fluctuation_options(&self, window: f64, chart: Chart) -> FluctuationOptions {
        FluctuationOptions {
            window,
            chart,
            ..FluctuationOptions::default()
        }
    }
}
