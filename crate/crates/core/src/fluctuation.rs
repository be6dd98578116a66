//! Windowed fluctuation integrals around a center history and their scaling with alpha.
//!
//! Perturbations `y` of the free slices enter the weight through the expansion
//! `R(c + y) = R(c) + g.y + y.H.y / 2` of the raw action. Around a stationary center
//! (`g = 0`) each normal mode `h_j` of the Hessian contributes
//! `int exp(i h_j y^2 / (2 alpha hbar) - |y|/r) dy`, which scales as `sqrt(alpha)`.
//! Around a non-stationary center the linear term dominates: the direction of `g`
//! contributes `int exp(i |g| y / (alpha hbar) - |y|/r) dy ~ alpha^2`, and the remaining
//! directions only see the window.
//!
//! The window `exp(-|y|/r)` keeps the perturbation local and makes every
//! one-dimensional integral absolutely convergent. The oscillatory integrals are
//! evaluated on rotated contours where the integrand decays monotonically.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianSpec;
use crate::history::WaveHistory;
use crate::measure::{action_gradient, action_hessian, block_len};
use crate::numerics::linear_fit;
use crate::quadrature::CompositeRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Solution,
    NonSolution,
}

/// Coordinates used for the perturbations of each slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    /// All `2M` real directions.
    #[default]
    Ambient,
    /// The `2M - 1` directions orthogonal to the slice itself (first-order
    /// norm-preserving perturbations).
    Tangent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationOptions {
    /// Width `r` of the window `exp(-|y|/r)`.
    pub window: f64,
    #[serde(default)]
    pub chart: Chart,
    /// Relative accuracy requested from each one-dimensional quadrature.
    #[serde(default = "default_quad_tol")]
    pub quad_tol: f64,
    /// Gradient blocks below this norm count as stationary.
    #[serde(default = "default_stationary_tol")]
    pub stationary_tol: f64,
}

fn default_quad_tol() -> f64 {
    1e-10
}

fn default_stationary_tol() -> f64 {
    1e-9
}

impl Default for FluctuationOptions {
    fn default() -> Self {
        Self {
            window: 0.25,
            chart: Chart::Ambient,
            quad_tol: default_quad_tol(),
            stationary_tol: default_stationary_tol(),
        }
    }
}

/// Largest number of complex free coordinates accepted by [`fluctuation_scaling`].
pub const MAX_COMPLEX_DIMS: usize = 12;

/// `int exp(i beta y^2 / 2 - |y|/r) dy` over the real line.
///
/// With `sigma = sign(beta)` the substitution `y = exp(i sigma pi/4) s` turns each half
/// line into `int_0^inf exp(-|beta| s^2/2 - exp(i sigma pi/4) s / r) ds`.
pub fn quadratic_mode_integral(beta: f64, r: f64, rule: &CompositeRule, tol: f64) -> Result<(Complex64, f64)> {
    if beta == 0.0 {
        return Ok((Complex64::new(2.0 * r, 0.0), 0.0));
    }
    let sigma = beta.signum();
    let rot = Complex64::from_polar(1.0, sigma * std::f64::consts::FRAC_PI_4);
    let b = beta.abs();
    let decay = rot.re / r;
    let hi = (80.0 / b).sqrt().min(40.0 / decay);
    let f = |s: f64| (-(0.5 * b * s * s) - rot * s / r).exp();
    let (v, err) = rule.adaptive(&f, 0.0, hi, tol)?;
    Ok((v * rot * 2.0, 2.0 * err))
}

/// `int exp(i k y - |y|/r) dy = 2 Re int_0^inf exp(i k y - y/r) dy`.
///
/// For `|k| r > 1` the half-line integral is taken along `y = i sign(k) s`, where the
/// integrand decays like `exp(-|k| s)`.
pub fn linear_mode_integral(k: f64, r: f64, rule: &CompositeRule, tol: f64) -> Result<(f64, f64)> {
    if k * r == 0.0 {
        return Ok((2.0 * r, 0.0));
    }
    let (v, err) = if (k * r).abs() <= 1.0 {
        let f = |y: f64| Complex64::new(-y / r, k * y).exp();
        rule.adaptive(&f, 0.0, 40.0 * r, tol)?
    } else {
        let sigma = k.signum();
        let kk = k.abs();
        let f = |s: f64| Complex64::new(-kk * s, -sigma * s / r).exp() * Complex64::new(0.0, sigma);
        rule.adaptive(&f, 0.0, 40.0 / kk, tol)?
    };
    Ok((2.0 * v.re, 2.0 * err))
}

/// Orthonormal basis of the directions kept by `chart` inside one slice block.
fn chart_basis(center: &[Complex64], chart: Chart) -> DMatrix<f64> {
    let m = center.len();
    let n = 2 * m;
    match chart {
        Chart::Ambient => DMatrix::identity(n, n),
        Chart::Tangent => {
            let mut radial = DVector::<f64>::zeros(n);
            for (i, z) in center.iter().enumerate() {
                radial[i] = z.re;
                radial[m + i] = z.im;
            }
            radial /= radial.norm();
            // projector onto the orthogonal complement, then its range
            let proj = DMatrix::<f64>::identity(n, n) - &radial * radial.transpose();
            let eig = SymmetricEigen::new(proj);
            let cols: Vec<DVector<f64>> = (0..n)
                .filter(|&i| eig.eigenvalues[i] > 0.5)
                .map(|i| eig.eigenvectors.column(i).into_owned())
                .collect();
            DMatrix::from_columns(&cols)
        }
    }
}

/// Per-slice split of a center history into stationary and non-stationary blocks.
#[derive(Debug, Clone)]
pub struct Expansion {
    /// Indices (within the free slices) of stationary blocks.
    pub solution_blocks: Vec<usize>,
    /// Non-stationary blocks with the norm of their projected gradient.
    pub non_solution_blocks: Vec<(usize, f64)>,
    /// Eigenvalues of the Hessian restricted to the stationary blocks.
    pub modes: Vec<f64>,
    /// Number of window-only directions in the non-stationary blocks.
    pub flat_directions: usize,
}

pub fn expand(center: &WaveHistory, h: &HamiltonianSpec, opts: &FluctuationOptions) -> Result<Expansion> {
    let hm = h.matrix(&center.lattice)?;
    let m = center.lattice.sites;
    let bl = block_len(m);
    let g = action_gradient(center, &hm);
    let free: Vec<usize> = center.free_slices().collect();
    let bases: Vec<DMatrix<f64>> = free
        .iter()
        .map(|&t| chart_basis(center.slices[t].amplitudes(), opts.chart))
        .collect();
    let mut solution_blocks = Vec::new();
    let mut non_solution_blocks = Vec::new();
    let mut flat_directions = 0;
    for (b, basis) in bases.iter().enumerate() {
        let gb = basis.transpose() * g.rows(b * bl, bl);
        let norm = gb.norm();
        if norm <= opts.stationary_tol {
            solution_blocks.push(b);
        } else {
            non_solution_blocks.push((b, norm));
            flat_directions += basis.ncols() - 1;
        }
    }
    let mut modes = Vec::new();
    if !solution_blocks.is_empty() {
        let hess = action_hessian(center, &hm);
        let dims: Vec<usize> = solution_blocks.iter().map(|&b| bases[b].ncols()).collect();
        let total: usize = dims.iter().sum();
        // restricted Hessian B^T H B over the stationary blocks
        let mut embed = DMatrix::<f64>::zeros(hess.nrows(), total);
        let mut col = 0;
        for &b in &solution_blocks {
            let basis = &bases[b];
            embed
                .view_mut((b * bl, col), (bl, basis.ncols()))
                .copy_from(basis);
            col += basis.ncols();
        }
        let restricted = embed.transpose() * hess * &embed;
        modes = SymmetricEigen::new(restricted).eigenvalues.iter().copied().collect();
        modes.sort_by(f64::total_cmp);
    }
    Ok(Expansion {
        solution_blocks,
        non_solution_blocks,
        modes,
        flat_directions,
    })
}

/// Log magnitude of the windowed fluctuation integral at one alpha, with the summed
/// relative quadrature error.
pub fn log_fluctuation(exp: &Expansion, alpha: f64, hbar: f64, opts: &FluctuationOptions) -> Result<(f64, f64)> {
    let rule = CompositeRule::default();
    let r = opts.window;
    let mut log = 0.0;
    let mut rel_err = 0.0;
    for &hj in &exp.modes {
        let (v, e) = quadratic_mode_integral(hj / (alpha * hbar), r, &rule, opts.quad_tol)?;
        log += v.norm().ln();
        rel_err += e / v.norm();
    }
    for &(_, gnorm) in &exp.non_solution_blocks {
        let (v, e) = linear_mode_integral(gnorm / (alpha * hbar), r, &rule, opts.quad_tol)?;
        log += v.abs().ln();
        rel_err += e / v.abs();
    }
    log += exp.flat_directions as f64 * (2.0 * r).ln();
    Ok((log, rel_err))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationPoint {
    pub alpha: f64,
    pub magnitude: f64,
    pub log_magnitude: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationScaling {
    pub family: Family,
    pub points: Vec<FluctuationPoint>,
    /// Least-squares slope of `ln |I|` against `ln alpha`.
    pub slope: f64,
    pub intercept: f64,
    pub quadratic_modes: usize,
}

/// Fluctuation integral magnitudes around `center` for each alpha, and the log-log slope.
pub fn fluctuation_scaling(
    center: &WaveHistory,
    h: &HamiltonianSpec,
    alphas: &[f64],
    family: Family,
    opts: &FluctuationOptions,
) -> Result<FluctuationScaling> {
    let free = center.free_slices().len();
    let dims = free * center.lattice.sites;
    if dims > MAX_COMPLEX_DIMS {
        return Err(Error::FamilyPrecondition(format!(
            "{dims} complex perturbation dimensions exceed the quadrature limit {MAX_COMPLEX_DIMS}"
        )));
    }
    if alphas.len() < 2 || alphas.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(Error::Config("need at least two positive alphas".into()));
    }
    let exp = expand(center, h, opts)?;
    match family {
        Family::Solution if !exp.non_solution_blocks.is_empty() => {
            return Err(Error::FamilyPrecondition(format!(
                "center is not stationary: {} non-stationary slices",
                exp.non_solution_blocks.len()
            )))
        }
        Family::NonSolution if exp.non_solution_blocks.is_empty() => {
            return Err(Error::FamilyPrecondition("center is stationary".into()))
        }
        _ => {}
    }
    let mut points = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let (log, rel_error) = log_fluctuation(&exp, alpha, center.lattice.hbar, opts)?;
        points.push(FluctuationPoint {
            alpha,
            magnitude: log.exp(),
            log_magnitude: log,
            rel_error,
        });
    }
    let x: Vec<f64> = points.iter().map(|p| p.alpha.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.log_magnitude).collect();
    let (slope, intercept) = linear_fit(&x, &y);
    Ok(FluctuationScaling {
        family,
        points,
        slope,
        intercept,
        quadratic_modes: exp.modes.len(),
    })
}
