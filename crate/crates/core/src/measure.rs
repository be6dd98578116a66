//! Log measure density and action phase of a history, with the action gradient
//! and Hessian in real coordinates.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{apply, HamiltonianSpec};
use crate::history::WaveHistory;
use crate::numerics::{CompensatedSum, ComplexSum};
use crate::wavefunction::inner;

/// Natural log of `prod 1/|psi|^4` over the integrated slices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogMeasure {
    pub value: f64,
}

/// The real `S` with weight `exp(i S)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionPhase {
    pub value: f64,
}

/// `-4 sum ln|psi|` over the slices that are integrated (fixed boundaries excluded).
///
/// Sites below the amplitude floor `|psi|^2 >= 1/(K a M)` are rejected.
pub fn measure_log_density(history: &WaveHistory) -> Result<LogMeasure> {
    let floor = history.lattice.amplitude_floor();
    let mut acc = CompensatedSum::new();
    for t in history.free_slices() {
        for (n, z) in history.slices[t].amplitudes().iter().enumerate() {
            let m2 = z.norm_sqr();
            // one ulp of slack so states sitting exactly on the floor are accepted
            if m2 < floor * (1.0 - 1e-12) {
                return Err(Error::AmplitudeFloor {
                    slice: t,
                    site: n,
                    value: m2,
                    floor,
                });
            }
            acc.add(-2.0 * m2.ln());
        }
    }
    Ok(LogMeasure { value: acc.value() })
}

/// `-4 sum ln|psi|` over every slice, with no floor check.
pub fn slice_log_measure(amps: &[Complex64]) -> f64 {
    amps.iter().map(|z| -2.0 * z.norm_sqr().ln()).sum()
}

/// Action of one link from `u` to `v` separated by the signed step `step`, before
/// division by `alpha hbar`:
/// `(i hbar / 2)(<u|v> - <v|u>) - step <m|H|m>` with `m = (u + v)/2`.
///
/// Both inner products are evaluated separately, so the imaginary part of the
/// result measures rounding only.
pub fn link_action_complex(
    u: &[Complex64],
    v: &[Complex64],
    hmat: &DMatrix<Complex64>,
    spacing: f64,
    step: f64,
    hbar: f64,
) -> Complex64 {
    let uv = inner(u, v, spacing);
    let vu = inner(v, u, spacing);
    let m: Vec<Complex64> = u.iter().zip(v).map(|(x, y)| (x + y) * 0.5).collect();
    let e = inner(&m, &apply(hmat, &m), spacing);
    Complex64::new(0.0, 0.5 * hbar) * (uv - vu) - e * step
}

/// Real link action `-hbar Im<u|v> - step Re<m|H|m>`.
pub fn link_action(
    u: &[Complex64],
    v: &[Complex64],
    hmat: &DMatrix<Complex64>,
    spacing: f64,
    step: f64,
    hbar: f64,
) -> f64 {
    let uv = inner(u, v, spacing);
    let m: Vec<Complex64> = u.iter().zip(v).map(|(x, y)| (x + y) * 0.5).collect();
    let e = inner(&m, &apply(hmat, &m), spacing);
    -hbar * uv.im - step * e.re
}

/// Sum of link actions (not divided by `alpha hbar`).
pub fn raw_action(history: &WaveHistory, hmat: &DMatrix<Complex64>) -> f64 {
    let l = &history.lattice;
    history
        .slices
        .windows(2)
        .map(|w| link_action(w[0].amplitudes(), w[1].amplitudes(), hmat, l.spacing, history.step, l.hbar))
        .collect::<CompensatedSum>()
        .value()
}

/// `S = raw_action / (alpha hbar)`; fails if the accumulator picks up an imaginary part.
pub fn action_phase(history: &WaveHistory, h: &HamiltonianSpec) -> Result<ActionPhase> {
    let l = &history.lattice;
    let hmat = h.matrix(l)?;
    let mut acc = ComplexSum::default();
    let mut scale = 0.0f64;
    for w in history.slices.windows(2) {
        let z = link_action_complex(w[0].amplitudes(), w[1].amplitudes(), &hmat, l.spacing, history.step, l.hbar);
        scale = scale.max(z.norm());
        acc.add(z);
    }
    let total = acc.value();
    if total.im.abs() > 1e-12 * scale.max(1.0) {
        return Err(Error::InvalidHistory(format!(
            "action accumulator has imaginary part {:e}",
            total.im
        )));
    }
    Ok(ActionPhase {
        value: total.re / (l.alpha * l.hbar),
    })
}

/// Number of real coordinates per slice.
pub fn block_len(sites: usize) -> usize {
    2 * sites
}

/// Gradient of the raw action with respect to the real coordinates
/// `(Re psi_t, Im psi_t)` of every free slice, in slice order.
pub fn action_gradient(history: &WaveHistory, hmat: &DMatrix<Complex64>) -> DVector<f64> {
    let l = &history.lattice;
    let m = l.sites;
    let free = history.free_slices();
    let mut g = DVector::<f64>::zeros(free.len() * block_len(m));
    let a = l.spacing;
    let hbar = l.hbar;
    let step = history.step;
    let zero = vec![Complex64::new(0.0, 0.0); m];
    for (b, t) in free.enumerate() {
        let cur = history.slices[t].amplitudes();
        // d/d(psi_t^*) of each link touching slice t
        let mut d = vec![Complex64::new(0.0, 0.0); m];
        let coef = Complex64::new(0.0, 0.5 * hbar * a);
        let mut mids = zero.clone();
        if t + 1 < history.len() {
            let next = history.slices[t + 1].amplitudes();
            for n in 0..m {
                d[n] += coef * next[n];
                mids[n] += (cur[n] + next[n]) * 0.5;
            }
        }
        if t > 0 {
            let prev = history.slices[t - 1].amplitudes();
            for n in 0..m {
                d[n] -= coef * prev[n];
                mids[n] += (cur[n] + prev[n]) * 0.5;
            }
        }
        let hm = apply(hmat, &mids);
        for n in 0..m {
            let w = d[n] - hm[n] * (0.5 * step * a);
            g[b * 2 * m + n] = 2.0 * w.re;
            g[b * 2 * m + m + n] = 2.0 * w.im;
        }
    }
    g
}

/// Hessian of the raw action in the same coordinates. The action is quadratic, so
/// central differences of the analytic gradient are exact up to rounding.
pub fn action_hessian(history: &WaveHistory, hmat: &DMatrix<Complex64>) -> DMatrix<f64> {
    let m = history.lattice.sites;
    let free: Vec<usize> = history.free_slices().collect();
    let dim = free.len() * block_len(m);
    let mut hess = DMatrix::<f64>::zeros(dim, dim);
    let mut work = history.clone();
    for j in 0..dim {
        let (b, c) = (j / (2 * m), j % (2 * m));
        let t = free[b];
        let unit = if c < m {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 1.0)
        };
        let site = c % m;
        let base = history.slices[t].amplitudes().to_vec();
        let mut plus = base.clone();
        plus[site] += unit;
        let mut minus = base;
        minus[site] -= unit;
        work.slices[t] = crate::wavefunction::DiscreteWaveFunction::from_raw(plus, history.lattice.spacing);
        let gp = action_gradient(&work, hmat);
        work.slices[t] = crate::wavefunction::DiscreteWaveFunction::from_raw(minus, history.lattice.spacing);
        let gm = action_gradient(&work, hmat);
        work.slices[t] = history.slices[t].clone();
        hess.set_column(j, &((gp - gm) * 0.5));
    }
    // symmetrize away rounding
    (&hess + hess.transpose()) * 0.5
}
