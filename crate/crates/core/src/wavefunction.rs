//! Normalized complex amplitudes on one time slice.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;

/// Tolerance on `sum a |psi|^2 = 1` accepted by [`DiscreteWaveFunction::new`].
pub const NORM_TOL: f64 = 1e-12;

/// Complex amplitudes `psi_n` on `M` sites of spacing `a`, normalized so that
/// `sum_n a |psi_n|^2 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteWaveFunction {
    amplitudes: Vec<Complex64>,
    spacing: f64,
}

impl DiscreteWaveFunction {
    /// Wraps already-normalized amplitudes, rejecting anything off by more than [`NORM_TOL`].
    pub fn new(amplitudes: Vec<Complex64>, spacing: f64) -> Result<Self> {
        Self::with_tolerance(amplitudes, spacing, NORM_TOL)
    }

    pub fn with_tolerance(amplitudes: Vec<Complex64>, spacing: f64, tol: f64) -> Result<Self> {
        check_finite(&amplitudes, spacing)?;
        let norm = lattice_norm_sq(&amplitudes, spacing);
        if (norm - 1.0).abs() > tol {
            return Err(Error::InvalidWaveFunction(format!(
                "sum a|psi|^2 = {norm:.17} is not 1 within {tol:e}"
            )));
        }
        Ok(Self {
            amplitudes,
            spacing,
        })
    }

    /// Rescales arbitrary nonzero amplitudes onto the normalization sphere.
    pub fn normalized(amplitudes: Vec<Complex64>, spacing: f64) -> Result<Self> {
        check_finite(&amplitudes, spacing)?;
        let norm = lattice_norm_sq(&amplitudes, spacing);
        if norm <= 0.0 {
            return Err(Error::InvalidWaveFunction("zero vector".into()));
        }
        let s = norm.sqrt().recip();
        Ok(Self {
            amplitudes: amplitudes.into_iter().map(|z| z * s).collect(),
            spacing,
        })
    }

    /// Builds a state from per-site probabilities `p_n = a |psi_n|^2` and phases.
    pub fn from_probabilities(probs: &[f64], phases: &[f64], spacing: f64) -> Result<Self> {
        if probs.len() != phases.len() {
            return Err(Error::DimensionMismatch {
                expected: probs.len(),
                found: phases.len(),
            });
        }
        let amps = probs
            .iter()
            .zip(phases)
            .map(|(&p, &th)| Complex64::from_polar((p / spacing).sqrt(), th))
            .collect();
        Self::normalized(amps, spacing)
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn sites(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sq(&self) -> f64 {
        lattice_norm_sq(&self.amplitudes, self.spacing)
    }

    /// `<self|other> = a sum conj(self_n) other_n`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        inner(&self.amplitudes, &other.amplitudes, self.spacing)
    }

    /// Site probabilities `a |psi_n|^2`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes
            .iter()
            .map(|z| self.spacing * z.norm_sqr())
            .collect()
    }

    pub fn with_global_phase(&self, theta: f64) -> Self {
        let u = Complex64::from_polar(1.0, theta);
        Self {
            amplitudes: self.amplitudes.iter().map(|z| z * u).collect(),
            spacing: self.spacing,
        }
    }

    /// Inverse participation ratio `sum (a |psi|^2)^2`; 1 for one site, `1/M` when uniform.
    pub fn locality_score(&self) -> f64 {
        self.probabilities().iter().map(|p| p * p).sum()
    }

    pub fn is_local(&self, threshold: f64) -> bool {
        self.locality_score() >= threshold
    }

    pub fn min_modulus_sq(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|z| z.norm_sqr())
            .fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn from_raw(amplitudes: Vec<Complex64>, spacing: f64) -> Self {
        Self {
            amplitudes,
            spacing,
        }
    }
}

fn check_finite(amplitudes: &[Complex64], spacing: f64) -> Result<()> {
    if amplitudes.is_empty() {
        return Err(Error::InvalidWaveFunction("no amplitudes".into()));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::InvalidWaveFunction(format!("bad spacing {spacing}")));
    }
    if let Some(i) = amplitudes.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidWaveFunction(format!(
            "non-finite amplitude at site {i}"
        )));
    }
    Ok(())
}

pub(crate) fn lattice_norm_sq(v: &[Complex64], spacing: f64) -> f64 {
    spacing * v.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

pub(crate) fn inner(u: &[Complex64], v: &[Complex64], spacing: f64) -> Complex64 {
    let s: Complex64 = u.iter().zip(v).map(|(x, y)| x.conj() * y).sum();
    s * spacing
}

/// Constant modulus `sqrt(1/(aM))`, zero phase.
pub fn make_homogeneous(lattice: &LatticeSpec) -> Result<DiscreteWaveFunction> {
    lattice.validate()?;
    let amp = (1.0 / lattice.length()).sqrt();
    Ok(DiscreteWaveFunction::from_raw(
        vec![Complex64::new(amp, 0.0); lattice.sites],
        lattice.spacing,
    ))
}

/// `|psi|^2 = B2` on `peak_site`, the remaining probability spread evenly elsewhere.
pub fn make_inhomogeneous(
    lattice: &LatticeSpec,
    b2: f64,
    peak_site: usize,
) -> Result<DiscreteWaveFunction> {
    lattice.validate()?;
    let m = lattice.sites;
    if peak_site >= m {
        return Err(Error::InvalidWaveFunction(format!(
            "peak site {peak_site} outside 0..{m}"
        )));
    }
    let ab2 = lattice.spacing * b2;
    if !(ab2 > 0.0 && ab2 < 1.0) {
        return Err(Error::OutsideRatioWindow(ab2));
    }
    let a = lattice.spacing;
    let rest = ((1.0 - ab2) / (a * (m - 1) as f64)).sqrt();
    let amps = (0..m)
        .map(|n| {
            if n == peak_site {
                Complex64::new(b2.sqrt(), 0.0)
            } else {
                Complex64::new(rest, 0.0)
            }
        })
        .collect();
    Ok(DiscreteWaveFunction::from_raw(amps, a))
}

/// Gaussian profile `exp(-(x - x0)^2 / (4 sigma^2) + i k x)`, normalized on the lattice.
pub fn gaussian(
    lattice: &LatticeSpec,
    center: f64,
    width: f64,
    wavenumber: f64,
) -> Result<DiscreteWaveFunction> {
    lattice.validate()?;
    let amps = (0..lattice.sites)
        .map(|n| {
            let x = lattice.position(n);
            let d = (x - center) / width;
            Complex64::from_polar((-0.25 * d * d).exp(), wavenumber * x)
        })
        .collect();
    DiscreteWaveFunction::normalized(amps, lattice.spacing)
}

/// Probability `1 - (M-1) q` on `site` and `q` on every other site.
pub fn concentrated(
    lattice: &LatticeSpec,
    site: usize,
    q: f64,
) -> Result<DiscreteWaveFunction> {
    lattice.validate()?;
    let m = lattice.sites;
    let peak = 1.0 - (m - 1) as f64 * q;
    if site >= m || !(q >= 0.0 && peak > 0.0) {
        return Err(Error::InvalidWaveFunction(format!(
            "cannot concentrate on site {site} with background {q}"
        )));
    }
    let probs: Vec<f64> = (0..m).map(|n| if n == site { peak } else { q }).collect();
    DiscreteWaveFunction::from_probabilities(&probs, &vec![0.0; m], lattice.spacing)
}

#[derive(Serialize, Deserialize)]
struct WaveFunctionRepr {
    sites: usize,
    spacing: f64,
    amplitudes: Vec<[f64; 2]>,
}

impl Serialize for DiscreteWaveFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        WaveFunctionRepr {
            sites: self.sites(),
            spacing: self.spacing,
            amplitudes: self.amplitudes.iter().map(|z| [z.re, z.im]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DiscreteWaveFunction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = WaveFunctionRepr::deserialize(d)?;
        if r.sites != r.amplitudes.len() {
            return Err(serde::de::Error::custom(format!(
                "header says {} sites but {} amplitudes given",
                r.sites,
                r.amplitudes.len()
            )));
        }
        let amps = r
            .amplitudes
            .into_iter()
            .map(|[re, im]| Complex64::new(re, im))
            .collect();
        // Text round trips of 17-digit floats can drift in the last ulp.
        DiscreteWaveFunction::with_tolerance(amps, r.spacing, 1e-10)
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lat(m: usize, a: f64) -> LatticeSpec {
        LatticeSpec::new(m, a, 0.01, 1e-3, 16)
    }

    #[test]
    fn homogeneous_amplitude() {
        let psi = make_homogeneous(&lat(10, 0.1)).unwrap();
        assert!((psi.amplitudes()[0].re - 1.0).abs() < 1e-15);
        let psi = make_homogeneous(&lat(8, 0.5)).unwrap();
        assert!((psi.amplitudes()[3].re - 0.5).abs() < 1e-15);
        assert!((psi.norm_sq() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inhomogeneous_amplitude_and_window() {
        let l = lat(5, 0.25);
        let psi = make_inhomogeneous(&l, 2.0, 0).unwrap();
        assert!((psi.amplitudes()[1].re - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((psi.norm_sq() - 1.0).abs() < 1e-12);
        assert!(matches!(
            make_inhomogeneous(&l, 4.0, 0),
            Err(Error::OutsideRatioWindow(_))
        ));
        assert!(make_inhomogeneous(&l, 0.0, 0).is_err());
    }

    #[test]
    fn locality_examples() {
        let l = lat(5, 0.25);
        let psi = make_inhomogeneous(&l, 2.0, 2).unwrap();
        assert!((psi.locality_score() - 0.3125).abs() < 1e-12);
        let h = make_homogeneous(&lat(10, 0.1)).unwrap();
        assert!((h.locality_score() - 0.1).abs() < 1e-12);
        let d = concentrated(&lat(6, 0.3), 4, 0.0).unwrap();
        assert!((d.locality_score() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_unnormalized_and_nan() {
        let a = 0.5;
        assert!(DiscreteWaveFunction::new(vec![Complex64::new(1.0, 0.0); 4], a).is_err());
        let mut v = vec![Complex64::new(0.5f64.sqrt(), 0.0); 4];
        v[2] = Complex64::new(f64::NAN, 0.0);
        assert!(DiscreteWaveFunction::new(v, a).is_err());
    }

    #[test]
    fn json_round_trip() {
        let psi = gaussian(&lat(7, 0.3), 1.0, 0.4, 2.0).unwrap();
        let s = serde_json::to_string(&psi).unwrap();
        assert!(s.contains("\"sites\":7"));
        let back: DiscreteWaveFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(back, psi);
    }

    fn arb_state() -> impl Strategy<Value = DiscreteWaveFunction> {
        (2usize..9, 0.05f64..2.0).prop_flat_map(|(m, a)| {
            prop::collection::vec((0.01f64..1.0, -3.2f64..3.2), m).prop_map(move |v| {
                let amps = v.iter().map(|&(r, th)| Complex64::from_polar(r, th)).collect();
                DiscreteWaveFunction::normalized(amps, a).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn constructors_are_normalized(m in 2usize..40, a in 0.01f64..3.0, frac in 0.01f64..0.99, peak in 0usize..40) {
            let l = lat(m, a);
            prop_assert!((make_homogeneous(&l).unwrap().norm_sq() - 1.0).abs() < 1e-12);
            let b2 = frac / a;
            let psi = make_inhomogeneous(&l, b2, peak % m).unwrap();
            prop_assert!((psi.norm_sq() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn no_state_beats_single_site_locality(psi in arb_state()) {
            let s = psi.locality_score();
            prop_assert!(s <= 1.0 + 1e-12);
            prop_assert!(s >= 1.0 / psi.sites() as f64 - 1e-12);
        }
    }
}
