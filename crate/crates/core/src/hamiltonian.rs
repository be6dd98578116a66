//! Lattice Hamiltonians, the discrete momentum operator and boundary-state checks.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Boundary, LatticeSpec};
use crate::wavefunction::{inner, DiscreteWaveFunction};

/// Potential landscape on top of the nearest-neighbour kinetic term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HamiltonianKind {
    Free,
    /// `V(x) = m omega^2 (x - center)^2 / 2`.
    Harmonic { omega: f64, center: f64 },
    /// Wells of depth `depth` at two sites; the right one is raised by `detuning`.
    DoubleWell {
        left: usize,
        right: usize,
        depth: f64,
        #[serde(default)]
        detuning: f64,
    },
    /// A single attractive site.
    Pinning { site: usize, depth: f64 },
    /// Particle sites times pointer sites, flattened as `r * pointer_sites + q`.
    /// The interaction lowers the energy of pointer position `q = r mod pointer_sites`
    /// when the particle sits at `r`.
    CompositeDetector {
        pointer_sites: usize,
        coupling: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    #[serde(flatten)]
    pub kind: HamiltonianKind,
    #[serde(default = "default_mass")]
    pub mass: f64,
    /// Constant added to the diagonal.
    #[serde(default)]
    pub offset: f64,
}

fn default_mass() -> f64 {
    1.0
}

impl HamiltonianSpec {
    pub fn new(kind: HamiltonianKind) -> Self {
        Self {
            kind,
            mass: 1.0,
            offset: 0.0,
        }
    }

    pub fn free() -> Self {
        Self::new(HamiltonianKind::Free)
    }

    pub fn pinning(site: usize, depth: f64) -> Self {
        Self::new(HamiltonianKind::Pinning { site, depth })
    }

    pub fn harmonic(omega: f64, center: f64) -> Self {
        Self::new(HamiltonianKind::Harmonic { omega, center })
    }

    pub fn double_well(left: usize, right: usize, depth: f64, detuning: f64) -> Self {
        Self::new(HamiltonianKind::DoubleWell {
            left,
            right,
            depth,
            detuning,
        })
    }

    pub fn composite(pointer_sites: usize, coupling: f64) -> Self {
        Self::new(HamiltonianKind::CompositeDetector {
            pointer_sites,
            coupling,
        })
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn with_mass(mut self, mass: f64) -> Self {
        self.mass = mass;
        self
    }

    /// Real symmetric matrix of the Hamiltonian on `lattice`.
    pub fn real_matrix(&self, lattice: &LatticeSpec) -> Result<DMatrix<f64>> {
        let m = lattice.sites;
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::InvalidHamiltonian(format!("mass must be positive, got {}", self.mass)));
        }
        let a = lattice.spacing;
        let hop = lattice.hbar * lattice.hbar / (2.0 * self.mass * a * a);
        let mut h = DMatrix::<f64>::zeros(m, m);
        let site_ok = |s: usize| {
            if s < m {
                Ok(())
            } else {
                Err(Error::InvalidHamiltonian(format!("site {s} outside 0..{m}")))
            }
        };
        match self.kind {
            HamiltonianKind::CompositeDetector {
                pointer_sites: q,
                coupling,
            } => {
                if q < 2 || !m.is_multiple_of(q) || m / q < 2 {
                    return Err(Error::InvalidHamiltonian(format!(
                        "{m} sites cannot be split into particle x {q} pointer sites"
                    )));
                }
                let np = m / q;
                for r in 0..np {
                    add_kinetic(&mut h, q, hop, lattice.boundary, |j| r * q + j);
                }
                for j in 0..q {
                    add_kinetic(&mut h, np, hop, lattice.boundary, |r| r * q + j);
                }
                for r in 0..np {
                    let i = r * q + r % q;
                    h[(i, i)] -= coupling;
                }
            }
            _ => {
                add_kinetic(&mut h, m, hop, lattice.boundary, |j| j);
                match self.kind {
                    HamiltonianKind::Free => {}
                    HamiltonianKind::Harmonic { omega, center } => {
                        for n in 0..m {
                            let d = lattice.position(n) - center;
                            h[(n, n)] += 0.5 * self.mass * omega * omega * d * d;
                        }
                    }
                    HamiltonianKind::DoubleWell {
                        left,
                        right,
                        depth,
                        detuning,
                    } => {
                        site_ok(left)?;
                        site_ok(right)?;
                        h[(left, left)] -= depth;
                        h[(right, right)] += detuning - depth;
                    }
                    HamiltonianKind::Pinning { site, depth } => {
                        site_ok(site)?;
                        h[(site, site)] -= depth;
                    }
                    HamiltonianKind::CompositeDetector { .. } => unreachable!(),
                }
            }
        }
        for n in 0..m {
            h[(n, n)] += self.offset;
        }
        if h.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidHamiltonian("non-finite matrix element".into()));
        }
        Ok(h)
    }

    pub fn matrix(&self, lattice: &LatticeSpec) -> Result<DMatrix<Complex64>> {
        Ok(self.real_matrix(lattice)?.map(|x| Complex64::new(x, 0.0)))
    }

    /// Eigenvalues in ascending order and lattice-normalized eigenstates.
    pub fn eigenstates(&self, lattice: &LatticeSpec) -> Result<(Vec<f64>, Vec<DiscreteWaveFunction>)> {
        let eig = SymmetricEigen::new(self.real_matrix(lattice)?);
        let mut order: Vec<usize> = (0..lattice.sites).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let scale = lattice.spacing.sqrt().recip();
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let states = order
            .iter()
            .map(|&i| {
                let col = eig.eigenvectors.column(i);
                let amps = col.iter().map(|&x| Complex64::new(x * scale, 0.0)).collect();
                DiscreteWaveFunction::normalized(amps, lattice.spacing)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((values, states))
    }

    pub fn ground_state(&self, lattice: &LatticeSpec) -> Result<(f64, DiscreteWaveFunction)> {
        let (e, mut s) = self.eigenstates(lattice)?;
        Ok((e[0], fix_sign(s.swap_remove(0))))
    }

    /// Energy eigenstate with the largest weight on `site`.
    ///
    /// Degenerate clusters (eigenvalues within `cluster_tol`) are rotated so that the
    /// returned vector is the one most concentrated on `site`.
    pub fn localized_eigenstate(
        &self,
        lattice: &LatticeSpec,
        site: usize,
        cluster_tol: f64,
    ) -> Result<(f64, DiscreteWaveFunction)> {
        if site >= lattice.sites {
            return Err(Error::InvalidHamiltonian(format!("site {site} outside lattice")));
        }
        let eig = SymmetricEigen::new(self.real_matrix(lattice)?);
        let weight = |i: usize| eig.eigenvectors[(site, i)].powi(2);
        let best = (0..lattice.sites)
            .max_by(|&i, &j| weight(i).total_cmp(&weight(j)))
            .unwrap();
        let e0 = eig.eigenvalues[best];
        let cluster: Vec<usize> = (0..lattice.sites)
            .filter(|&i| (eig.eigenvalues[i] - e0).abs() <= cluster_tol)
            .collect();
        let mut v = DVector::<f64>::zeros(lattice.sites);
        if cluster.len() == 1 {
            v.copy_from(&eig.eigenvectors.column(best));
        } else {
            // Within a degenerate subspace the projection onto `site` is maximized by
            // the normalized projection of the site vector itself.
            for &i in &cluster {
                let c = eig.eigenvectors[(site, i)];
                v += eig.eigenvectors.column(i) * c;
            }
        }
        let amps = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let psi = DiscreteWaveFunction::normalized(amps, lattice.spacing)?;
        let e = expectations(&psi, self, lattice)?.0;
        let psi = if psi.amplitudes()[site].re < 0.0 {
            psi.with_global_phase(std::f64::consts::PI)
        } else {
            psi
        };
        Ok((e, psi))
    }
}

fn fix_sign(psi: DiscreteWaveFunction) -> DiscreteWaveFunction {
    let big = psi
        .amplitudes()
        .iter()
        .copied()
        .max_by(|x, y| x.norm_sqr().total_cmp(&y.norm_sqr()))
        .unwrap();
    if big.re < 0.0 {
        psi.with_global_phase(std::f64::consts::PI)
    } else {
        psi
    }
}

/// Adds `2t` on the diagonal and `-t` between neighbours of a chain of `n` sites,
/// placed into the matrix through `index`.
fn add_kinetic<F: Fn(usize) -> usize>(
    h: &mut DMatrix<f64>,
    n: usize,
    t: f64,
    boundary: Boundary,
    index: F,
) {
    for j in 0..n {
        let i = index(j);
        h[(i, i)] += 2.0 * t;
        if j + 1 < n {
            let k = index(j + 1);
            h[(i, k)] -= t;
            h[(k, i)] -= t;
        }
    }
    if boundary == Boundary::Periodic && n >= 2 {
        let (i, k) = (index(0), index(n - 1));
        h[(i, k)] -= t;
        h[(k, i)] -= t;
    }
}

/// Central-difference momentum `-i hbar (psi_{n+1} - psi_{n-1}) / (2a)` with periodic wraparound.
///
/// On the composite lattice this is the sum of the particle and pointer momenta.
pub fn momentum_matrix(h: &HamiltonianSpec, lattice: &LatticeSpec) -> DMatrix<Complex64> {
    let m = lattice.sites;
    let c = Complex64::new(0.0, -lattice.hbar / (2.0 * lattice.spacing));
    let mut p = DMatrix::<Complex64>::zeros(m, m);
    let mut chain = |n: usize, index: &dyn Fn(usize) -> usize| {
        for j in 0..n {
            let i = index(j);
            p[(i, index((j + 1) % n))] += c;
            p[(i, index((j + n - 1) % n))] -= c;
        }
    };
    match h.kind {
        HamiltonianKind::CompositeDetector { pointer_sites: q, .. } if q >= 2 && m.is_multiple_of(q) => {
            let np = m / q;
            for r in 0..np {
                chain(q, &|j| r * q + j);
            }
            for j in 0..q {
                chain(np, &|r| r * q + j);
            }
        }
        _ => chain(m, &|j| j),
    }
    p
}

pub(crate) fn apply(mat: &DMatrix<Complex64>, v: &[Complex64]) -> Vec<Complex64> {
    let x = DVector::from_column_slice(v);
    (mat * x).iter().copied().collect()
}

/// `(Re <psi|H|psi>, Re <psi|P|psi>)`.
pub fn expectations(
    psi: &DiscreteWaveFunction,
    h: &HamiltonianSpec,
    lattice: &LatticeSpec,
) -> Result<(f64, f64)> {
    if psi.sites() != lattice.sites {
        return Err(Error::DimensionMismatch {
            expected: lattice.sites,
            found: psi.sites(),
        });
    }
    let hm = h.matrix(lattice)?;
    let pm = momentum_matrix(h, lattice);
    let a = lattice.spacing;
    let v = psi.amplitudes();
    let e = inner(v, &apply(&hm, v), a).re;
    let p = inner(v, &apply(&pm, v), a).re;
    Ok((e, p))
}

/// Two boundary states at signed integer times `t1 != t2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPair {
    pub psi1: DiscreteWaveFunction,
    pub psi2: DiscreteWaveFunction,
    pub t1: i64,
    pub t2: i64,
}

impl BoundaryPair {
    pub fn new(psi1: DiscreteWaveFunction, psi2: DiscreteWaveFunction, t1: i64, t2: i64) -> Result<Self> {
        if t1 == t2 {
            return Err(Error::InvalidHistory("boundary times must differ".into()));
        }
        if psi1.sites() != psi2.sites() {
            return Err(Error::DimensionMismatch {
                expected: psi1.sites(),
                found: psi2.sites(),
            });
        }
        Ok(Self { psi1, psi2, t1, t2 })
    }

    /// The same correlator read backwards in time.
    pub fn swapped(&self) -> Self {
        Self {
            psi1: self.psi2.clone(),
            psi2: self.psi1.clone(),
            t1: self.t2,
            t2: self.t1,
        }
    }

    /// Number of links `|t2 - t1|`.
    pub fn links(&self) -> usize {
        self.t2.abs_diff(self.t1) as usize
    }

    pub fn interior_slices(&self) -> usize {
        self.links() - 1
    }

    /// `+1` forward in time, `-1` backward.
    pub fn direction(&self) -> f64 {
        if self.t2 > self.t1 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Outcome of comparing conserved expectation values of the two boundary states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCheck {
    pub passed: bool,
    pub energy_residual: f64,
    pub momentum_residual: f64,
    /// Angular momentum vanishes identically in one dimension.
    pub angular_momentum_skipped: bool,
}

pub fn validate_boundary_pair(
    pair: &BoundaryPair,
    h: &HamiltonianSpec,
    lattice: &LatticeSpec,
    tol: f64,
) -> Result<BoundaryCheck> {
    let (e1, p1) = expectations(&pair.psi1, h, lattice)?;
    let (e2, p2) = expectations(&pair.psi2, h, lattice)?;
    let de = (e1 - e2).abs();
    let dp = (p1 - p2).abs();
    Ok(BoundaryCheck {
        passed: de <= tol && dp <= tol,
        energy_residual: de,
        momentum_residual: dp,
        angular_momentum_skipped: true,
    })
}
