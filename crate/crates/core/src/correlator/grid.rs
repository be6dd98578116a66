use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{binomial, compensated_sum};

/// Discrete amplitudes of one slice: site probabilities `n_j / K` with `n_j >= 1` and
/// `sum n_j = K`, and phases `2 pi p / P`.
///
/// On this grid `|psi_j|^2 = n_j / (K a)`, so every point carries measure
/// `prod_j (K a / n_j)^2`, and the points are uniformly spaced in `|psi|^2` and phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmplitudeGrid {
    pub k: u32,
    #[serde(default = "default_phase_points")]
    pub phase_points: u32,
}

fn default_phase_points() -> u32 {
    8
}

impl AmplitudeGrid {
    pub fn new(k: u32, phase_points: u32) -> Self {
        Self { k, phase_points }
    }

    pub fn validate(&self, sites: usize) -> Result<()> {
        if self.phase_points < 1 {
            return Err(Error::Config("need at least one phase point".into()));
        }
        if (self.k as usize) < sites {
            return Err(Error::Config(format!(
                "K = {} quanta cannot give every one of {sites} sites a quantum",
                self.k
            )));
        }
        Ok(())
    }

    /// `C(K-1, M-1)`.
    pub fn compositions_count(&self, sites: usize) -> u128 {
        binomial(self.k as u64 - 1, sites as u64 - 1)
    }

    pub fn phase_count(&self, sites: usize) -> u128 {
        (self.phase_points as u128).saturating_pow(sites as u32)
    }

    pub fn per_slice(&self, sites: usize) -> u128 {
        self.compositions_count(sites).saturating_mul(self.phase_count(sites))
    }

    /// Points of the full interior grid, saturating on overflow.
    pub fn total(&self, sites: usize, interior: usize) -> u128 {
        self.per_slice(sites).saturating_pow(interior as u32)
    }

    /// All compositions of `K` into `sites` positive parts, in lexicographic order.
    pub fn compositions(&self, sites: usize) -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        let mut cur = vec![0u32; sites];
        fn rec(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, pos: usize, left: u32) {
            let m = cur.len();
            if pos == m - 1 {
                cur[pos] = left;
                out.push(cur.clone());
                return;
            }
            let reserve = (m - 1 - pos) as u32;
            for n in 1..=left - reserve {
                cur[pos] = n;
                rec(out, cur, pos + 1, left - n);
            }
        }
        rec(&mut out, &mut cur, 0, self.k);
        out
    }

    /// `ln |psi|` for `n` quanta.
    pub fn ln_modulus(&self, n: u32, spacing: f64) -> f64 {
        0.5 * (n as f64 / (self.k as f64 * spacing)).ln()
    }

    /// `ln` of the measure of one slice with quanta `ns`.
    pub fn slice_log_measure(&self, ns: &[u32], spacing: f64) -> f64 {
        compensated_sum(ns.iter().map(|&n| -4.0 * self.ln_modulus(n, spacing)))
    }

    /// `ln sum |measure|` over every point of one slice, by dynamic programming over sites.
    pub fn log_partition_slice(&self, sites: usize, spacing: f64) -> f64 {
        let k = self.k as usize;
        let w: Vec<f64> = (0..=k)
            .map(|n| if n == 0 { f64::NEG_INFINITY } else { -4.0 * self.ln_modulus(n as u32, spacing) })
            .collect();
        // f[s] = ln sum over compositions of s into the sites processed so far
        let mut f = w.clone();
        for _ in 1..sites {
            let mut g = vec![f64::NEG_INFINITY; k + 1];
            for (s, gs) in g.iter_mut().enumerate() {
                let terms: Vec<f64> = (1..s).map(|n| f[s - n] + w[n]).filter(|x| x.is_finite()).collect();
                if let Some(mx) = terms.iter().copied().reduce(f64::max) {
                    *gs = mx + terms.iter().map(|t| (t - mx).exp()).sum::<f64>().ln();
                }
            }
            f = g;
        }
        f[k] + sites as f64 * (self.phase_points as f64).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        let g = AmplitudeGrid::new(8, 8);
        assert_eq!(g.compositions_count(2), 7);
        assert_eq!(g.per_slice(2), 7 * 64);
        assert_eq!(g.compositions(2).len(), 7);
        let g16 = AmplitudeGrid::new(16, 8);
        assert_eq!(g16.compositions(4).len(), 455);
        assert!(g16.compositions(4).iter().all(|c| c.iter().sum::<u32>() == 16 && c.iter().all(|&n| n >= 1)));
        assert_eq!(AmplitudeGrid::new(64, 64).total(10, 10), u128::MAX);
    }

    #[test]
    fn partition_matches_enumeration() {
        let g = AmplitudeGrid::new(9, 3);
        let a = 0.7;
        let direct: f64 = g
            .compositions(3)
            .iter()
            .map(|c| g.slice_log_measure(c, a).exp())
            .sum::<f64>()
            * 27.0;
        assert!((g.log_partition_slice(3, a) - direct.ln()).abs() < 1e-12);
    }
}
