//! Composite Gauss–Legendre quadrature.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point rule on `[-1, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Fixed-order rule reused across many integrals.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Default for CompositeRule {
    fn default() -> Self {
        Self::new(20)
    }
}

impl CompositeRule {
    pub fn new(order: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        Self { nodes, weights }
    }

    /// `int_lo^hi f` with `panels` equal panels.
    pub fn integrate<F: Fn(f64) -> Complex64>(&self, f: &F, lo: f64, hi: f64, panels: usize) -> Complex64 {
        let h = (hi - lo) / panels as f64;
        let mut total = Complex64::new(0.0, 0.0);
        for p in 0..panels {
            let a = lo + h * p as f64;
            let mid = a + 0.5 * h;
            let mut s = Complex64::new(0.0, 0.0);
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                s += f(mid + 0.5 * h * x) * *w;
            }
            total += s * (0.5 * h);
        }
        total
    }

    /// Doubles the panel count until successive estimates agree to `rel_tol`.
    /// Returns the value and the last difference as the error estimate.
    pub fn adaptive<F: Fn(f64) -> Complex64>(
        &self,
        f: &F,
        lo: f64,
        hi: f64,
        rel_tol: f64,
    ) -> Result<(Complex64, f64)> {
        let mut panels = 4;
        let mut prev = self.integrate(f, lo, hi, panels);
        let mut err = f64::INFINITY;
        while panels <= 1 << 14 {
            panels *= 2;
            let cur = self.integrate(f, lo, hi, panels);
            err = (cur - prev).norm();
            if err <= rel_tol * cur.norm() {
                return Ok((cur, err));
            }
            prev = cur;
        }
        Err(Error::Quadrature {
            estimate: err / prev.norm(),
            tolerance: rel_tol,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_integrate_polynomials_exactly() {
        let (x, w) = gauss_legendre(10);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // x^18 is integrated exactly by the 10-point rule
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn composite_gaussian() {
        let r = CompositeRule::default();
        let (v, e) = r
            .adaptive(&|x: f64| Complex64::new((-x * x).exp(), 0.0), -8.0, 8.0, 1e-13)
            .unwrap();
        assert!((v.re - std::f64::consts::PI.sqrt()).abs() < 1e-13);
        assert!(e < 1e-12);
    }
}
