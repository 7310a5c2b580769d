//! Gauss rules and the Gaussian-smoothing engine used by the moment grid.

use crate::error::{Error, Result};
use crate::normal;

/// Nodes and weights of an interpolatory rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss–Hermite rule for `E[g(Z)]`, `Z ~ N(0,1)`: `sum w_k g(z_k)`, weights summing to one.
pub fn gauss_hermite(n: usize) -> Result<Rule> {
    if n == 0 {
        return Err(Error::Config("Gauss–Hermite rule needs at least one node".into()));
    }
    // Newton iteration on orthonormal physicists' Hermite functions.
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        let mut converged = false;
        for _ in 0..200 {
            let (mut p1, mut p2) = (PIM4, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-14 * z.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Config(format!("Gauss–Hermite root {i} of {n} did not converge")));
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    let sqrt_pi = std::f64::consts::PI.sqrt();
    Ok(Rule {
        nodes: x.iter().rev().map(|v| v * std::f64::consts::SQRT_2).collect(),
        weights: w.iter().rev().map(|v| v / sqrt_pi).collect(),
    })
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<Rule> {
    if n == 0 {
        return Err(Error::Config("Gauss–Legendre rule needs at least one node".into()));
    }
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    Ok(Rule { nodes: x, weights: w })
}

/// Beyond this many standard deviations the Gaussian weight is ignored.
const Z_CUT: f64 = 9.0;

/// Evaluates `E[g(x - h Z)]` for functions `g` that are constant outside a
/// window `|y| <= L w` around the origin (limits `lower` at `-inf`, `upper`
/// at `+inf`), where `w` is the width of the transition.
///
/// Smooth cases (`w >= ratio * h`) use Gauss–Hermite directly. Sharp
/// cases integrate the window with Gauss–Legendre against the normal density
/// and add the two constant tails in closed form.
#[derive(Debug, Clone)]
pub struct GaussianSmoother {
    hermite: Rule,
    legendre: Rule,
    window: f64,
    ratio: f64,
}

impl GaussianSmoother {
    pub fn new(hermite_nodes: usize, legendre_nodes: usize, window: f64, ratio: f64) -> Result<Self> {
        Ok(Self { hermite: gauss_hermite(hermite_nodes)?, legendre: gauss_legendre(legendre_nodes)?, window, ratio })
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn hermite(&self) -> &Rule {
        &self.hermite
    }

    #[inline]
    pub fn expect(&self, g: impl Fn(f64) -> f64, x: f64, h: f64, w: f64, lower: f64, upper: f64) -> f64 {
        if h == 0.0 {
            return g(x);
        }
        if w >= self.ratio * h {
            return self
                .hermite
                .nodes
                .iter()
                .zip(&self.hermite.weights)
                .map(|(z, wt)| wt * g(x - h * z))
                .sum();
        }
        let half = self.window * w / h;
        let zc = x / h;
        let (lo, hi) = (zc - half, zc + half);
        // y > L w  <=>  z < lo ;  y < -L w  <=>  z > hi
        let mut total = upper * normal::cdf(lo) + lower * normal::sf(hi);
        let (a, b) = (lo.max(-Z_CUT), hi.min(Z_CUT));
        if a < b {
            let (mid, rad) = (0.5 * (a + b), 0.5 * (b - a));
            let inner: f64 = self
                .legendre
                .nodes
                .iter()
                .zip(&self.legendre.weights)
                .map(|(u, wt)| {
                    let z = mid + rad * u;
                    wt * normal::pdf(z) * g(x - h * z)
                })
                .sum();
            total += rad * inner;
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hermite_integrates_even_moments() {
        for n in [8, 32, 64, 128] {
            let r = gauss_hermite(n).unwrap();
            let m = |k: i32| r.nodes.iter().zip(&r.weights).map(|(z, w)| w * z.powi(k)).sum::<f64>();
            assert_relative_eq!(m(0), 1.0, epsilon = 1e-13);
            assert!(m(1).abs() < 1e-13);
            assert_relative_eq!(m(2), 1.0, epsilon = 1e-12);
            assert_relative_eq!(m(4), 3.0, epsilon = 1e-11);
            assert_relative_eq!(m(8), 105.0, max_relative = 1e-11);
        }
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let r = gauss_legendre(20).unwrap();
        let m = |k: i32| r.nodes.iter().zip(&r.weights).map(|(z, w)| w * z.powi(k)).sum::<f64>();
        assert_relative_eq!(m(0), 2.0, epsilon = 1e-14);
        assert_relative_eq!(m(38), 2.0 / 39.0, epsilon = 1e-14);
    }

    /// E[Phi((x - hZ)/w)] = Phi(x / sqrt(h^2 + w^2)) for every width ratio.
    #[test]
    fn smoother_matches_convolution_identity() {
        let s = GaussianSmoother::new(32, 64, 8.0, 1.0).unwrap();
        let mut worst = 0.0f64;
        for &w in &[1.0, 0.5, 0.2, 0.05, 1e-3, 1e-6, 0.0] {
            for &h in &[1.0, 0.3, 0.01] {
                for i in -40..=40 {
                    let x = i as f64 * 0.1;
                    let g = |y: f64| if w == 0.0 { if y > 0.0 { 1.0 } else { 0.0 } } else { normal::cdf(y / w) };
                    let got = s.expect(g, x, h, w, 0.0, 1.0);
                    let exact = normal::cdf(x / (h * h + w * w).sqrt());
                    worst = worst.max((got - exact).abs());
                }
            }
        }
        assert!(worst < 1e-9, "worst error {worst}");
    }

    /// E[Phi((x - hZ)/w)^2] against the bivariate normal CDF.
    #[test]
    fn smoother_matches_bivariate_oracle() {
        let s = GaussianSmoother::new(32, 64, 8.0, 1.0).unwrap();
        let mut worst = 0.0f64;
        for &(h2, w2) in &[(0.5, 0.5), (0.9, 0.1), (0.99, 0.01), (0.1, 0.9), (0.999_9, 1e-4)] {
            let (h, w) = (f64::sqrt(h2), f64::sqrt(w2));
            for i in -30..=30 {
                let x = i as f64 * 0.1;
                let got = s.expect(|y| normal::cdf(y / w).powi(2), x, h, w, 0.0, 1.0);
                let sd = (h2 + w2).sqrt();
                let exact = normal::bivariate_cdf_diag(x / sd, h2 / (h2 + w2));
                worst = worst.max((got - exact).abs());
            }
        }
        assert!(worst < 1e-9, "worst error {worst}");
    }
}
