//! Standard normal distribution helpers.

use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use crate::quadrature::{gauss_legendre, Rule};

/// Standard normal CDF. Accepts `±inf`.
pub fn cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * erfc(-x * FRAC_1_SQRT_2)
    }
}

/// Upper tail `1 - cdf(x)` without cancellation.
pub fn sf(x: f64) -> f64 {
    cdf(-x)
}

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `P(X <= x, Y <= x)` for standard normals with correlation `rho in [0, 1]`.
///
/// Uses Plackett's identity `d/drho Phi_2 = phi_2`; the substitution
/// `rho = sin(theta)` removes the endpoint singularity at `rho = 1`, leaving
/// a smooth one-dimensional integral.
pub fn bivariate_cdf_diag(x: f64, rho: f64) -> f64 {
    static RULE: OnceLock<Rule> = OnceLock::new();
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    let rule = RULE.get_or_init(|| gauss_legendre(48).expect("fixed rule"));
    let top = rho.clamp(0.0, 1.0).asin();
    let half = 0.5 * top;
    let integral: f64 = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(u, w)| w * (-x * x / (1.0 + (half * (1.0 + u)).sin())).exp())
        .sum::<f64>()
        * half;
    cdf(x).powi(2) + integral / (2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert_eq!(cdf(0.0), 0.5);
        assert!((cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((cdf(2.0) - 0.977_249_868_051_820_8).abs() < 1e-15);
        assert!((sf(8.0) - 6.220_960_574_271_785e-16).abs() < 1e-28);
        assert_eq!(cdf(f64::INFINITY), 1.0);
        assert_eq!(cdf(f64::NEG_INFINITY), 0.0);
    }

    #[test]
    fn bivariate_diagonal_edges() {
        assert!((bivariate_cdf_diag(0.0, 0.5) - 1.0 / 3.0).abs() < 1e-14);
        assert!((bivariate_cdf_diag(0.7, 0.0) - cdf(0.7).powi(2)).abs() < 1e-15);
        assert!((bivariate_cdf_diag(0.7, 1.0) - cdf(0.7)).abs() < 1e-13);
        assert!((bivariate_cdf_diag(-1.3, 1.0) - cdf(-1.3)).abs() < 1e-13);
    }
}
