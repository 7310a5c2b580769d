//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export is a thin wrapper around a plain function so the numerics can
//! be tested natively.

use brw_core::harness::run_conditioned;
use brw_core::moments::{build_default_grid, QuadratureSpec, TimeNodes};
use brw_core::{DisplacementLaw, OffspringLaw, Result};
use wasm_bindgen::prelude::*;

/// Coarse grid: fine enough for plotting, fast enough for a page.
fn demo_spec() -> QuadratureSpec {
    QuadratureSpec { time: TimeNodes::Graded { intervals: 32, power: 2.0 }, x_step: 0.1, ..QuadratureSpec::default() }
}

/// `k q[k] sigma^2 / 2` for `k = 0..=n`.
pub fn scaled_survival(law: &str, n: usize) -> Result<Vec<f64>> {
    let law = OffspringLaw::parse(law)?;
    let table = law.extinction_table(n)?;
    Ok((0..=n).map(|k| table.kolmogorov_ratio(k, law.sigma2())).collect())
}

/// One value of `Z^(n)(-inf, sqrt(n) x] / n` per conditioned replication.
pub fn occupation_values(law: &str, nu: &str, n: usize, reps: u32, seed: u64, x: f64) -> Result<Vec<f64>> {
    let law = OffspringLaw::parse(law)?;
    let nu: DisplacementLaw = nu.parse()?;
    let run = run_conditioned(&law, nu, n, &[x], reps.into(), seed, 1, 1_000_000, false)?;
    Ok(run.column(0))
}

/// `mu_r(x)` for the limit with `sigma^2 = 2`, at `points` evenly spaced `x` in `[lo, hi]`.
pub fn limit_moment(r: usize, lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    let grid = build_default_grid(2.0, r, &demo_spec())?;
    let step = if points > 1 { (hi - lo) / (points - 1) as f64 } else { 0.0 };
    (0..points).map(|i| grid.mu(r, lo + step * i as f64)).collect()
}

fn js(r: Result<Vec<f64>>) -> std::result::Result<Vec<f64>, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = scaledSurvival)]
pub fn scaled_survival_js(law: &str, n: usize) -> std::result::Result<Vec<f64>, JsError> {
    js(scaled_survival(law, n))
}

#[wasm_bindgen(js_name = occupationValues)]
pub fn occupation_values_js(law: &str, nu: &str, n: usize, reps: u32, seed: u32, x: f64) -> std::result::Result<Vec<f64>, JsError> {
    js(occupation_values(law, nu, n, reps, seed.into(), x))
}

#[wasm_bindgen(js_name = limitMoment)]
pub fn limit_moment_js(r: usize, lo: f64, hi: f64, points: usize) -> std::result::Result<Vec<f64>, JsError> {
    js(limit_moment(r, lo, hi, points))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn survival_curve_for_geometric_law() {
        let v = scaled_survival("geometric:0.5", 100).unwrap();
        assert_eq!(v.len(), 101);
        assert!((v[100] - 100.0 / 101.0).abs() < 1e-12);
        assert!(scaled_survival("pmf:1.0", 3).is_err());
    }

    #[test]
    fn occupation_values_are_rescaled_counts() {
        let v = occupation_values("binary", "rademacher", 10, 200, 1, f64::INFINITY).unwrap();
        assert_eq!(v.len(), 200);
        assert!(v.iter().all(|&z| z >= 0.1 && (z * 10.0).fract() == 0.0));
        assert!(occupation_values("binary", "cauchy", 10, 5, 1, 0.0).is_err());
    }

    #[test]
    fn first_limit_moment_is_normal_cdf() {
        let v = limit_moment(1, -1.0, 1.0, 3).unwrap();
        assert!((v[1] - 0.5).abs() < 1e-12);
        assert!((v[0] + v[2] - 1.0).abs() < 1e-9);
    }
}
