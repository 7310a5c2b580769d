//! Limit moments `mu_i^t(x)` on a `(t, x)` grid.
//!
//! Level 1 is `c * Phi(x / sqrt(1-t))` with `c = sigma^2 / 2`; higher levels
//! follow the bilinear recursion
//!
//! ```text
//! mu_i^t(x) = sum_{j=1}^{i-1} C(i,j) int_t^1 E[(mu_j^s mu_{i-j}^s)(x - W_{s-t})] ds
//! ```
//!
//! where `W` is a standard Brownian motion, so `W_{s-t} ~ N(0, s-t)`. The
//! levels are tabulated one after the other; each level reads only lower
//! levels. The `x = ±inf` columns follow their own one-dimensional recursion.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::normal;
use crate::quadrature::GaussianSmoother;
use crate::rng::{substream, Route};
use crate::stats::{Estimate, Moments};

/// `Phi(x / sqrt(1 - t))`.
pub fn phi_scaled(x: f64, t: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::Domain(format!("phi_scaled needs t in [0,1), got {t}")));
    }
    Ok(normal::cdf(x / (1.0 - t).sqrt()))
}

/// `mu_1^t(x) = (sigma^2 / 2) Phi(x / sqrt(1 - t))`.
pub fn mu1_t(x: f64, t: f64, sigma2: f64) -> Result<f64> {
    Ok(0.5 * sigma2 * phi_scaled(x, t)?)
}

/// `mu_1^t(x)` including the step limit at `t = 1` (value `c/2` at the jump).
fn mu1_closed(c: f64, x: f64, t: f64) -> f64 {
    if t < 1.0 {
        c * normal::cdf(x / (1.0 - t).sqrt())
    } else if x > 0.0 {
        c
    } else if x == 0.0 {
        0.5 * c
    } else {
        0.0
    }
}

/// `mu_r^t(inf) = r! c^r (1-t)^(r-1)`.
pub fn total_mass_closed_form(r: usize, t: f64, sigma2: f64) -> f64 {
    let fact: f64 = (1..=r).map(|k| k as f64).product();
    fact * (0.5 * sigma2).powi(r as i32) * (1.0 - t).powi(r as i32 - 1)
}

/// Time nodes on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TimeNodes {
    /// `t = 1 - (1 - u)^power` for `u` uniform on `intervals + 1` points.
    /// Integration uses composite Simpson in `u`, with a cubic first panel
    /// when the panel count is odd.
    Graded { intervals: usize, power: f64 },
    /// Arbitrary increasing nodes from 0 to 1; trapezoid rule in `t`.
    Custom(Vec<f64>),
}

impl TimeNodes {
    pub fn nodes(&self) -> Vec<f64> {
        match self {
            Self::Graded { intervals, power } => (0..=*intervals)
                .map(|b| {
                    if b == *intervals {
                        1.0
                    } else {
                        1.0 - (1.0 - b as f64 / *intervals as f64).powf(*power)
                    }
                })
                .collect(),
            Self::Custom(v) => v.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        let t = self.nodes();
        match self {
            Self::Graded { intervals, power } if *intervals < 2 || !(*power >= 1.0) => {
                return Err(Error::Config("graded time nodes need >= 2 intervals and power >= 1".into()))
            }
            _ => {}
        }
        if t.len() < 2 || t[0] != 0.0 || *t.last().unwrap() != 1.0 || t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("time nodes must increase strictly from 0 to 1".into()));
        }
        Ok(())
    }

    /// `weights[a][b - a]` integrates over `[t_a, 1]` from values at `t_a..=t_N`.
    fn weights(&self) -> Vec<Vec<f64>> {
        let t = self.nodes();
        let last = t.len() - 1;
        match self {
            Self::Custom(_) => (0..=last)
                .map(|a| {
                    let mut w = vec![0.0; last - a + 1];
                    for b in a..last {
                        let h = 0.5 * (t[b + 1] - t[b]);
                        w[b - a] += h;
                        w[b + 1 - a] += h;
                    }
                    w
                })
                .collect(),
            Self::Graded { intervals, power } => {
                let du = 1.0 / *intervals as f64;
                let jac = |b: usize| power * (1.0 - b as f64 * du).powf(power - 1.0);
                (0..=last)
                    .map(|a| {
                        let m = last - a;
                        let mut w = vec![0.0; m + 1];
                        let mut start = 0;
                        if m == 1 {
                            w[0] = 0.5 * du;
                            w[1] = 0.5 * du;
                        } else if m % 2 == 1 {
                            // first panel from the cubic through four nodes
                            w[0] += 9.0 / 24.0 * du;
                            w[1] += 19.0 / 24.0 * du;
                            w[2] -= 5.0 / 24.0 * du;
                            w[3] += 1.0 / 24.0 * du;
                            start = 1;
                        }
                        if m >= 2 {
                            let mut k = start;
                            while k + 2 <= m {
                                w[k] += du / 3.0;
                                w[k + 1] += 4.0 * du / 3.0;
                                w[k + 2] += du / 3.0;
                                k += 2;
                            }
                        }
                        for (k, v) in w.iter_mut().enumerate() {
                            *v *= jac(a + k);
                        }
                        w
                    })
                    .collect()
            }
        }
    }
}

/// Numerical settings for [`build_moment_grid`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureSpec {
    /// Gauss–Hermite nodes for smooth inner expectations (at least 32).
    pub hermite_nodes: usize,
    /// Gauss–Legendre nodes for the window around sharp features.
    pub legendre_nodes: usize,
    /// Half-width of the sharp-feature window in units of its width.
    pub window: f64,
    /// Feature width / smoothing scale below which the windowed rule is used.
    pub sharp_ratio: f64,
    pub time: TimeNodes,
    pub x_min: f64,
    pub x_max: f64,
    pub x_step: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            hermite_nodes: 32,
            legendre_nodes: 64,
            window: 8.0,
            sharp_ratio: 1.0,
            time: TimeNodes::Graded { intervals: 128, power: 2.0 },
            x_min: -6.0,
            x_max: 6.0,
            x_step: 0.05,
        }
    }
}

impl QuadratureSpec {
    pub fn x_nodes(&self) -> Vec<f64> {
        let count = ((self.x_max - self.x_min) / self.x_step).round() as usize;
        (0..=count).map(|k| self.x_min + k as f64 * self.x_step).collect()
    }

    /// Doubles every resolution parameter.
    pub fn refined(&self) -> Self {
        let time = match &self.time {
            TimeNodes::Graded { intervals, power } => TimeNodes::Graded { intervals: 2 * intervals, power: *power },
            TimeNodes::Custom(t) => {
                let mut v = Vec::with_capacity(2 * t.len());
                for w in t.windows(2) {
                    v.push(w[0]);
                    v.push(0.5 * (w[0] + w[1]));
                }
                v.push(1.0);
                TimeNodes::Custom(v)
            }
        };
        Self {
            hermite_nodes: 2 * self.hermite_nodes,
            legendre_nodes: 2 * self.legendre_nodes,
            time,
            x_step: 0.5 * self.x_step,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hermite_nodes < 32 {
            return Err(Error::Config(format!("need at least 32 Gauss–Hermite nodes, got {}", self.hermite_nodes)));
        }
        if self.legendre_nodes < 8 || !(self.window >= 4.0) || !(self.sharp_ratio > 0.0) {
            return Err(Error::Config("window rule needs >= 8 nodes, window >= 4, positive ratio".into()));
        }
        if !(self.x_step > 0.0 && self.x_max > self.x_min) {
            return Err(Error::Config("x grid must have positive step and width".into()));
        }
        self.time.validate()
    }
}

/// Monotone cubic (Fritsch–Carlson) interpolant.
#[derive(Debug, Clone)]
struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
    uniform: Option<(f64, f64)>,
}

impl Pchip {
    fn new(xs: &[f64], ys: Vec<f64>) -> Self {
        let n = xs.len();
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
        let mut ds = vec![0.0; n];
        if n == 2 {
            ds = vec![delta[0]; 2];
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    ds[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
                let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
                if d * d0 <= 0.0 {
                    0.0
                } else if d0 * d1 <= 0.0 && d.abs() > 3.0 * d0.abs() {
                    3.0 * d0
                } else {
                    d
                }
            };
            ds[0] = end(h[0], h[1], delta[0], delta[1]);
            ds[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        let span = xs[n - 1] - xs[0];
        let step = span / (n - 1) as f64;
        let uniform = xs
            .iter()
            .enumerate()
            .all(|(k, x)| (x - (xs[0] + k as f64 * step)).abs() <= 1e-9 * step)
            .then_some((xs[0], step));
        Self { xs: xs.to_vec(), ys, ds, uniform }
    }

    /// Evaluates at `x`, clamping to the hull. The flag reports clamping.
    #[inline]
    fn eval(&self, x: f64) -> (f64, bool) {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return (self.ys[0], x < self.xs[0]);
        }
        if x >= self.xs[n - 1] {
            return (self.ys[n - 1], x > self.xs[n - 1]);
        }
        let k = match self.uniform {
            Some((x0, dx)) => (((x - x0) / dx) as usize).min(n - 2),
            None => self.xs.partition_point(|&v| v <= x) - 1,
        };
        let h = self.xs[k + 1] - self.xs[k];
        let s = (x - self.xs[k]) / h;
        let (y0, y1) = (self.ys[k], self.ys[k + 1]);
        let (d0, d1) = (self.ds[k] * h, self.ds[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * d1;
        (v, false)
    }
}

/// Tabulated `mu_i^t(x)` for `i = 1..=r_max`.
#[derive(Debug, Serialize)]
pub struct MomentGrid {
    pub sigma2: f64,
    pub r_max: usize,
    pub t_nodes: Vec<f64>,
    pub x_nodes: Vec<f64>,
    /// `values[i-1][a][k] = mu_i^{t_a}(x_k)`
    values: Vec<Vec<Vec<f64>>>,
    /// `plus_inf[i-1][a] = mu_i^{t_a}(+inf)`
    plus_inf: Vec<Vec<f64>>,
    pub spec: QuadratureSpec,
    #[serde(skip)]
    interp: Vec<Vec<Pchip>>,
    /// Interpolation requests outside the x hull, during the build.
    pub build_clamps: u64,
    #[serde(skip)]
    query_clamps: AtomicU64,
}

/// Builds the grid with the nodes given by `spec`.
pub fn build_default_grid(sigma2: f64, r_max: usize, spec: &QuadratureSpec) -> Result<MomentGrid> {
    build_moment_grid(sigma2, r_max, &spec.time.clone(), &spec.x_nodes(), spec)
}

/// Tabulates levels `1..=r_max` by dynamic programming over levels.
pub fn build_moment_grid(
    sigma2: f64,
    r_max: usize,
    time: &TimeNodes,
    x_nodes: &[f64],
    spec: &QuadratureSpec,
) -> Result<MomentGrid> {
    if r_max == 0 {
        return Err(Error::Domain("r_max must be at least 1".into()));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Domain(format!("sigma2 must be positive, got {sigma2}")));
    }
    spec.validate()?;
    time.validate()?;
    if x_nodes.len() < 4 || x_nodes.windows(2).any(|w| w[1] <= w[0]) || x_nodes.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config("x nodes must be finite, strictly increasing, at least 4".into()));
    }
    let c = 0.5 * sigma2;
    let t = time.nodes();
    let last = t.len() - 1;
    let weights = time.weights();
    let smoother = GaussianSmoother::new(spec.hermite_nodes, spec.legendre_nodes, spec.window, spec.sharp_ratio)?;
    let binom = |i: usize, j: usize| -> f64 { (0..j).map(|m| (i - m) as f64 / (m + 1) as f64).product() };

    let mut values: Vec<Vec<Vec<f64>>> = Vec::with_capacity(r_max);
    let mut plus_inf: Vec<Vec<f64>> = Vec::with_capacity(r_max);
    values.push(t.iter().map(|&ta| x_nodes.iter().map(|&x| mu1_closed(c, x, ta)).collect()).collect());
    plus_inf.push(vec![c; t.len()]);
    let mut clamps = 0u64;

    for i in 2..=r_max {
        // P_i^{s_b}(+inf) and, for i >= 3, P_i^{s_b} on the x grid.
        let p_inf: Vec<f64> = (0..=last)
            .map(|b| (1..i).map(|j| binom(i, j) * plus_inf[j - 1][b] * plus_inf[i - j - 1][b]).sum())
            .collect();
        let p_tab: Vec<Option<Pchip>> = if i == 2 {
            Vec::new()
        } else {
            (0..=last)
                .map(|b| {
                    (t[b] < 1.0).then(|| {
                        let ys = (0..x_nodes.len())
                            .map(|k| (1..i).map(|j| binom(i, j) * values[j - 1][b][k] * values[i - j - 1][b][k]).sum())
                            .collect();
                        Pchip::new(x_nodes, ys)
                    })
                })
                .collect()
        };

        let row = |a: usize| -> (Vec<f64>, u64) {
            let ta = t[a];
            let w = &weights[a];
            let mut local_clamps = 0u64;
            let out = x_nodes
                .iter()
                .map(|&x| {
                    let mut acc = 0.0;
                    for (k, wk) in w.iter().enumerate() {
                        let b = a + k;
                        let s = t[b];
                        let h = (s - ta).max(0.0).sqrt();
                        let width = (1.0 - s).max(0.0).sqrt();
                        let e = if i == 2 {
                            let g = |y: f64| {
                                let m = mu1_closed(c, y, s);
                                2.0 * m * m
                            };
                            smoother.expect(g, x, h, width, 0.0, p_inf[b])
                        } else {
                            match &p_tab[b] {
                                // every product term carries a level >= 2 factor, which vanishes at s = 1
                                None => 0.0,
                                Some(p) => {
                                    let g = |y: f64| p.eval(y).0;
                                    if h > 0.0 {
                                        local_clamps += count_outside(p, x, h, width, &smoother);
                                    }
                                    smoother.expect(g, x, h, width, 0.0, p_inf[b])
                                }
                            }
                        };
                        acc += wk * e;
                    }
                    acc
                })
                .collect();
            (out, local_clamps)
        };

        let rows: Vec<(Vec<f64>, u64)> = par_map(0..=last, row);
        let mut level = Vec::with_capacity(rows.len());
        for (r, k) in rows {
            level.push(r);
            clamps += k;
        }
        let inf_col: Vec<f64> = (0..=last).map(|a| weights[a].iter().enumerate().map(|(k, wk)| wk * p_inf[a + k]).sum()).collect();
        values.push(level);
        plus_inf.push(inf_col);
    }

    let interp = values
        .iter()
        .map(|lvl| lvl.iter().map(|row| Pchip::new(x_nodes, row.clone())).collect())
        .collect();
    let grid = MomentGrid {
        sigma2,
        r_max,
        t_nodes: t,
        x_nodes: x_nodes.to_vec(),
        values,
        plus_inf,
        spec: spec.clone(),
        interp,
        build_clamps: clamps,
        query_clamps: AtomicU64::new(0),
    };
    grid.check_monotone()?;
    Ok(grid)
}

/// Number of smooth-rule evaluation points of `E[g(x - hZ)]` outside the table hull.
fn count_outside(p: &Pchip, x: f64, h: f64, width: f64, s: &GaussianSmoother) -> u64 {
    if width < s.ratio() * h {
        return 0;
    }
    let (lo, hi) = (p.xs[0], p.xs[p.xs.len() - 1]);
    s.hermite().nodes.iter().filter(|z| {
        let y = x - h * *z;
        y < lo || y > hi
    }).count() as u64
}

fn par_map<T: Send>(range: std::ops::RangeInclusive<usize>, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        range.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        range.map(f).collect()
    }
}

impl MomentGrid {
    fn check_monotone(&self) -> Result<()> {
        for (li, lvl) in self.values.iter().enumerate() {
            for (a, row) in lvl.iter().enumerate() {
                let tol = 1e-8 * self.plus_inf[li][a].max(1e-300);
                if let Some(k) = row.windows(2).position(|w| w[1] < w[0] - tol) {
                    return Err(Error::Integrity(format!(
                        "level {} not monotone in x at t={}, x={}",
                        li + 1,
                        self.t_nodes[a],
                        self.x_nodes[k]
                    )));
                }
                if row.last().copied().unwrap_or(0.0) > self.plus_inf[li][a] + tol.max(1e-12) {
                    return Err(Error::Integrity(format!("level {} exceeds its total mass at t={}", li + 1, self.t_nodes[a])));
                }
            }
            if li >= 1 && self.plus_inf[li].windows(2).any(|w| w[1] > w[0] + 1e-12) {
                return Err(Error::Integrity(format!("total mass of level {} increases in t", li + 1)));
            }
        }
        Ok(())
    }

    /// `mu_i^{t_a}(x_k)` at grid nodes.
    pub fn node_values(&self, i: usize, a: usize) -> &[f64] {
        &self.values[i - 1][a]
    }

    pub fn plus_inf(&self, i: usize, a: usize) -> f64 {
        self.plus_inf[i - 1][a]
    }

    /// `mu_i^t(x)`: monotone cubic in `x`, linear in `t`. Queries outside
    /// the x hull are clamped and counted.
    pub fn value(&self, i: usize, t: f64, x: f64) -> Result<f64> {
        if i == 0 || i > self.r_max {
            return Err(Error::Domain(format!("moment order {i} outside 1..={}", self.r_max)));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("t = {t} outside [0, 1]")));
        }
        let a = self.t_nodes.partition_point(|&v| v <= t).saturating_sub(1).min(self.t_nodes.len() - 2);
        let (t0, t1) = (self.t_nodes[a], self.t_nodes[a + 1]);
        let lam = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let at = |row: usize| -> f64 {
            if x == f64::INFINITY {
                self.plus_inf[i - 1][row]
            } else if x == f64::NEG_INFINITY {
                0.0
            } else {
                let (v, clamped) = self.interp[i - 1][row].eval(x);
                if clamped {
                    self.query_clamps.fetch_add(1, Ordering::Relaxed);
                }
                v
            }
        };
        Ok(if lam == 0.0 { at(a) } else if lam == 1.0 { at(a + 1) } else { (1.0 - lam) * at(a) + lam * at(a + 1) })
    }

    /// `mu_r(x) = mu_r^0(x)`.
    pub fn mu(&self, r: usize, x: f64) -> Result<f64> {
        self.value(r, 0.0, x)
    }

    pub fn query_clamps(&self) -> u64 {
        self.query_clamps.load(Ordering::Relaxed)
    }

    /// Largest `|mu_i^t(inf) - i! c^i (1-t)^(i-1)|` over all levels and time nodes.
    pub fn closed_form_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 1..=self.r_max {
            for (a, &t) in self.t_nodes.iter().enumerate() {
                worst = worst.max((self.plus_inf[i - 1][a] - total_mass_closed_form(i, t, self.sigma2)).abs());
            }
        }
        worst
    }

    /// CSV `i,t,x,mu`, including the `x=-inf` and `x=inf` columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,t,x,mu\n");
        for i in 1..=self.r_max {
            for (a, t) in self.t_nodes.iter().enumerate() {
                out.push_str(&format!("{i},{t},-inf,0\n"));
                for (k, x) in self.x_nodes.iter().enumerate() {
                    out.push_str(&format!("{i},{t},{x},{}\n", self.values[i - 1][a][k]));
                }
                out.push_str(&format!("{i},{t},inf,{}\n", self.plus_inf[i - 1][a]));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarlemanRow {
    pub r: usize,
    /// `mu_{2r}(inf)`
    pub total_mass: f64,
    /// `mu_{2r}(inf)^(1/2r) / 2r`
    pub ratio: f64,
    /// `max_x mu_{2r}(x) - mu_{2r}(inf)` over the grid
    pub max_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarlemanReport {
    pub rows: Vec<CarlemanRow>,
}

/// Checks `mu_{2r}(x) <= mu_{2r}(inf)` and reports the growth sequence.
pub fn carleman_diagnostic(grid: &MomentGrid) -> Result<CarlemanReport> {
    if grid.r_max < 4 || grid.r_max % 2 == 1 {
        return Err(Error::Domain(format!("Carleman diagnostic needs an even r_max >= 4, got {}", grid.r_max)));
    }
    let mut rows = Vec::new();
    for r in 1..=grid.r_max / 2 {
        let m = 2 * r;
        let total = grid.plus_inf(m, 0);
        let mut max_excess = f64::NEG_INFINITY;
        for (k, v) in grid.node_values(m, 0).iter().enumerate() {
            let excess = v - total;
            if excess > 1e-6 {
                return Err(Error::Integrity(format!(
                    "mu_{m}(x) exceeds its total mass at x = {}",
                    grid.x_nodes[k]
                )));
            }
            max_excess = max_excess.max(excess);
        }
        rows.push(CarlemanRow { r, total_mass: total, ratio: total.powf(1.0 / m as f64) / m as f64, max_excess });
    }
    Ok(CarlemanReport { rows })
}

/// Monte Carlo value of
/// `mu_2(x) = 2 c^2 int_0^1 E[Phi((x - B_t) / sqrt(1-t))^2] dt`
/// from independent `(t, B_t)` draws.
pub fn brownian_oracle_mu2(x: f64, sigma2: f64, draws: u64, seed: u64) -> Estimate {
    let c = 0.5 * sigma2;
    const CHUNK: u64 = 1 << 16;
    let chunks = draws.div_ceil(CHUNK);
    let parts: Vec<Moments> = par_map(0..=(chunks as usize).saturating_sub(1), |ch| {
        let mut rng = substream(seed, Route::BrownianOracle, ch as u64);
        let mut acc = Moments::default();
        let count = CHUNK.min(draws - ch as u64 * CHUNK);
        for _ in 0..count {
            let t: f64 = rng.random();
            let z: f64 = rng.sample(StandardNormal);
            let p = normal::cdf((x - t.sqrt() * z) / (1.0 - t).sqrt());
            acc.push(2.0 * c * c * p * p);
        }
        acc
    });
    let mut total = Moments::default();
    for p in &parts {
        total.merge(p);
    }
    total.estimate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn coarse() -> QuadratureSpec {
        QuadratureSpec { time: TimeNodes::Graded { intervals: 48, power: 2.0 }, x_step: 0.1, ..Default::default() }
    }

    #[test]
    fn phi_and_mu1_examples() {
        assert_eq!(phi_scaled(0.0, 0.3).unwrap(), 0.5);
        assert_eq!(phi_scaled(f64::INFINITY, 0.3).unwrap(), 1.0);
        assert_relative_eq!(phi_scaled(1.0, 0.75).unwrap(), 0.977_249_868_051_820_8, epsilon = 1e-14);
        assert!(phi_scaled(0.0, 1.0).is_err());
        assert_eq!(mu1_t(0.0, 0.0, 2.0).unwrap(), 0.5);
        assert_eq!(mu1_t(f64::INFINITY, 0.9, 2.0).unwrap(), 1.0);
        assert_eq!(mu1_t(0.0, 0.0, 4.0).unwrap(), 1.0);
    }

    #[test]
    fn graded_weights_integrate_exactly() {
        for intervals in [4, 5, 17] {
            let tn = TimeNodes::Graded { intervals, power: 2.0 };
            let t = tn.nodes();
            let w = tn.weights();
            // cubic in u: exact except on the single trapezoid panel next to t = 1
            for (a, ta) in t.iter().enumerate() {
                let got: f64 = w[a].iter().enumerate().map(|(k, wk)| wk * (1.0 - t[a + k])).sum();
                let tol = if a + 1 == intervals { (intervals as f64).powi(-3) } else { 1e-14 };
                assert_relative_eq!(got, 0.5 * (1.0 - ta).powi(2), epsilon = tol);
            }
        }
    }

    #[test]
    fn level_one_only() {
        let g = build_default_grid(2.0, 1, &coarse()).unwrap();
        assert_eq!(g.mu(1, 0.0).unwrap(), 0.5);
        assert_relative_eq!(g.mu(1, 1.0).unwrap(), normal::cdf(1.0), epsilon = 1e-15);
        assert_eq!(g.mu(1, f64::NEG_INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn anchors_and_self_similarity() {
        let g = build_default_grid(2.0, 4, &coarse()).unwrap();
        assert!(g.closed_form_error() < 1e-3, "{}", g.closed_form_error());
        assert_relative_eq!(g.mu(2, f64::INFINITY).unwrap(), 2.0, epsilon = 1e-9);
        assert_relative_eq!(g.value(3, 0.5, f64::INFINITY).unwrap(), 1.5, epsilon = 1e-3);
        // mu_i^t(x) = (1-t)^(i-1) mu_i(x / sqrt(1-t)) for sigma^2 = 2.
        for i in 2..=4 {
            let a = g.t_nodes.iter().position(|&t| t >= 0.5).unwrap();
            let t = g.t_nodes[a];
            for x in [-1.0, -0.3, 0.0, 0.4, 1.0] {
                let lhs = g.value(i, t, x).unwrap();
                let rhs = (1.0 - t).powi(i as i32 - 1) * g.mu(i, x / (1.0 - t).sqrt()).unwrap();
                assert!((lhs - rhs).abs() < 2e-4 * (1.0 + rhs), "i={i} x={x}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn homogeneity_in_sigma2() {
        let a = build_default_grid(2.0, 3, &coarse()).unwrap();
        let b = build_default_grid(3.0, 3, &coarse()).unwrap();
        for i in 1..=3 {
            for x in [-2.0, 0.0, 0.7] {
                let scale = 1.5f64.powi(i as i32);
                assert_relative_eq!(b.mu(i, x).unwrap(), scale * a.mu(i, x).unwrap(), max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn carleman_requires_even_order() {
        let g = build_default_grid(2.0, 3, &coarse()).unwrap();
        assert!(carleman_diagnostic(&g).is_err());
        let g = build_default_grid(2.0, 4, &coarse()).unwrap();
        let rep = carleman_diagnostic(&g).unwrap();
        assert_relative_eq!(rep.rows[0].ratio, 2f64.sqrt() / 2.0, epsilon = 1e-6);
        assert_relative_eq!(rep.rows[1].ratio, 24f64.powf(0.25) / 4.0, epsilon = 1e-4);
        assert!(g.mu(2, -6.0).unwrap() <= g.mu(2, f64::INFINITY).unwrap());
    }

    #[test]
    fn rejects_bad_settings() {
        let spec = QuadratureSpec { hermite_nodes: 16, ..coarse() };
        assert!(matches!(build_default_grid(2.0, 2, &spec), Err(Error::Config(_))));
        assert!(build_default_grid(2.0, 0, &coarse()).is_err());
    }
}
