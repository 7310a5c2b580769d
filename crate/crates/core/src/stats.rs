//! Small statistics toolkit: moment accumulation, KS and chi-square tests.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Mean and standard error of `f(y)` over a sample.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl Estimate {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let mut acc = Moments::default();
        for v in values {
            acc.push(v);
        }
        acc.estimate()
    }

    /// `|mean - target| / stderr`; infinite when the error is positive but stderr vanishes.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }
}

/// Running sums with pairwise-mergeable state (Chan et al. update).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        let d = v - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (v - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn estimate(&self) -> Estimate {
        let n = self.count as f64;
        let var = if self.count > 1 { self.m2 / (n - 1.0) } else { 0.0 };
        Estimate { mean: self.mean, stderr: (var / n).sqrt(), count: self.count }
    }
}

/// Empirical `E[y^r]` with a delete-one jackknife standard error.
///
/// For a sample mean the jackknife reproduces the usual `s/sqrt(n)`, so it is
/// computed in closed form rather than by `n` deletions.
pub fn jackknife_moment(sample: &[f64], r: i32) -> Estimate {
    let n = sample.len();
    let total: f64 = sample.iter().map(|y| y.powi(r)).sum();
    let mean = total / n as f64;
    if n < 2 {
        return Estimate { mean, stderr: f64::NAN, count: n };
    }
    let nf = n as f64;
    let ss: f64 = sample
        .iter()
        .map(|y| {
            let loo = (total - y.powi(r)) / (nf - 1.0);
            (loo - mean).powi(2)
        })
        .sum();
    Estimate { mean, stderr: ((nf - 1.0) / nf * ss).sqrt(), count: n }
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.3 {
        // The alternating series converges slowly here; use the theta-function form.
        let s: f64 = (1..=20)
            .map(|k| {
                let k = (2 * k - 1) as f64;
                (-(k * std::f64::consts::PI).powi(2) / (8.0 * lambda * lambda)).exp()
            })
            .sum();
        return 1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

fn ks_p_value(d: f64, ne: f64) -> f64 {
    let sq = ne.sqrt();
    kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)
}

/// One-sample KS test against a continuous CDF.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let mut xs = sample.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in xs.iter().enumerate() {
        let f = cdf(*x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    KsResult { statistic: d, p_value: ks_p_value(d, n) }
}

/// Two-sample KS test. Ties are handled by stepping over equal values together.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    ys.sort_unstable_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    KsResult { statistic: d, p_value: ks_p_value(d, n * m / (n + m)) }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub bins: usize,
}

/// Chi-square test that two count vectors come from the same distribution.
///
/// Adjacent bins are pooled from the left until every pooled bin has an
/// expected count of at least `min_expected` on both sides; any remainder
/// joins the last pooled bin.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64], min_expected: f64) -> ChiSquareResult {
    let len = a.len().max(b.len());
    let get = |v: &[u64], i: usize| v.get(i).copied().unwrap_or(0) as f64;
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let total = na + nb;
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut ca, mut cb) = (0.0, 0.0);
    for i in 0..len {
        ca += get(a, i);
        cb += get(b, i);
        let col = ca + cb;
        if col * na.min(nb) / total >= min_expected {
            pooled.push((ca, cb));
            ca = 0.0;
            cb = 0.0;
        }
    }
    if ca + cb > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += ca;
                last.1 += cb;
            }
            None => pooled.push((ca, cb)),
        }
    }
    let mut stat = 0.0;
    for &(x, y) in &pooled {
        let col = x + y;
        let ea = col * na / total;
        let eb = col * nb / total;
        stat += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    let dof = pooled.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).map(|d| d.sf(stat)).unwrap_or(f64::NAN)
    };
    ChiSquareResult { statistic: stat, dof, p_value, bins: pooled.len() }
}
