//! Exact finite-`n` first and second moments of the occupation count through
//! one and two spines, and the law of the two-spine split time.

use rand::Rng;
use serde::Serialize;

use crate::displacement::{rademacher_pmf, DisplacementLaw};
use crate::error::{Error, Result};
use crate::normal;
use crate::offspring::{ExtinctionTable, OffspringLaw};
use crate::quadrature::GaussianSmoother;
use crate::rng::{substream, Route};
use crate::stats::Moments;

/// Fewest random-walk paths accepted for the Monte Carlo fallback.
pub const MIN_FALLBACK_PATHS: u64 = 1_000_000;
const IDENTITY_TOL: f64 = 1e-9;

/// Law of the first generation at which two spines part.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitTimeLaw {
    pub n: usize,
    /// `tail[i] = P(T > i) = prod_{k<=i} m_1(k) / m_2(k)`
    pub tail: Vec<f64>,
    /// `pmf[i] = P(T = i)` for `1 <= i <= n`; `pmf[0] = 0`.
    pub pmf: Vec<f64>,
}

/// `(m_1(k), m_2(k))` for `k = 1..=n`.
fn reduced_moment_pairs(table: &ExtinctionTable, sigma2: f64, n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|k| {
            let (qa, qb) = (table.q(n - k), table.q(n - k + 1));
            let m1 = qa / qb;
            (m1, qa * qa / qb * sigma2 + m1)
        })
        .collect()
}

/// Builds the split-time law and checks the identities that tie it to the
/// survival probabilities.
pub fn split_time_law(law: &OffspringLaw, n: usize) -> Result<SplitTimeLaw> {
    if n == 0 {
        return Err(Error::Domain("horizon must be at least 1".into()));
    }
    let table = law.extinction_table(n)?;
    let sigma2 = law.sigma2();
    let m = reduced_moment_pairs(&table, sigma2, n);
    let mut tail = Vec::with_capacity(n + 1);
    tail.push(1.0);
    for (m1, m2) in &m {
        let last = *tail.last().unwrap();
        tail.push(last * m1 / m2);
    }
    let mut pmf = vec![0.0; n + 1];
    for i in 1..=n {
        pmf[i] = tail[i - 1] * (1.0 - m[i - 1].0 / m[i - 1].1);
        let diff = tail[i - 1] - tail[i];
        if (pmf[i] - diff).abs() > 1e-12 {
            return Err(Error::Integrity(format!("split-time pmf at {i}: {} vs {}", pmf[i], diff)));
        }
    }
    let qn = table.q(n);
    let close = |a: f64, b: f64| (a - b).abs() <= IDENTITY_TOL * b.abs();
    // prod m_2 * P(T > n) = 1 / q[n]
    let log_m2: Vec<f64> = m.iter().map(|(_, m2)| m2.ln()).collect();
    let full: f64 = log_m2.iter().sum();
    if !close(full.exp() * tail[n], 1.0 / qn) {
        return Err(Error::Integrity("prod m_2 * P(T > n) != 1/q[n]".into()));
    }
    // prod_{k<=j} m_2 * prod_{k>j} m_1^2 * P(T = j) = sigma^2 / q[n]
    let log_m1: Vec<f64> = m.iter().map(|(m1, _)| m1.ln()).collect();
    let mut head = 0.0;
    let mut rest: f64 = 2.0 * log_m1.iter().sum::<f64>();
    for j in 1..=n {
        head += log_m2[j - 1];
        rest -= 2.0 * log_m1[j - 1];
        let lhs = (head + rest).exp() * pmf[j];
        if !close(lhs, sigma2 / qn) {
            return Err(Error::Integrity(format!("split-time identity fails at j = {j}: {lhs} vs {}", sigma2 / qn)));
        }
    }
    Ok(SplitTimeLaw { n, tail, pmf })
}

/// A spine-formula value. `stderr` is zero for exact evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpineValue {
    pub value: f64,
    pub stderr: f64,
    pub exact: bool,
}

/// Random-walk Monte Carlo used when the step law has no exact CDF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloFallback {
    pub paths: u64,
    pub seed: u64,
}

impl MonteCarloFallback {
    fn check(&self) -> Result<()> {
        if self.paths < MIN_FALLBACK_PATHS {
            return Err(Error::Config(format!(
                "Monte Carlo fallback needs at least {MIN_FALLBACK_PATHS} paths, got {}",
                self.paths
            )));
        }
        Ok(())
    }
}

fn no_cdf(nu: DisplacementLaw) -> Error {
    Error::Config(format!("step law '{nu}' has no exact n-step CDF and the Monte Carlo fallback is disabled"))
}

/// `E[Z^(n)(-inf, sqrt(n) x] / n | Z_n > 0] = P(S_n <= sqrt(n) x) / (n q[n])`.
pub fn many_to_one_moment(
    law: &OffspringLaw,
    nu: DisplacementLaw,
    n: usize,
    x: f64,
    fallback: Option<MonteCarloFallback>,
) -> Result<SpineValue> {
    if n == 0 {
        return Err(Error::Domain("horizon must be at least 1".into()));
    }
    let scale = 1.0 / (n as f64 * law.extinction_table(n)?.q(n));
    let exact = |p: f64| Ok(SpineValue { value: p * scale, stderr: 0.0, exact: true });
    if x == f64::NEG_INFINITY {
        return exact(0.0);
    }
    if x == f64::INFINITY {
        return exact(1.0);
    }
    let c = (n as f64).sqrt() * x;
    if let Some(p) = nu.n_step_cdf(n, c) {
        return exact(p);
    }
    let mc = fallback.ok_or_else(|| no_cdf(nu))?;
    mc.check()?;
    let est = mc_chunks(mc, |rng, acc| {
        let s = nu.sample_sum(n, rng);
        acc.push(if s <= c { 1.0 } else { 0.0 });
    });
    Ok(SpineValue { value: est.0 * scale, stderr: est.1 * scale, exact: false })
}

/// `E[(Z^(n)(-inf, sqrt(n) x] / n)^2 | Z_n > 0]`.
///
/// Pairs of distinct individuals share a trunk of `j` steps, `j = 0..n`,
/// and then walk `n - j` steps independently; the sum over `j` is evaluated
/// term by term. Normal steps use
/// Gaussian quadrature (windowed where the inner CDF is sharp), Rademacher
/// steps an exact lattice sum, others the Monte Carlo fallback.
pub fn many_to_two_moment(
    law: &OffspringLaw,
    nu: DisplacementLaw,
    n: usize,
    x: f64,
    hermite_nodes: usize,
    fallback: Option<MonteCarloFallback>,
) -> Result<SpineValue> {
    if hermite_nodes < 8 {
        return Err(Error::Config(format!("need at least 8 quadrature nodes, got {hermite_nodes}")));
    }
    if n == 0 {
        return Err(Error::Domain("horizon must be at least 1".into()));
    }
    let qn = law.extinction_table(n)?.q(n);
    let nf = n as f64;
    let first_scale = 1.0 / (nf * nf * qn);
    let pair_scale = law.sigma2() / (nf * nf * qn);
    let exact = |p1: f64, pairs: f64| Ok(SpineValue { value: p1 * first_scale + pairs * pair_scale, stderr: 0.0, exact: true });
    if x == f64::NEG_INFINITY {
        return exact(0.0, 0.0);
    }
    if x == f64::INFINITY {
        return exact(1.0, nf);
    }
    let c = nf.sqrt() * x;
    match nu {
        DisplacementLaw::Normal => {
            let smoother = GaussianSmoother::new(hermite_nodes, 2 * hermite_nodes.max(32), 8.0, 1.0)?;
            let p1 = normal::cdf(x);
            let mut pairs = p1 * p1; // j = 0: independent full walks
            for j in 1..n {
                let w = ((n - j) as f64).sqrt();
                let g = |y: f64| normal::cdf(y / w).powi(2);
                pairs += smoother.expect(g, c, (j as f64).sqrt(), w, 0.0, 1.0);
            }
            exact(p1, pairs)
        }
        DisplacementLaw::Rademacher => {
            // cdfs[m][b] = P(S_m <= 2b - m)
            let cdf_at = |m: usize, y: f64| -> f64 {
                let bmax = ((y + m as f64) / 2.0).floor();
                if bmax < 0.0 {
                    0.0
                } else if bmax >= m as f64 {
                    1.0
                } else {
                    rademacher_pmf(m)[..=bmax as usize].iter().sum()
                }
            };
            let p1 = cdf_at(n, c);
            let mut pairs = 0.0;
            for j in 0..n {
                let rest = n - j;
                let mut cum = Vec::with_capacity(rest + 1);
                let mut acc = 0.0;
                for p in rademacher_pmf(rest) {
                    acc += p;
                    cum.push(acc);
                }
                let tail_cdf = |y: f64| {
                    let bmax = ((y + rest as f64) / 2.0).floor();
                    if bmax < 0.0 {
                        0.0
                    } else if bmax >= rest as f64 {
                        1.0
                    } else {
                        cum[bmax as usize]
                    }
                };
                pairs += rademacher_pmf(j)
                    .iter()
                    .enumerate()
                    .map(|(b, p)| p * tail_cdf(c - (2.0 * b as f64 - j as f64)).powi(2))
                    .sum::<f64>();
            }
            exact(p1, pairs)
        }
        DisplacementLaw::Uniform => {
            let mc = fallback.ok_or_else(|| no_cdf(nu))?;
            mc.check()?;
            // Each path: one uniform split generation J, a shared trunk of J
            // steps and two independent continuations. The pair sum is n E[...].
            let first = mc_chunks(mc, |rng, acc| {
                acc.push(if nu.sample_sum(n, rng) <= c { 1.0 } else { 0.0 });
            });
            let pair = mc_chunks(MonteCarloFallback { seed: mc.seed ^ 0x5EED, ..mc }, |rng, acc| {
                let j = rng.random_range(0..n);
                let trunk = nu.sample_sum(j, rng);
                let a = trunk + nu.sample_sum(n - j, rng) <= c;
                let b = trunk + nu.sample_sum(n - j, rng) <= c;
                acc.push(if a && b { nf } else { 0.0 });
            });
            Ok(SpineValue {
                value: first.0 * first_scale + pair.0 * pair_scale,
                stderr: (first.1 * first_scale).hypot(pair.1 * pair_scale),
                exact: false,
            })
        }
    }
}

/// Mean and standard error of a per-path statistic over `mc.paths` paths,
/// in fixed chunks so the result is independent of the worker count.
fn mc_chunks(mc: MonteCarloFallback, path: impl Fn(&mut rand_chacha::ChaCha8Rng, &mut Moments) + Sync) -> (f64, f64) {
    const CHUNK: u64 = 1 << 16;
    let chunks = mc.paths.div_ceil(CHUNK);
    let run = |ch: u64| {
        let mut rng = substream(mc.seed, Route::SpineWalk, ch);
        let mut acc = Moments::default();
        for _ in 0..CHUNK.min(mc.paths - ch * CHUNK) {
            path(&mut rng, &mut acc);
        }
        acc
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<Moments> = {
        use rayon::prelude::*;
        (0..chunks).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Moments> = (0..chunks).map(run).collect();
    let mut total = Moments::default();
    for p in &parts {
        total.merge(p);
    }
    let e = total.estimate();
    (e.mean, e.stderr)
}
