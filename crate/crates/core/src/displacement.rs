//! Step laws for the spatial motion: mean zero, variance one.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::normal;

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisplacementLaw {
    Normal,
    /// `±1` with probability 1/2 each.
    Rademacher,
    /// Uniform on `[-sqrt 3, sqrt 3]`.
    Uniform,
}

impl DisplacementLaw {
    pub const ALL: [DisplacementLaw; 3] = [Self::Normal, Self::Rademacher, Self::Uniform];

    pub fn name(self) -> &'static str {
        match self {
            Self::Normal => "normal",
            Self::Rademacher => "rademacher",
            Self::Uniform => "uniform",
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Self::Normal => rng.sample(StandardNormal),
            Self::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Self::Uniform => SQRT3 * (2.0 * rng.random::<f64>() - 1.0),
        }
    }

    /// Sum of `k` independent steps. Normal steps are drawn in one go.
    #[inline]
    pub fn sample_sum<R: Rng + ?Sized>(self, k: usize, rng: &mut R) -> f64 {
        match (self, k) {
            (_, 0) => 0.0,
            (Self::Normal, _) => (k as f64).sqrt() * rng.sample::<f64, _>(StandardNormal),
            _ => (0..k).map(|_| self.sample(rng)).sum(),
        }
    }

    /// Exact CDF of the sum of `n` steps, where one is available.
    pub fn n_step_cdf(self, n: usize, y: f64) -> Option<f64> {
        match self {
            Self::Normal => Some(if n == 0 {
                if y >= 0.0 { 1.0 } else { 0.0 }
            } else {
                normal::cdf(y / (n as f64).sqrt())
            }),
            Self::Rademacher => Some(rademacher_cdf(n, y)),
            Self::Uniform => None,
        }
    }

    pub fn has_exact_cdf(self) -> bool {
        self.n_step_cdf(1, 0.0).is_some()
    }
}

/// `P(S_n <= y)` for a simple ±1 walk: `S_n = 2B - n`, `B ~ Bin(n, 1/2)`.
fn rademacher_cdf(n: usize, y: f64) -> f64 {
    if y == f64::INFINITY {
        return 1.0;
    }
    let bmax = ((y + n as f64) / 2.0).floor();
    if bmax < 0.0 {
        return 0.0;
    }
    if bmax >= n as f64 {
        return 1.0;
    }
    rademacher_pmf(n)[..=bmax as usize].iter().sum()
}

/// `P(B = b)` for `B ~ Bin(n, 1/2)`, `b = 0..=n`.
pub(crate) fn rademacher_pmf(n: usize) -> Vec<f64> {
    // Ratio recurrence from the mode, then normalise; no under- or overflow.
    let mode = n / 2;
    let mut w = vec![0.0; n + 1];
    w[mode] = 1.0;
    for b in mode..n {
        w[b + 1] = w[b] * (n - b) as f64 / (b + 1) as f64;
    }
    for b in (0..mode).rev() {
        w[b] = w[b + 1] * (b + 1) as f64 / (n - b) as f64;
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

impl fmt::Display for DisplacementLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DisplacementLaw {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "normal" | "gaussian" => Ok(Self::Normal),
            "rademacher" | "pm1" => Ok(Self::Rademacher),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::InvalidDisplacement(format!("unrecognised step law '{other}'"))),
        }
    }
}
