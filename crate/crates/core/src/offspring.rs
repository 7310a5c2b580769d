//! Critical offspring laws, their generating functions and extinction tables.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Bound on `sum_{j > cut} j^2 p_j` at the truncation point of an infinite-support law.
pub const TAIL_CUTOFF: f64 = 1e-15;
const SUM_TOL: f64 = 1e-12;
const MEAN_TOL: f64 = 1e-10;
const SPEC_SUM_TOL: f64 = 1e-9;
/// Relative size of the neglected tail tolerated by [`OffspringLaw::factorial_moment`].
const MOMENT_TAIL_TOL: f64 = 1e-6;
const PARAMETRIC_CAP: usize = 20_000;

#[derive(Debug, Clone, PartialEq)]
pub enum LawKind {
    Geometric { p: f64 },
    Binary,
    Poisson { lambda: f64 },
    Pmf,
}

/// A critical offspring distribution on `{0, 1, 2, ...}`.
///
/// Infinite-support parametric laws are truncated where the remaining second
/// moment drops below [`TAIL_CUTOFF`] and renormalized; the dropped mass is kept in
/// `truncated_mass` so moment queries can certify their tails.
#[derive(Debug, Clone)]
pub struct OffspringLaw {
    name: String,
    kind: LawKind,
    pmf: Vec<f64>,
    sigma2: f64,
    truncated_mass: f64,
}

impl OffspringLaw {
    /// `p_k = p (1-p)^k`. Critical only for `p = 1/2`.
    pub fn geometric(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidLaw(format!("geometric parameter {p} not in (0,1)")));
        }
        let mean = (1.0 - p) / p;
        if (mean - 1.0).abs() > MEAN_TOL {
            return Err(Error::InvalidLaw(format!(
                "geometric:{p} has mean {mean}, a critical law needs mean 1"
            )));
        }
        let mut k = 0usize;
        let raw = std::iter::from_fn(move || {
            let v = p * (1.0 - p).powi(k as i32);
            k += 1;
            Some(v)
        });
        Self::from_parametric(format!("geometric:{p}"), LawKind::Geometric { p }, raw)
    }

    /// `p_0 = p_2 = 1/2`.
    pub fn binary() -> Self {
        Self::from_pmf_named("binary".into(), LawKind::Binary, vec![0.5, 0.0, 0.5], 0.0)
            .expect("binary law is critical")
    }

    /// Poisson offspring. Critical only for `lambda = 1`.
    pub fn poisson(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidLaw(format!("poisson parameter {lambda} must be positive")));
        }
        if (lambda - 1.0).abs() > MEAN_TOL {
            return Err(Error::InvalidLaw(format!(
                "poisson:{lambda} has mean {lambda}, a critical law needs mean 1"
            )));
        }
        let mut k = 0usize;
        let mut term = (-lambda).exp();
        let raw = std::iter::from_fn(move || {
            let v = term;
            k += 1;
            term *= lambda / k as f64;
            Some(v)
        });
        Self::from_parametric(format!("poisson:{lambda}"), LawKind::Poisson { lambda }, raw)
    }

    /// A user-supplied finite pmf `p_0, p_1, ...`; must sum to one within 1e-9.
    pub fn from_pmf(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::InvalidLaw("empty pmf".into()));
        }
        if let Some(bad) = pmf.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidLaw(format!("pmf entry {bad} is not a probability")));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > SPEC_SUM_TOL {
            return Err(Error::InvalidLaw(format!("pmf sums to {total}, expected 1")));
        }
        let mut pmf: Vec<f64> = pmf.iter().map(|p| p / total).collect();
        while pmf.len() > 1 && *pmf.last().unwrap() == 0.0 {
            pmf.pop();
        }
        let name = format!(
            "pmf:{}",
            pmf.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",")
        );
        Self::from_pmf_named(name, LawKind::Pmf, pmf, 0.0)
    }

    fn from_parametric(name: String, kind: LawKind, raw: impl Iterator<Item = f64>) -> Result<Self> {
        // Generate far enough that reverse partial sums give honest tails.
        let mut terms: Vec<f64> = Vec::new();
        for (k, v) in raw.enumerate() {
            terms.push(v);
            if (v < 1e-300 && k > 10) || k >= PARAMETRIC_CAP {
                break;
            }
        }
        // Cut where the neglected tail no longer moves the variance.
        let mut tail = vec![0.0; terms.len()];
        let mut tail2 = vec![0.0; terms.len()];
        let (mut acc, mut acc2) = (0.0, 0.0);
        for k in (0..terms.len()).rev() {
            tail[k] = acc; // mass strictly beyond k
            tail2[k] = acc2;
            acc += terms[k];
            acc2 += (k * k) as f64 * terms[k];
        }
        let cut = tail2
            .iter()
            .position(|t| *t < TAIL_CUTOFF)
            .ok_or_else(|| Error::InvalidLaw(format!("{name}: tail does not vanish")))?;
        let dropped = tail[cut];
        let kept: Vec<f64> = terms[..=cut].to_vec();
        let total: f64 = kept.iter().sum();
        let pmf = kept.into_iter().map(|p| p / total).collect();
        Self::from_pmf_named(name, kind, pmf, dropped)
    }

    fn from_pmf_named(name: String, kind: LawKind, pmf: Vec<f64>, truncated_mass: f64) -> Result<Self> {
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidLaw(format!("{name}: mass {total} != 1")));
        }
        let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        if (mean - 1.0).abs() > MEAN_TOL {
            return Err(Error::InvalidLaw(format!(
                "{name}: mean {mean} != 1, the law is not critical"
            )));
        }
        let second: f64 = pmf.iter().enumerate().map(|(k, p)| (k * k) as f64 * p).sum();
        let sigma2 = second - 1.0;
        if !(sigma2 > 1e-12 && sigma2.is_finite()) {
            return Err(Error::InvalidLaw(format!("{name}: variance {sigma2} must be positive")));
        }
        Ok(Self { name, kind, pmf, sigma2, truncated_mass })
    }

    /// Parse `geometric:0.5`, `binary`, `poisson:1` or `pmf:p0,p1,...`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (head, arg) = match spec.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a.trim())),
            None => (spec, None),
        };
        let num = |tok: &str| -> Result<f64> {
            tok.parse::<f64>()
                .map_err(|_| Error::InvalidLaw(format!("cannot parse number '{tok}' in '{spec}'")))
        };
        match (head, arg) {
            ("binary", None) => Ok(Self::binary()),
            ("geometric", Some(a)) => Self::geometric(num(a)?),
            ("geometric", None) => Self::geometric(0.5),
            ("poisson", Some(a)) => Self::poisson(num(a)?),
            ("poisson", None) => Self::poisson(1.0),
            ("pmf", Some(a)) => {
                let values = a.split(',').map(|t| num(t.trim())).collect::<Result<Vec<_>>>()?;
                Self::from_pmf(values)
            }
            _ => Err(Error::InvalidLaw(format!("unrecognised law '{spec}'"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &LawKind {
        &self.kind
    }

    /// Probabilities `p_0 ..= p_J` of the (possibly truncated) law.
    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn p0(&self) -> f64 {
        self.pmf[0]
    }

    /// Largest offspring count with positive probability.
    pub fn max_offspring(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn truncated_mass(&self) -> f64 {
        self.truncated_mass
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    /// `f(s) = sum_j p_j s^j` for `s` in `[0, 1]`.
    pub fn pgf(&self, s: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Domain(format!("pgf argument {s} outside [0,1]")));
        }
        Ok(self.pmf.iter().rev().fold(0.0, |acc, p| acc * s + p))
    }

    /// `g(q) = 1 - f(1 - q) = sum_{j>=1} p_j [1 - (1-q)^j]`, summed smallest
    /// term first so that small `q` keeps full relative precision.
    pub fn survival_map(&self, q: f64) -> f64 {
        let log1m = (-q).ln_1p();
        let mut terms: Vec<f64> = self
            .pmf
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, p)| **p > 0.0)
            .map(|(j, p)| p * -(j as f64 * log1m).exp_m1())
            .collect();
        terms.sort_unstable_by(|a, b| a.total_cmp(b));
        terms.iter().sum()
    }

    /// Falling factorial moment `f^(r)(1) = sum_j p_j j (j-1) ... (j-r+1)`.
    ///
    /// Fails when the mass dropped by truncation could move the result by
    /// more than a relative 1e-6; the error carries the bound.
    pub fn factorial_moment(&self, r: u32) -> Result<f64> {
        let value = falling_moment(&self.pmf, r);
        let bound = self.tail_bound(r, value);
        if bound > MOMENT_TAIL_TOL * value.abs().max(1.0) {
            return Err(Error::MomentTruncation { order: r, bound });
        }
        Ok(value)
    }

    /// Raw moment `m_r = sum_j j^r p_j`.
    pub fn raw_moment(&self, r: u32) -> Result<f64> {
        self.factorial_moment(r)?;
        Ok(self
            .pmf
            .iter()
            .enumerate()
            .map(|(j, p)| (j as f64).powi(r as i32) * p)
            .sum())
    }

    /// Bound on the change of the r-th factorial moment caused by truncation.
    fn tail_bound(&self, r: u32, value: f64) -> f64 {
        if self.truncated_mass == 0.0 {
            return 0.0;
        }
        let start = self.pmf.len();
        let renorm = value * self.truncated_mass;
        let term = |j: usize| -> f64 {
            let p = match self.kind {
                LawKind::Geometric { p } => p * (1.0 - p).powi(j as i32),
                LawKind::Poisson { lambda } => {
                    (j as f64 * lambda.ln() - lambda - ln_factorial(j)).exp()
                }
                _ => 0.0,
            };
            p * falling(j, r)
        };
        let mut tail = 0.0;
        for j in start..start + PARAMETRIC_CAP {
            let t = term(j);
            tail += t;
            if t < 1e-300 || (j > start + 64 && t < tail * 1e-17) {
                break;
            }
        }
        tail + renorm
    }

    /// Survival probabilities `q[k] = 1 - f_(k)(0)` for `k = 0..=n`.
    pub fn extinction_table(&self, n: usize) -> Result<ExtinctionTable> {
        if self.p0() <= 0.0 {
            return Err(Error::InvalidLaw(format!(
                "{}: p_0 = 0, the process never dies out",
                self.name
            )));
        }
        let mut q = Vec::with_capacity(n + 1);
        q.push(1.0);
        for k in 0..n {
            let next = self.survival_map(q[k]);
            q.push(next);
        }
        Ok(ExtinctionTable { q })
    }

    /// Canonical law string accepted by [`OffspringLaw::parse`].
    pub fn spec(&self) -> String {
        match self.kind {
            LawKind::Binary => "binary".into(),
            _ => self.name.clone(),
        }
    }
}

impl fmt::Display for OffspringLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl FromStr for OffspringLaw {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// `q[k] = P(Z_k > 0)` for `k = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtinctionTable {
    q: Vec<f64>,
}

impl ExtinctionTable {
    pub fn horizon(&self) -> usize {
        self.q.len() - 1
    }

    pub fn q(&self, k: usize) -> f64 {
        self.q[k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }

    /// `k q[k] sigma^2 / 2`, which tends to one.
    pub fn kolmogorov_ratio(&self, k: usize, sigma2: f64) -> f64 {
        k as f64 * self.q[k] * sigma2 / 2.0
    }
}

pub(crate) fn falling(j: usize, r: u32) -> f64 {
    if (j as u64) < r as u64 {
        return 0.0;
    }
    (0..r as usize).map(|i| (j - i) as f64).product()
}

fn falling_moment(pmf: &[f64], r: u32) -> f64 {
    pmf.iter().enumerate().map(|(j, p)| p * falling(j, r)).sum()
}

pub(crate) fn ln_factorial(j: usize) -> f64 {
    statrs::function::gamma::ln_gamma(j as f64 + 1.0)
}
