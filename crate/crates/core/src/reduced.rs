//! The reduced Galton–Watson process conditioned on survival to a horizon `n`.
//!
//! Keeping only individuals with descendants alive at generation `n`, and
//! conditioning on `Z_n > 0`, gives an inhomogeneous G–W process in which a
//! particle at depth `k - 1` reproduces with generating function
//!
//! ```text
//! f̂_{k,n}(s) = [f(a + s(1-a)) - b] / (1 - b),   a = f_(n-k)(0), b = f_(n-k+1)(0).
//! ```
//!
//! All quantities are evaluated through the survival probabilities
//! `q_a = 1 - a`, `q_b = 1 - b`, which keeps `p_0(k,n) = 0` exact.

use std::sync::OnceLock;

use rand::Rng;

use crate::error::{Error, Result};
use crate::offspring::{ln_factorial, ExtinctionTable, OffspringLaw};

/// Tail mass dropped from the reduced pmfs.
pub const REDUCED_TAIL_CUTOFF: f64 = 1e-14;
const REDUCED_SUM_TOL: f64 = 1e-10;
/// Largest moment order supported by [`reduced_moment`].
pub const MAX_STIRLING_ORDER: usize = 12;

fn survival_pair(table: &ExtinctionTable, k: usize, n: usize) -> Result<(f64, f64)> {
    if k == 0 || k > n {
        return Err(Error::Domain(format!("generation k={k} outside 1..={n}")));
    }
    if n > table.horizon() {
        return Err(Error::Domain(format!(
            "horizon {n} exceeds extinction table horizon {}",
            table.horizon()
        )));
    }
    Ok((table.q(n - k), table.q(n - k + 1)))
}

/// Offspring generating function of a reduced particle at depth `k - 1`.
pub fn reduced_pgf(law: &OffspringLaw, table: &ExtinctionTable, k: usize, n: usize, s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("pgf argument {s} outside [0,1]")));
    }
    let (qa, qb) = survival_pair(table, k, n)?;
    // f(a + s(1-a)) = 1 - g((1-s) q_a), and g(q_a) = q_b by construction of the table.
    let inner = if s == 0.0 { qa } else { (1.0 - s) * qa };
    Ok(1.0 - law.survival_map(inner) / qb)
}

/// The offspring law `{p_l(k,n)}_{l>=1}` of a reduced particle at depth `k - 1`.
#[derive(Debug, Clone)]
pub struct ReducedOffspringLaw {
    pub k: usize,
    pub n: usize,
    /// `pmf[l] = p_l(k,n)`; `pmf[0]` is always zero.
    pmf: Vec<f64>,
    /// `1 - q[n-k]`
    pub a: f64,
    /// `1 - q[n-k+1]`
    pub b: f64,
    q_a: f64,
    q_b: f64,
    cdf: Vec<f64>,
}

impl ReducedOffspringLaw {
    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn p(&self, l: usize) -> f64 {
        self.pmf.get(l).copied().unwrap_or(0.0)
    }

    pub fn support_max(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn total_mass(&self) -> f64 {
        self.pmf.iter().sum()
    }

    /// `sum_l l^r p_l(k,n)` straight from the pmf.
    pub fn empirical_moment(&self, r: u32) -> f64 {
        self.pmf
            .iter()
            .enumerate()
            .map(|(l, p)| (l as f64).powi(r as i32) * p)
            .sum()
    }

    /// `m_1(k) = q[n-k] / q[n-k+1]`.
    pub fn mean_closed_form(&self) -> f64 {
        self.q_a / self.q_b
    }

    /// Draw an offspring count (always at least one).
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * self.cdf[self.cdf.len() - 1];
        // Mass is concentrated on small l; a forward scan beats bisection.
        for (i, c) in self.cdf.iter().enumerate() {
            if u < *c {
                return i + 1;
            }
        }
        self.cdf.len()
    }
}

/// Coefficients of `f(1 - q_a + s q_a)` for `l >= 1`, divided by `q_b`.
pub fn reduced_offspring_pmf(
    law: &OffspringLaw,
    table: &ExtinctionTable,
    k: usize,
    n: usize,
) -> Result<ReducedOffspringLaw> {
    let (qa, qb) = survival_pair(table, k, n)?;
    let p = law.pmf();
    let jmax = law.max_offspring();
    let mut pmf = vec![0.0; jmax + 1];
    let ln_qa = qa.ln();
    let ln_1mqa = (-qa).ln_1p();
    for (l, slot) in pmf.iter_mut().enumerate().skip(1) {
        let mut terms: Vec<f64> = Vec::with_capacity(jmax + 1 - l);
        for (j, pj) in p.iter().enumerate().skip(l) {
            if *pj == 0.0 {
                continue;
            }
            let t = if j == l {
                pj * (l as f64 * ln_qa).exp()
            } else if qa == 1.0 {
                0.0
            } else {
                let ln_c = ln_factorial(j) - ln_factorial(l) - ln_factorial(j - l);
                pj * (ln_c + (j - l) as f64 * ln_1mqa + l as f64 * ln_qa).exp()
            };
            terms.push(t);
        }
        terms.sort_unstable_by(|x, y| x.total_cmp(y));
        *slot = terms.iter().sum::<f64>() / qb;
    }
    // Cut where the remaining tail mass drops below the cutoff.
    let mut tail = 0.0;
    let mut cut = pmf.len() - 1;
    for l in (1..pmf.len()).rev() {
        if tail + pmf[l] >= REDUCED_TAIL_CUTOFF {
            cut = l;
            break;
        }
        tail += pmf[l];
    }
    pmf.truncate(cut.max(1) + 1);
    let total: f64 = pmf.iter().sum();
    if (total - 1.0).abs() > REDUCED_SUM_TOL {
        return Err(Error::ReducedTruncation { k, n, bound: (total - 1.0).abs() });
    }
    let mut cdf = Vec::with_capacity(pmf.len() - 1);
    let mut acc = 0.0;
    for v in &pmf[1..] {
        acc += v;
        cdf.push(acc);
    }
    Ok(ReducedOffspringLaw { k, n, pmf, a: 1.0 - qa, b: 1.0 - qb, q_a: qa, q_b: qb, cdf })
}

fn stirling2() -> &'static Vec<Vec<f64>> {
    static TABLE: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let m = MAX_STIRLING_ORDER;
        let mut s = vec![vec![0.0; m + 1]; m + 1];
        s[0][0] = 1.0;
        for r in 1..=m {
            for j in 1..=r {
                s[r][j] = j as f64 * s[r - 1][j] + s[r - 1][j - 1];
            }
        }
        s
    })
}

/// Stirling number of the second kind `S(r, j)` for `r <= 12`.
pub fn stirling2_number(r: usize, j: usize) -> f64 {
    stirling2()[r][j]
}

/// Factorial moment `f̂^(r)_{k,n}(1) = q_a^r / q_b * f^(r)(1)`.
pub fn reduced_factorial_moment(
    law: &OffspringLaw,
    table: &ExtinctionTable,
    k: usize,
    n: usize,
    r: u32,
) -> Result<f64> {
    let (qa, qb) = survival_pair(table, k, n)?;
    Ok(qa.powi(r as i32) / qb * law.factorial_moment(r)?)
}

/// Raw moment `m_r(k) = sum_l l^r p_l(k,n)` assembled from factorial moments.
pub fn reduced_moment(law: &OffspringLaw, table: &ExtinctionTable, k: usize, n: usize, r: u32) -> Result<f64> {
    if r == 0 || r as usize > MAX_STIRLING_ORDER {
        return Err(Error::Domain(format!("moment order {r} outside 1..={MAX_STIRLING_ORDER}")));
    }
    let mut total = 0.0;
    for j in 1..=r {
        total += stirling2_number(r as usize, j as usize) * reduced_factorial_moment(law, table, k, n, j)?;
    }
    Ok(total)
}

/// All reduced offspring laws for one horizon, indexed by depth.
#[derive(Debug, Clone)]
pub struct ReducedLaws {
    n: usize,
    table: ExtinctionTable,
    laws: Vec<ReducedOffspringLaw>,
}

impl ReducedLaws {
    pub fn new(law: &OffspringLaw, n: usize) -> Result<Self> {
        let table = law.extinction_table(n)?;
        let laws = (1..=n)
            .map(|k| reduced_offspring_pmf(law, &table, k, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, table, laws })
    }

    pub fn horizon(&self) -> usize {
        self.n
    }

    pub fn table(&self) -> &ExtinctionTable {
        &self.table
    }

    /// Offspring law of a particle at `depth` (`0 <= depth < n`).
    #[inline]
    pub fn at_depth(&self, depth: usize) -> &ReducedOffspringLaw {
        &self.laws[depth]
    }

    /// Law `p_l(k, n)` for `1 <= k <= n`.
    pub fn generation(&self, k: usize) -> &ReducedOffspringLaw {
        &self.laws[k - 1]
    }

    /// Rows `k,l,p` for CSV export.
    pub fn csv_rows(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.laws
            .iter()
            .flat_map(|r| r.pmf.iter().enumerate().skip(1).map(move |(l, p)| (r.k, l, *p)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn presets() -> Vec<OffspringLaw> {
        vec![
            OffspringLaw::geometric(0.5).unwrap(),
            OffspringLaw::binary(),
            OffspringLaw::poisson(1.0).unwrap(),
            OffspringLaw::from_pmf(vec![0.3, 0.45, 0.2, 0.05]).unwrap(),
        ]
    }

    #[test]
    fn pgf_examples() {
        let bin = OffspringLaw::binary();
        let t = bin.extinction_table(5).unwrap();
        assert_eq!(reduced_pgf(&bin, &t, 5, 5, 0.0).unwrap(), 0.0);
        assert!((reduced_pgf(&bin, &t, 5, 5, 0.5).unwrap() - 0.25).abs() < 1e-15);
        for law in presets() {
            let t = law.extinction_table(7).unwrap();
            for k in 1..=7 {
                assert!((reduced_pgf(&law, &t, k, 7, 1.0).unwrap() - 1.0).abs() < 1e-15);
            }
        }
        assert!(reduced_pgf(&bin, &t, 0, 5, 0.5).is_err());
        assert!(reduced_pgf(&bin, &t, 6, 5, 0.5).is_err());
    }

    #[test]
    fn pmf_examples() {
        let bin = OffspringLaw::binary();
        let t = bin.extinction_table(3).unwrap();
        let last = reduced_offspring_pmf(&bin, &t, 3, 3).unwrap();
        assert_eq!(last.pmf(), &[0.0, 0.0, 1.0]);
        let t2 = bin.extinction_table(2).unwrap();
        let first = reduced_offspring_pmf(&bin, &t2, 1, 2).unwrap();
        assert!((first.a - 0.5).abs() < 1e-15 && (first.b - 0.625).abs() < 1e-15);
        assert!((first.p(1) - 2.0 / 3.0).abs() < 1e-14);
        assert!((first.p(2) - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn pmf_matches_finite_differences_of_pgf() {
        // p_1 = f̂'(0), p_2 = f̂''(0)/2 by central differences around a small s
        let law = OffspringLaw::from_pmf(vec![0.3, 0.45, 0.2, 0.05]).unwrap();
        let t = law.extinction_table(9).unwrap();
        for k in [1, 4, 9] {
            let r = reduced_offspring_pmf(&law, &t, k, 9).unwrap();
            let h = 1e-3;
            let f = |s: f64| reduced_pgf(&law, &t, k, 9, s).unwrap();
            let d1 = (-3.0 * f(0.0) + 4.0 * f(h) - f(2.0 * h)) / (2.0 * h);
            let d2 = (2.0 * f(0.0) - 5.0 * f(h) + 4.0 * f(2.0 * h) - f(3.0 * h)) / (h * h);
            assert!((d1 - r.p(1)).abs() < 1e-5, "k={k}: {d1} vs {}", r.p(1));
            assert!((d2 / 2.0 - r.p(2)).abs() < 1e-3, "k={k}: {} vs {}", d2 / 2.0, r.p(2));
        }
    }

    #[test]
    fn moments_examples() {
        let geo = OffspringLaw::geometric(0.5).unwrap();
        let n = 30;
        let t = geo.extinction_table(n).unwrap();
        for k in 1..=n {
            let m1 = reduced_moment(&geo, &t, k, n, 1).unwrap();
            let expect = (n - k + 2) as f64 / (n - k + 1) as f64;
            assert!((m1 - expect).abs() < 1e-12);
        }
        let bin = OffspringLaw::binary();
        let tb = bin.extinction_table(8).unwrap();
        assert!((reduced_moment(&bin, &tb, 8, 8, 1).unwrap() - 2.0).abs() < 1e-15);
        for law in presets() {
            let t = law.extinction_table(40).unwrap();
            let prod: f64 = (1..=40).map(|k| reduced_moment(&law, &t, k, 40, 1).unwrap()).product();
            assert!((prod - 1.0 / t.q(40)).abs() / prod < 1e-12);
        }
    }

    #[test]
    fn exact_zero_at_origin() {
        for law in presets() {
            for n in [1, 2, 17, 50] {
                let t = law.extinction_table(n).unwrap();
                for k in 1..=n {
                    assert_eq!(reduced_pgf(&law, &t, k, n, 0.0).unwrap(), 0.0);
                }
            }
        }
    }

    #[test]
    fn pmf_moments_agree_with_factorial_route() {
        for law in presets() {
            for n in [1, 5, 23, 50] {
                let t = law.extinction_table(n).unwrap();
                for k in 1..=n {
                    let r = reduced_offspring_pmf(&law, &t, k, n).unwrap();
                    assert!((r.total_mass() - 1.0).abs() < 1e-10);
                    for order in 1..=4 {
                        let a = r.empirical_moment(order);
                        let b = reduced_moment(&law, &t, k, n, order).unwrap();
                        assert!((a - b).abs() < 1e-8 * b.max(1.0), "{} k={k} n={n} r={order}", law.name());
                    }
                }
            }
        }
    }

    #[test]
    fn stirling_numbers() {
        assert_eq!(stirling2_number(4, 2), 7.0);
        assert_eq!(stirling2_number(5, 3), 25.0);
        assert_eq!(stirling2_number(12, 6), 1_323_652.0);
    }

    #[test]
    fn sampler_reproduces_pmf() {
        use rand::SeedableRng;
        let law = OffspringLaw::from_pmf(vec![0.3, 0.45, 0.2, 0.05]).unwrap();
        let laws = ReducedLaws::new(&law, 6).unwrap();
        let r = laws.generation(3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let draws = 200_000;
        let mut counts = vec![0usize; r.support_max() + 2];
        for _ in 0..draws {
            counts[r.sample(&mut rng)] += 1;
        }
        assert_eq!(counts[0], 0);
        for l in 1..=r.support_max() {
            let p = r.p(l);
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((counts[l] as f64 / draws as f64 - p).abs() < 5.0 * se + 1e-9);
        }
    }
}
