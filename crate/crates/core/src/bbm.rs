//! Binary branching Brownian motion on `[0, 1)`: each particle born at time
//! `b` splits in two at a time uniform on `(b, 1)` and moves as a standard
//! Brownian motion in between.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::rng::{substream, Route};
use crate::stats::{jackknife_moment, Estimate};

pub const DEFAULT_PARTICLE_BUDGET: usize = 1_000_000;

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() || times.iter().any(|t| !(*t > 0.0 && *t < 1.0)) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("evaluation times must increase strictly within (0, 1)".into()));
    }
    Ok(())
}

/// Positions of the particles alive at each of the increasing `times`,
/// all read off one realisation.
///
/// The tree is explored depth-first. A particle's path is sampled only at
/// the evaluation times it lives through and at its split time, with exact
/// Gaussian increments, so there is no time discretisation.
pub fn simulate_bbm_positions<R: Rng + ?Sized>(times: &[f64], rng: &mut R, budget: usize) -> Result<Vec<Vec<f64>>> {
    check_times(times)?;
    let horizon = *times.last().unwrap();
    let mut out = vec![Vec::new(); times.len()];
    let mut stack = vec![(0.0f64, 0.0f64)];
    let mut particles = 1usize;
    while let Some((birth, start)) = stack.pop() {
        let split = birth + (1.0 - birth) * rng.random::<f64>();
        let (mut last, mut pos) = (birth, start);
        let first = times.partition_point(|&t| t < birth);
        for (k, &t) in times.iter().enumerate().skip(first) {
            if t >= split {
                break;
            }
            pos += (t - last).sqrt() * rng.sample::<f64, _>(StandardNormal);
            last = t;
            out[k].push(pos);
        }
        if split < horizon {
            pos += (split - last).sqrt() * rng.sample::<f64, _>(StandardNormal);
            particles += 2;
            if particles > budget {
                return Err(Error::NodeBudget { budget });
            }
            stack.push((split, pos));
            stack.push((split, pos));
        }
    }
    Ok(out)
}

/// `(1 - t) #{particles at t with position <= x}` for one realisation.
pub fn simulate_bbm<R: Rng + ?Sized>(t_eval: f64, x: f64, rng: &mut R) -> Result<f64> {
    let pos = simulate_bbm_positions(&[t_eval], rng, DEFAULT_PARTICLE_BUDGET)?;
    Ok(rescaled_count(&pos[0], t_eval, x))
}

fn rescaled_count(positions: &[f64], t: f64, x: f64) -> f64 {
    let count = if x == f64::INFINITY {
        positions.len()
    } else {
        positions.iter().filter(|&&p| p <= x).count()
    };
    (1.0 - t) * count as f64
}

/// Rescaled counts for every replication, evaluation time and threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BbmSample {
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    /// `values[rep][time][x]`
    pub values: Vec<Vec<Vec<f64>>>,
}

impl BbmSample {
    /// Runs `reps` independent realisations; replication `i` uses stream `i`.
    pub fn run(times: &[f64], xs: &[f64], reps: u64, seed: u64, workers: usize, budget: usize) -> Result<Self> {
        check_times(times)?;
        let runs = map_indexed(reps, workers, |rep| -> Result<Vec<Vec<f64>>> {
            let mut rng = substream(seed, Route::Bbm, rep);
            let pos = simulate_bbm_positions(times, &mut rng, budget)?;
            Ok(pos
                .iter()
                .zip(times)
                .map(|(p, &t)| {
                    let mut sorted = p.clone();
                    sorted.sort_unstable_by(f64::total_cmp);
                    xs.iter()
                        .map(|&x| {
                            if x == f64::INFINITY {
                                (1.0 - t) * sorted.len() as f64
                            } else {
                                (1.0 - t) * sorted.partition_point(|&v| v <= x) as f64
                            }
                        })
                        .collect()
                })
                .collect())
        })?;
        let values = runs.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(Self { times: times.to_vec(), xs: xs.to_vec(), values })
    }

    pub fn column(&self, time: usize, x: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[time][x]).collect()
    }

    /// Empirical `r`-th moment at `(times[time], xs[x])` with jackknife error.
    pub fn moment(&self, time: usize, x: usize, r: i32) -> Estimate {
        jackknife_moment(&self.column(time, x), r)
    }

    /// CSV `rep,t_eval,x,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rep,t_eval,x,value\n");
        for (rep, v) in self.values.iter().enumerate() {
            for (ti, t) in self.times.iter().enumerate() {
                for (xi, x) in self.xs.iter().enumerate() {
                    out.push_str(&format!("{rep},{t},{},{}\n", fmt_x(*x), v[ti][xi]));
                }
            }
        }
        out
    }
}

pub(crate) fn fmt_x(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

/// Empirical `r`-th moment of the rescaled count with jackknife error.
pub fn bbm_moment(t_eval: f64, x: f64, r: i32, reps: u64, seed: u64) -> Result<Estimate> {
    if reps < 1000 {
        return Err(Error::Config(format!("need at least 1000 replications, got {reps}")));
    }
    let s = BbmSample::run(&[t_eval], &[x], reps, seed, 0, DEFAULT_PARTICLE_BUDGET)?;
    Ok(s.moment(0, 0, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal;
    use crate::stats::{ks_one_sample, Estimate};

    #[test]
    fn population_mean_is_inverse_remaining_time() {
        for t in [0.5, 0.9, 0.99] {
            let s = BbmSample::run(&[t], &[f64::INFINITY], 20_000, 1, 0, DEFAULT_PARTICLE_BUDGET).unwrap();
            let e = Estimate::from_values(s.column(0, 0).iter().map(|v| v / (1.0 - t)));
            assert!(e.z_score(1.0 / (1.0 - t)) < 3.0, "t={t}: {e:?}");
        }
    }

    #[test]
    fn total_mass_moments() {
        let m1 = bbm_moment(0.99, f64::INFINITY, 1, 20_000, 2).unwrap();
        assert!(m1.z_score(1.0) < 3.0, "{m1:?}");
        // (1-t) N_t with N_t geometric: E[...^2] = 1 + t
        let m2 = bbm_moment(0.99, f64::INFINITY, 2, 20_000, 2).unwrap();
        assert!(m2.z_score(1.99) < 4.0, "{m2:?}");
        assert_eq!(bbm_moment(0.9, f64::NEG_INFINITY, 1, 1000, 2).unwrap().mean, 0.0);
        assert!(bbm_moment(0.9, 0.0, 1, 10, 2).is_err());
    }

    #[test]
    fn uniformly_chosen_particle_is_gaussian() {
        let t = 0.9;
        let mut picks = Vec::new();
        for rep in 0..5000 {
            let mut rng = substream(3, Route::Bbm, rep);
            let pos = simulate_bbm_positions(&[t], &mut rng, DEFAULT_PARTICLE_BUDGET).unwrap();
            let i = rng.random_range(0..pos[0].len());
            picks.push(pos[0][i]);
        }
        let ks = ks_one_sample(&picks, |y| normal::cdf(y / t.sqrt()));
        assert!(ks.p_value > 1e-3, "{ks:?}");
    }

    #[test]
    fn ladder_shares_one_realisation() {
        let mut rng = substream(4, Route::Bbm, 0);
        let pos = simulate_bbm_positions(&[0.5, 0.9], &mut rng, DEFAULT_PARTICLE_BUDGET).unwrap();
        assert!(!pos[0].is_empty() && !pos[1].is_empty());
        assert!(simulate_bbm_positions(&[0.9, 0.5], &mut rng, 10).is_err());
        let mut rng = substream(4, Route::Bbm, 1);
        assert!(matches!(simulate_bbm_positions(&[0.999_999], &mut rng, 10), Err(Error::NodeBudget { .. })));
    }
}
