//! Run manifests: flat `key = value` text, one setting per line.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;

use crate::displacement::DisplacementLaw;
use crate::error::{Error, Result};
use crate::moments::{QuadratureSpec, TimeNodes};
use crate::offspring::OffspringLaw;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub law: String,
    pub nu: String,
    /// Horizon, or a ladder of horizons.
    pub n: Vec<usize>,
    pub reps: u64,
    pub seed: u64,
    pub x: Vec<f64>,
    pub r_max: usize,
    pub t_eval: Vec<f64>,
    pub bbm_reps: u64,
    pub hermite_nodes: usize,
    pub t_intervals: usize,
    pub x_step: f64,
    /// Variance used for the moment grid; defaults to the law's own.
    pub grid_sigma2: Option<f64>,
    pub out: PathBuf,
    /// 0 = one worker per core.
    pub workers: usize,
    pub node_budget: usize,
    pub particle_budget: usize,
    pub mc_paths: u64,
    pub significance: f64,
    pub z_threshold: f64,
    pub rel_tol: f64,
    /// Also write the per-replication statistics (CSV and binary positions).
    pub samples: bool,
    /// Also write the reduced offspring pmfs.
    pub reduced_pmf: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            law: "geometric:0.5".into(),
            nu: "normal".into(),
            n: vec![200],
            reps: 20_000,
            seed: 42,
            x: vec![-1.0, 0.0, 1.0],
            r_max: 6,
            t_eval: vec![0.9, 0.99, 0.999],
            bbm_reps: 20_000,
            hermite_nodes: 32,
            t_intervals: 128,
            x_step: 0.05,
            grid_sigma2: None,
            out: PathBuf::from("out"),
            workers: 0,
            node_budget: crate::sampler::DEFAULT_NODE_BUDGET,
            particle_budget: crate::bbm::DEFAULT_PARTICLE_BUDGET,
            mc_paths: crate::spine::MIN_FALLBACK_PATHS,
            significance: 1e-3,
            z_threshold: 4.0,
            rel_tol: 0.03,
            samples: false,
            reduced_pmf: false,
        }
    }
}

pub(crate) fn parse_real(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        v => v.parse().map_err(|_| Error::Config(format!("'{v}' is not a number"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

fn parse_list<T>(v: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(item).collect()
}

fn join<T>(v: &[T], f: impl Fn(&T) -> String) -> String {
    v.iter().map(f).collect::<Vec<_>>().join(",")
}

fn real(x: &f64) -> String {
    crate::bbm::fmt_x(*x)
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim().replace('-', "_").as_str() {
            "law" => {
                OffspringLaw::parse(v)?;
                self.law = v.into();
            }
            "nu" => {
                v.parse::<DisplacementLaw>()?;
                self.nu = v.into();
            }
            "n" => self.n = parse_list(v, |s| parse_num("n", s))?,
            "reps" => self.reps = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "x" => self.x = parse_list(v, parse_real)?,
            "r_max" => self.r_max = parse_num(key, v)?,
            "t_eval" => self.t_eval = parse_list(v, parse_real)?,
            "bbm_reps" => self.bbm_reps = parse_num(key, v)?,
            "hermite_nodes" => self.hermite_nodes = parse_num(key, v)?,
            "t_intervals" => self.t_intervals = parse_num(key, v)?,
            "x_step" => self.x_step = parse_real(v)?,
            "grid_sigma2" => self.grid_sigma2 = if v.is_empty() || v == "auto" { None } else { Some(parse_real(v)?) },
            "out" => self.out = PathBuf::from(v),
            "workers" => self.workers = parse_num(key, v)?,
            "node_budget" => self.node_budget = parse_num(key, v)?,
            "particle_budget" => self.particle_budget = parse_num(key, v)?,
            "mc_paths" => self.mc_paths = parse_num(key, v)?,
            "significance" => self.significance = parse_real(v)?,
            "z_threshold" => self.z_threshold = parse_real(v)?,
            "rel_tol" => self.rel_tol = parse_real(v)?,
            "samples" => self.samples = parse_num(key, v)?,
            "reduced_pmf" => self.reduced_pmf = parse_num(key, v)?,
            other => return Err(Error::Config(format!("unknown setting '{other}'"))),
        }
        Ok(())
    }

    /// Parses a manifest on top of the defaults. `#` starts a comment.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv(text)?;
        Ok(cfg)
    }

    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(k, v).map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    /// The manifest text; `from_kv(to_kv())` reproduces the config.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("law", self.law.clone());
        kv("nu", self.nu.clone());
        kv("n", join(&self.n, |v| v.to_string()));
        kv("reps", self.reps.to_string());
        kv("seed", self.seed.to_string());
        kv("x", join(&self.x, real));
        kv("r_max", self.r_max.to_string());
        kv("t_eval", join(&self.t_eval, real));
        kv("bbm_reps", self.bbm_reps.to_string());
        kv("hermite_nodes", self.hermite_nodes.to_string());
        kv("t_intervals", self.t_intervals.to_string());
        kv("x_step", real(&self.x_step));
        kv("grid_sigma2", self.grid_sigma2.map(|v| real(&v)).unwrap_or_else(|| "auto".into()));
        kv("out", self.out.display().to_string());
        kv("workers", self.workers.to_string());
        kv("node_budget", self.node_budget.to_string());
        kv("particle_budget", self.particle_budget.to_string());
        kv("mc_paths", self.mc_paths.to_string());
        kv("significance", real(&self.significance));
        kv("z_threshold", real(&self.z_threshold));
        kv("rel_tol", real(&self.rel_tol));
        kv("samples", self.samples.to_string());
        kv("reduced_pmf", self.reduced_pmf.to_string());
        s
    }

    pub fn offspring(&self) -> Result<OffspringLaw> {
        OffspringLaw::parse(&self.law)
    }

    pub fn displacement(&self) -> Result<DisplacementLaw> {
        self.nu.parse()
    }

    pub fn horizon(&self) -> Result<usize> {
        self.n.iter().copied().max().ok_or_else(|| Error::Config("n is empty".into()))
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        QuadratureSpec {
            hermite_nodes: self.hermite_nodes,
            legendre_nodes: 2 * self.hermite_nodes,
            time: TimeNodes::Graded { intervals: self.t_intervals, power: 2.0 },
            x_step: self.x_step,
            ..QuadratureSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.offspring()?;
        self.displacement()?;
        if self.n.is_empty() || self.x.is_empty() {
            return Err(Error::Config("n and x need at least one value".into()));
        }
        if self.x.iter().any(|x| x.is_nan()) {
            return Err(Error::Config("x values must not be NaN".into()));
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(Error::Config("significance must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.set("x", "-inf, -1, 0.25, inf").unwrap();
        cfg.set("n", "10,100").unwrap();
        cfg.set("grid-sigma2", "4").unwrap();
        cfg.set("law", "pmf:0.25,0.5,0.25").unwrap();
        let back = RunConfig::from_kv(&cfg.to_kv()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.x[0], f64::NEG_INFINITY);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::from_kv("colour = blue").is_err());
        assert!(RunConfig::from_kv("reps = many").is_err());
        assert!(RunConfig::from_kv("law = pmf:1.0").is_err());
        assert!(RunConfig::from_kv("just text").is_err());
        let cfg = RunConfig::from_kv("# comment\nreps = 7 # trailing\n\n").unwrap();
        assert_eq!(cfg.reps, 7);
    }
}
