//! `brw`: command-line front end for the branching random walk toolkit.

use std::fs;
use std::path::Path;
use std::process::ExitCode;

use brw_core::config::RunConfig;
use brw_core::harness::{self, RunOutput};
use brw_core::Error;
use clap::{Args, Parser, Subcommand};

const EXIT_USAGE: u8 = 64;
const EXIT_IO: u8 = 74;

#[derive(Parser, Debug)]
#[command(name = "brw", version, about = "Critical branching random walks: exact conditioned sampling, limit moments, cross-checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Survival probabilities q[k] and the scaled sequence k q[k] sigma^2 / 2.
    Extinction(Settings),
    /// Conditioned-tree Monte Carlo of the rescaled occupation counts.
    Simulate(Settings),
    /// Limit moments mu_i^t(x) by nested quadrature.
    Moments(Settings),
    /// Limiting binary branching Brownian motion.
    Bbm(Settings),
    /// Cross-route comparison report.
    Compare(Settings),
}

/// Every flag overrides the same key in `--config`.
#[derive(Args, Debug, Default)]
struct Settings {
    /// key = value manifest applied before the flags
    #[arg(long)]
    config: Option<String>,
    /// geometric:p | binary | poisson:lambda | pmf:p0,p1,...
    #[arg(long)]
    law: Option<String>,
    /// normal | rademacher | uniform
    #[arg(long)]
    nu: Option<String>,
    /// horizon or comma-separated ladder
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// comma-separated thresholds; inf and -inf allowed
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    #[arg(long)]
    r_max: Option<String>,
    /// comma-separated BBM evaluation times in (0, 1)
    #[arg(long)]
    t_eval: Option<String>,
    #[arg(long)]
    bbm_reps: Option<String>,
    #[arg(long)]
    hermite_nodes: Option<String>,
    #[arg(long)]
    t_intervals: Option<String>,
    #[arg(long)]
    x_step: Option<String>,
    /// variance for the moment grid (default: the law's)
    #[arg(long)]
    grid_sigma2: Option<String>,
    /// output directory
    #[arg(long)]
    out: Option<String>,
    /// worker threads, 0 = all cores
    #[arg(long)]
    workers: Option<String>,
    #[arg(long)]
    node_budget: Option<String>,
    #[arg(long)]
    particle_budget: Option<String>,
    #[arg(long)]
    mc_paths: Option<String>,
    #[arg(long)]
    significance: Option<String>,
    #[arg(long)]
    z_threshold: Option<String>,
    #[arg(long)]
    rel_tol: Option<String>,
    /// also write per-replication samples
    #[arg(long)]
    samples: bool,
    /// also write reduced offspring pmfs (k,l,p)
    #[arg(long)]
    reduced_pmf: bool,
}

impl Settings {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {path}: {e}")))?;
            cfg.apply_kv(&text)?;
        }
        let flags = [
            ("law", &self.law),
            ("nu", &self.nu),
            ("n", &self.n),
            ("reps", &self.reps),
            ("seed", &self.seed),
            ("x", &self.x),
            ("r_max", &self.r_max),
            ("t_eval", &self.t_eval),
            ("bbm_reps", &self.bbm_reps),
            ("hermite_nodes", &self.hermite_nodes),
            ("t_intervals", &self.t_intervals),
            ("x_step", &self.x_step),
            ("grid_sigma2", &self.grid_sigma2),
            ("out", &self.out),
            ("workers", &self.workers),
            ("node_budget", &self.node_budget),
            ("particle_budget", &self.particle_budget),
            ("mc_paths", &self.mc_paths),
            ("significance", &self.significance),
            ("z_threshold", &self.z_threshold),
            ("rel_tol", &self.rel_tol),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v).map_err(|e| Error::Config(format!("--{}: {e}", key.replace('_', "-"))))?;
            }
        }
        if self.samples {
            cfg.samples = true;
        }
        if self.reduced_pmf {
            cfg.reduced_pmf = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_outputs(dir: &Path, cfg: &RunConfig, out: &RunOutput) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("run.conf"), cfg.to_kv())?;
    for (name, bytes) in &out.files {
        fs::write(dir.join(name), bytes)?;
    }
    Ok(())
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::Domain(_) | Error::InvalidLaw(_) | Error::InvalidDisplacement(_) | Error::Config(_) => EXIT_USAGE,
        Error::NodeBudget { .. } | Error::TrialBudget { .. } => 2,
        Error::MomentTruncation { .. } | Error::ReducedTruncation { .. } | Error::Integrity(_) => 3,
        Error::Io(_) => EXIT_IO,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let (name, settings, run): (&str, &Settings, fn(&RunConfig) -> brw_core::Result<RunOutput>) = match &cli.command {
        Command::Extinction(s) => ("extinction", s, harness::run_extinction),
        Command::Simulate(s) => ("simulate", s, harness::run_simulate),
        Command::Moments(s) => ("moments", s, harness::run_moments),
        Command::Bbm(s) => ("bbm", s, harness::run_bbm),
        Command::Compare(s) => ("compare", s, harness::run_compare),
    };
    let cfg = match settings.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("brw {name}: {e}");
            return ExitCode::from(exit_for(&e));
        }
    };
    let out = match run(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("brw {name}: {e}");
            if matches!(e, Error::TrialBudget { .. }) {
                eprintln!("hint: the conditioned reduced-tree sampler does not need rejection");
            }
            return ExitCode::from(exit_for(&e));
        }
    };
    if let Err(e) = write_outputs(&cfg.out, &cfg, &out) {
        eprintln!("brw {name}: cannot write to {}: {e}", cfg.out.display());
        return ExitCode::from(EXIT_IO);
    }
    let files: Vec<&str> = out.files.iter().map(|(n, _)| n.as_str()).collect();
    println!("{name}: wrote {} to {} (status {})", files.join(", "), cfg.out.display(), out.status.exit_code());
    ExitCode::from(out.status.exit_code() as u8)
}
