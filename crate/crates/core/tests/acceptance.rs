//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Runs sequentially in a single process so the wall-clock limits are
//! measured without competing tests.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use brw_core::bbm::BbmSample;
use brw_core::config::RunConfig;
use brw_core::harness::{bbm_bias_profile, bias_shrinks, run_compare, run_conditioned, run_rejection, histogram};
use brw_core::moments::{brownian_oracle_mu2, build_default_grid, QuadratureSpec};
use brw_core::normal;
use brw_core::reduced::{reduced_pgf, ReducedLaws};
use brw_core::stats::{chi_square_homogeneity, ks_one_sample, ks_two_sample};
use brw_core::{DisplacementLaw, OffspringLaw};

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn presets() -> Vec<OffspringLaw> {
    vec![OffspringLaw::geometric(0.5).unwrap(), OffspringLaw::binary(), OffspringLaw::poisson(1.0).unwrap()]
}

fn criterion_1() -> Outcome {
    let table = OffspringLaw::geometric(0.5).unwrap().extinction_table(10_000).unwrap();
    let err = table
        .as_slice()
        .iter()
        .enumerate()
        .map(|(k, q)| (q - 1.0 / (k as f64 + 1.0)).abs())
        .fold(0.0f64, f64::max);
    Outcome { pass: err <= 1e-12, detail: format!("max |q[k] - 1/(k+1)| = {err:.3e} over k <= 1e4 (tol 1e-12)") }
}

fn criterion_2() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for law in [OffspringLaw::binary(), OffspringLaw::poisson(1.0).unwrap()] {
        let table = law.extinction_table(10_000).unwrap();
        let errs: Vec<f64> = [100, 1000, 10_000].iter().map(|&n| (table.kolmogorov_ratio(n, law.sigma2()) - 1.0).abs()).collect();
        pass &= errs[2] <= 0.05 && errs[0] > errs[1] && errs[1] > errs[2];
        parts.push(format!("{}: |n q_n s2/2 - 1| = {:.2e}, {:.2e}, {:.2e}", law.name(), errs[0], errs[1], errs[2]));
    }
    Outcome { pass, detail: parts.join("; ") + " at n = 1e2, 1e3, 1e4 (tol 0.05, decreasing)" }
}

fn criterion_3() -> Outcome {
    let (mut p0, mut sum, mut m1, mut m2, mut tele) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for law in presets() {
        let s2 = law.sigma2();
        for n in 1..=100 {
            let laws = ReducedLaws::new(&law, n).unwrap();
            let table = laws.table();
            let mut prod = 1.0;
            for k in 1..=n {
                let r = laws.generation(k);
                let (qa, qb) = (table.q(n - k), table.q(n - k + 1));
                p0 = p0.max(r.p(0)).max(reduced_pgf(&law, table, k, n, 0.0).unwrap().abs());
                sum = sum.max((r.total_mass() - 1.0).abs());
                let mean = r.empirical_moment(1);
                m1 = m1.max((mean - qa / qb).abs() / (qa / qb));
                let second = qa * qa / qb * s2 + qa / qb;
                m2 = m2.max((r.empirical_moment(2) - second).abs() / second);
                prod *= mean;
                let target = table.q(n - k) / table.q(n);
                tele = tele.max((prod - target).abs() / target);
            }
        }
    }
    let pass = p0 <= f64::EPSILON && sum <= 1e-10 && m1 <= 1e-9 && m2 <= 1e-9 && tele <= 1e-9;
    Outcome {
        pass,
        detail: format!(
            "max p_0 = {p0:.1e}, |sum-1| = {sum:.1e}, rel m_1 err = {m1:.1e}, rel m_2 err = {m2:.1e}, telescoping = {tele:.1e} (n <= 100, three laws)"
        ),
    }
}

fn criterion_4() -> Outcome {
    let law = OffspringLaw::geometric(0.5).unwrap();
    let nu = DisplacementLaw::Normal;
    let (n, reps) = (20, 20_000);
    let cond = run_conditioned(&law, nu, n, &[], reps, SEED, 0, usize::MAX, false).unwrap();
    let (counts, picks) = run_rejection(&law, nu, n, reps, SEED, 0).unwrap();
    let chi = chi_square_homogeneity(&histogram(&cond.counts), &histogram(&counts), 5.0);
    let ks = ks_two_sample(&cond.picks, &picks);
    Outcome {
        pass: chi.p_value > 1e-3 && ks.p_value > 1e-3,
        detail: format!(
            "n = 20, 2e4 reps/side: leaf-count chi2 = {:.1} on {} dof, p = {:.3}; position KS D = {:.4}, p = {:.3} (level 1e-3)",
            chi.statistic, chi.dof, chi.p_value, ks.statistic, ks.p_value
        ),
    }
}

fn criterion_5() -> Outcome {
    let law = OffspringLaw::geometric(0.5).unwrap();
    let n = 100;
    let xs = [-1.0, 0.0, 1.0];
    let run = run_conditioned(&law, DisplacementLaw::Normal, n, &xs, 100_000, SEED, 0, usize::MAX, false).unwrap();
    let qn = law.extinction_table(n).unwrap().q(n);
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, x) in xs.iter().enumerate() {
        let exact = normal::cdf(*x) / (n as f64 * qn);
        let e = run.moment(i, 1);
        let z = (e.mean - exact).abs() / e.stderr;
        pass &= z <= 3.0;
        parts.push(format!("x={x}: {:.5} vs {exact:.5} ({z:.2} se)", e.mean));
    }
    Outcome { pass, detail: parts.join("; ") + " (tol 3 se, 1e5 reps)" }
}

fn criterion_6() -> Outcome {
    let spec = QuadratureSpec::default();
    let grid = build_default_grid(2.0, 6, &spec).unwrap();
    let cf = grid.closed_form_error();
    let oracle = brownian_oracle_mu2(0.0, 2.0, 1_000_000, SEED);
    let mu2 = grid.mu(2, 0.0).unwrap();
    let z = (mu2 - oracle.mean).abs() / oracle.stderr;
    let grid4 = build_default_grid(4.0, 6, &spec).unwrap();
    let mut hom = 0.0f64;
    for i in 1..=6 {
        for a in 0..grid.t_nodes.len() {
            for (v2, v4) in grid.node_values(i, a).iter().zip(grid4.node_values(i, a)) {
                let expect = 2f64.powi(i as i32) * v2;
                // subnormal tails carry no relative precision
                if expect >= f64::MIN_POSITIVE {
                    hom = hom.max((v4 - expect).abs() / expect);
                }
            }
            let expect = 2f64.powi(i as i32) * grid.plus_inf(i, a);
            hom = hom.max((grid4.plus_inf(i, a) - expect).abs() / expect);
        }
    }
    Outcome {
        pass: cf <= 1e-3 && z <= 3.0 && hom <= 1e-6,
        detail: format!(
            "max |mu_i^t(inf) - i!(1-t)^(i-1)| = {cf:.2e} (tol 1e-3); mu_2(0) = {mu2:.5} vs oracle {:.5} +- {:.5} ({z:.2} se, tol 3); homogeneity rel err = {hom:.1e} (tol 1e-6)",
            oracle.mean, oracle.stderr
        ),
    }
}

fn criterion_7() -> Outcome {
    let law = OffspringLaw::geometric(0.5).unwrap();
    let xs = [-1.0, 0.0, 1.0, f64::INFINITY];
    let run = run_conditioned(&law, DisplacementLaw::Normal, 2000, &xs, 100_000, SEED, 0, usize::MAX, false).unwrap();
    let grid = build_default_grid(2.0, 3, &QuadratureSpec::default()).unwrap();
    let mut pass = run.failures == 0;
    let mut worst = (0.0f64, String::new());
    for (i, &x) in xs[..3].iter().enumerate() {
        for r in 1..=3 {
            let target = grid.mu(r, x).unwrap();
            let e = run.moment(i, r as i32);
            let diff = (e.mean - target).abs();
            let allowed = (4.0 * e.stderr).max(0.03 * target);
            pass &= diff <= allowed;
            if diff / allowed > worst.0 {
                worst = (diff / allowed, format!("r={r}, x={x}: {:.4} vs {target:.4}", e.mean));
            }
        }
    }
    let ks = ks_one_sample(&run.column(3), |y| if y <= 0.0 { 0.0 } else { -(-y).exp_m1() });
    pass &= ks.statistic < 0.02;
    Outcome {
        pass,
        detail: format!(
            "n = 2000, 1e5 reps: worst moment uses {:.2} of its max(4 se, 3%) allowance ({}); Yaglom KS D = {:.4} (tol 0.02)",
            worst.0, worst.1, ks.statistic
        ),
    }
}

fn criterion_8() -> Outcome {
    let xs = [-1.0, 0.0, 1.0];
    let ladder = [0.9, 0.99, 0.999];
    let sample = BbmSample::run(&ladder, &xs, 100_000, SEED, 0, 10_000_000).unwrap();
    let grid = build_default_grid(2.0, 3, &QuadratureSpec::default()).unwrap();
    let mut pass = true;
    let mut worst = (0.0f64, String::new());
    for (i, &x) in xs.iter().enumerate() {
        for r in 1..=3 {
            let target = grid.mu(r, x).unwrap();
            let e = sample.moment(2, i, r as i32);
            let z = (e.mean - target).abs() / e.stderr;
            pass &= z <= 4.0;
            if z > worst.0 {
                worst = (z, format!("r={r}, x={x}: {:.4} vs {target:.4}", e.mean));
            }
        }
    }
    let profile = bbm_bias_profile(&sample, &grid, 1.0, 3);
    let shrinks = bias_shrinks(&profile);
    pass &= shrinks;
    let trend = profile.iter().map(|(d, _)| format!("{d:.4}")).collect::<Vec<_>>().join(" -> ");
    Outcome {
        pass,
        detail: format!(
            "t_eval = 0.999, 1e5 reps: worst |z| = {:.2} ({}), tol 4; mean rel. discrepancy along 0.9/0.99/0.999: {trend} ({})",
            worst.0,
            worst.1,
            if shrinks { "shrinking" } else { "not shrinking" }
        ),
    }
}

fn criterion_9() -> Outcome {
    let mut cfg = RunConfig::default();
    for (k, v) in [("n", "60"), ("reps", "2000"), ("bbm_reps", "2000"), ("t_eval", "0.9,0.99"), ("t_intervals", "32"), ("x_step", "0.1"), ("r_max", "3")] {
        cfg.set(k, v).unwrap();
    }
    cfg.workers = 1;
    let a = run_compare(&cfg).unwrap();
    cfg.workers = 8;
    let b = run_compare(&cfg).unwrap();
    let same = a.file("compare.csv") == b.file("compare.csv");
    let rows = a.file("compare.csv").map(|f| f.iter().filter(|&&c| c == b'\n').count() - 1).unwrap_or(0);
    Outcome { pass: same, detail: format!("compare.csv ({rows} rows) with 1 vs 8 workers: {}", if same { "byte-identical" } else { "DIFFERENT" }) }
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome, Duration); 9] = [
        (1, "extinction exactness", criterion_1, Duration::from_secs(1)),
        (2, "Kolmogorov asymptotic", criterion_2, Duration::from_secs(1)),
        (3, "reduced-law integrity", criterion_3, Duration::from_secs(10)),
        (4, "sampler oracle equivalence", criterion_4, Duration::from_secs(120)),
        (5, "finite-n many-to-one identity", criterion_5, Duration::from_secs(120)),
        (6, "moment-grid anchors", criterion_6, Duration::from_secs(60)),
        (7, "convergence to the limit moments", criterion_7, Duration::from_secs(600)),
        (8, "BBM cross-route closure", criterion_8, Duration::from_secs(600)),
        (9, "determinism across worker counts", criterion_9, Duration::from_secs(60)),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, run, limit) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let ok = out.pass && took <= limit;
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {id} ({name}): {} - {}; runtime {:.1}s (limit {}s)",
            if ok { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    }
}
