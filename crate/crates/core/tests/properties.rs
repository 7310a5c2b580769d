use brw_core::config::RunConfig;
use brw_core::harness::{histogram, run_conditioned, run_rejection};
use brw_core::moments::{build_default_grid, QuadratureSpec, TimeNodes};
use brw_core::rng::{substream, Route};
use brw_core::sampler::ConditionedSampler;
use brw_core::spine::{many_to_one_moment, many_to_two_moment};
use brw_core::stats::{chi_square_homogeneity, ks_two_sample};
use brw_core::{DisplacementLaw, OffspringLaw, ReducedLaws};
use proptest::prelude::*;

fn presets() -> Vec<OffspringLaw> {
    vec![OffspringLaw::geometric(0.5).unwrap(), OffspringLaw::binary(), OffspringLaw::poisson(1.0).unwrap()]
}

#[test]
fn conditioned_sampler_matches_rejection_across_laws_and_horizons() {
    let nu = DisplacementLaw::Normal;
    for law in presets() {
        for n in [5, 10, 20] {
            let seed = 1000 + n as u64;
            let cond = run_conditioned(&law, nu, n, &[], 6000, seed, 0, usize::MAX, false).unwrap();
            let (counts, picks) = run_rejection(&law, nu, n, 6000, seed, 0).unwrap();
            let chi = chi_square_homogeneity(&histogram(&cond.counts), &histogram(&counts), 5.0);
            let ks = ks_two_sample(&cond.picks, &picks);
            assert!(chi.p_value > 1e-4, "{} n={n}: chi2 p = {}", law.name(), chi.p_value);
            assert!(ks.p_value > 1e-4, "{} n={n}: KS p = {}", law.name(), ks.p_value);
        }
    }
}

#[test]
fn sampled_trees_are_well_formed() {
    for law in presets() {
        let sampler = ConditionedSampler::new(&law, DisplacementLaw::Rademacher, 12).unwrap();
        let mut rng = substream(7, Route::Conditioned, 0);
        for _ in 0..200 {
            let tree = sampler.sample_tree(&mut rng).unwrap();
            assert_eq!(tree.check(), None);
            assert!(tree.occupation().count() >= 1);
            assert_eq!(tree.label(0), Vec::<u32>::new());
        }
    }
}

#[test]
fn topology_does_not_depend_on_displacement() {
    let law = OffspringLaw::geometric(0.5).unwrap();
    let base = run_conditioned(&law, DisplacementLaw::Normal, 15, &[], 8000, 11, 0, usize::MAX, false).unwrap();
    for nu in [DisplacementLaw::Rademacher, DisplacementLaw::Uniform] {
        let other = run_conditioned(&law, nu, 15, &[], 8000, 12, 0, usize::MAX, false).unwrap();
        let chi = chi_square_homogeneity(&histogram(&base.counts), &histogram(&other.counts), 5.0);
        assert!(chi.p_value > 1e-4, "{nu}: p = {}", chi.p_value);
    }
}

#[test]
fn simulated_moments_agree_with_spine_formulas() {
    let law = OffspringLaw::geometric(0.5).unwrap();
    let xs = [-1.0, 0.0, 1.0];
    for nu in [DisplacementLaw::Normal, DisplacementLaw::Rademacher] {
        for n in [10, 100] {
            let run = run_conditioned(&law, nu, n, &xs, 40_000, 99 + n as u64, 0, usize::MAX, false).unwrap();
            for (i, &x) in xs.iter().enumerate() {
                let m1 = many_to_one_moment(&law, nu, n, x, None).unwrap();
                let m2 = many_to_two_moment(&law, nu, n, x, 32, None).unwrap();
                assert!(m1.exact && m2.exact);
                let z1 = run.moment(i, 1).z_score(m1.value);
                let z2 = run.moment(i, 2).z_score(m2.value);
                assert!(z1.abs() < 4.0, "{nu} n={n} x={x}: first moment z = {z1}");
                assert!(z2.abs() < 4.0, "{nu} n={n} x={x}: second moment z = {z2}");
            }
        }
    }
}

#[test]
fn grid_converges_under_refinement() {
    let coarse = QuadratureSpec { hermite_nodes: 32, time: TimeNodes::Graded { intervals: 64, power: 2.0 }, ..QuadratureSpec::default() };
    let fine = QuadratureSpec {
        hermite_nodes: 64,
        legendre_nodes: 128,
        time: TimeNodes::Graded { intervals: 128, power: 2.0 },
        ..QuadratureSpec::default()
    };
    let a = build_default_grid(2.0, 4, &coarse).unwrap();
    let b = build_default_grid(2.0, 4, &fine).unwrap();
    let mut worst = 0.0f64;
    for r in 1..=4 {
        for k in -30..=30 {
            let x = k as f64 * 0.1;
            worst = worst.max((a.mu(r, x).unwrap() - b.mu(r, x).unwrap()).abs());
        }
    }
    assert!(worst < 5e-4, "refinement changed values by {worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reduced_pmfs_are_distributions(a in 0.05f64..0.5, n in 1usize..60) {
        let law = OffspringLaw::from_pmf(vec![a, 1.0 - 2.0 * a, a]).unwrap();
        let laws = ReducedLaws::new(&law, n).unwrap();
        for k in 1..=n {
            let r = laws.generation(k);
            prop_assert_eq!(r.p(0), 0.0);
            prop_assert!((r.total_mass() - 1.0).abs() < 1e-10);
            prop_assert!(r.pmf().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn survival_probabilities_decrease(a in 0.05f64..0.3, n in 1usize..500) {
        let law = OffspringLaw::from_pmf(vec![2.0 * a, 1.0 - 3.0 * a, 0.0, a]).unwrap();
        let table = law.extinction_table(n).unwrap();
        prop_assert_eq!(table.q(0), 1.0);
        for k in 1..=n {
            prop_assert!(table.q(k) <= table.q(k - 1));
            prop_assert!(table.q(k) > 0.0);
        }
    }

    #[test]
    fn occupation_statistic_is_monotone(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let sampler = ConditionedSampler::new(&OffspringLaw::binary(), DisplacementLaw::Normal, 8).unwrap();
        let sample = sampler.sample(&mut substream(seed, Route::Conditioned, 0)).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(sample.statistic(lo) <= sample.statistic(hi));
        prop_assert_eq!(sample.statistic(f64::NEG_INFINITY), 0.0);
        prop_assert!(sample.positions().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn config_round_trips(seed in any::<u64>(), reps in 1u64..1_000_000, n in 1usize..5000) {
        let mut cfg = RunConfig::default();
        cfg.set("seed", &seed.to_string()).unwrap();
        cfg.set("reps", &reps.to_string()).unwrap();
        cfg.set("n", &n.to_string()).unwrap();
        let back = RunConfig::from_kv(&cfg.to_kv()).unwrap();
        prop_assert_eq!(back.to_kv(), cfg.to_kv());
    }
}
