use astoc_core::framework::*;
use astoc_core::oracles::{corruption_success_probability, CostModel, OracleSuite, StormOracleSpec};
use astoc_core::problems::{make_problem, NoiseSpec, ProblemKind};
use astoc_core::rng::{replication_seed, seeded};
use astoc_core::stats::{chi_square_homogeneity, Z_99};
use astoc_core::walk::{couple_with_trace, simulate_walk};
use astoc_core::Error;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn noisy_quadratic(dim: usize, sigma: f64) -> astoc_core::problems::Problem {
    make_problem(ProblemKind::Quadratic, dim, 4.0, NoiseSpec::uniform(sigma, sigma), 3).unwrap()
}

fn start(dim: usize) -> Vec<f64> {
    vec![1.0 / (dim as f64).sqrt(); dim]
}

#[test]
fn exact_oracles_converge() {
    let p = make_problem(ProblemKind::Quadratic, 5, 10.0, NoiseSpec::zero(), 0).unwrap();
    let cfg = AlgoConfig::default();
    let t = run_adaptive(&p, &Method::sass(), &OracleSuite::single_sample(), &cfg, &start(5), StoppingRule::strongly_convex(1e-8))
        .unwrap();
    let stop = t.stopping_iteration.expect("stops");
    assert_eq!(stop, t.records.len() - 1);
    assert!(t.records[stop].true_gap.unwrap() <= 1e-8);
    assert_eq!(stopping_time(&t, 1e-8, astoc_core::problems::ProblemClass::StronglyConvex).unwrap(), Some(stop));

    let t = run_adaptive(&p, &Method::Storm, &OracleSuite::single_sample(), &cfg, &start(5), StoppingRule::nonconvex(1e-4))
        .unwrap();
    assert!(t.stopping_iteration.is_some());
}

#[test]
fn iteration_cap_is_respected() {
    let p = noisy_quadratic(3, 1.0);
    let cfg = AlgoConfig {
        max_iterations: 25,
        ..AlgoConfig::default()
    };
    let t = run_adaptive(&p, &Method::sass(), &OracleSuite::single_sample(), &cfg, &start(3), StoppingRule::nonconvex(1e-12))
        .unwrap();
    assert_eq!(t.stopping_iteration, None);
    assert_eq!(t.executed().len(), 25);
    assert_eq!(t.records.len(), 26);
}

#[test]
fn non_finite_samples_are_reported() {
    let p = make_problem(ProblemKind::Quadratic, 2, 10.0, NoiseSpec::uniform(f64::MAX, 0.0), 0).unwrap();
    let err = run_adaptive(&p, &Method::sass(), &OracleSuite::single_sample(), &AlgoConfig::default(), &[10.0, 10.0], StoppingRule::nonconvex(1e-6))
        .unwrap_err();
    assert!(matches!(err, Error::NonFinite { .. }), "{err:?}");
}

fn corruption_setup() -> (astoc_core::problems::Problem, AlgoConfig, f64, f64, f64) {
    let (df, dg) = (0.05, 0.1);
    let p = make_problem(ProblemKind::Quadratic, 4, 4.0, NoiseSpec::bernoulli(df, dg, 1e6), 1).unwrap();
    let cfg = AlgoConfig {
        theta: 0.1,
        gamma: 0.5,
        // largest lattice point below (1 - theta) / L = 0.225
        alpha0: 0.125,
        alpha_max: 0.125,
        max_iterations: 10_000,
        ..AlgoConfig::default()
    };
    let alpha_bar = 0.125;
    (p, cfg, alpha_bar, 1.0 - df - dg, corruption_success_probability(df, dg))
}

#[test]
fn success_rate_below_alpha_bar() {
    let (p, cfg, alpha_bar, _, p_prime) = corruption_setup();
    let traces: Vec<_> = (0..300)
        .map(|i| {
            let cfg = AlgoConfig {
                seed: replication_seed(2, i),
                ..cfg.clone()
            };
            run_adaptive(&p, &Method::sass(), &OracleSuite::single_sample(), &cfg, &start(4), StoppingRule::nonconvex(1e-4)).unwrap()
        })
        .collect();
    let est = empirical_success_probability(&traces, alpha_bar);
    let (lo, hi) = est.wilson(Z_99);
    assert!(est.trials > 1000);
    assert!(lo <= p_prime && p_prime <= hi, "{p_prime} not in [{lo}, {hi}]");
}

#[test]
fn coupling_preserves_walk_law() {
    let (p, cfg, alpha_bar, p_walk, p_prime) = corruption_setup();
    let horizon = 150;
    let reps = 3000;
    let mut coupled_end = vec![0u64; 40];
    let mut free_end = vec![0u64; 40];
    let mut rng = seeded(99);
    for i in 0..reps {
        let cfg = AlgoConfig {
            seed: replication_seed(7, i),
            ..cfg.clone()
        };
        let t = run_adaptive(&p, &Method::sass(), &OracleSuite::single_sample(), &cfg, &start(4), StoppingRule::nonconvex(1e-4)).unwrap();
        let levels = t.walk_levels(alpha_bar).unwrap();
        let probs = vec![p_prime; levels.len()];
        let c = couple_with_trace(&levels, &probs, p_walk, horizon, &mut rng).unwrap();
        assert!(c.min_gap() >= 0);
        coupled_end[(c.walk.states[horizon] as usize).min(39)] += 1;
        let w = simulate_walk(p_walk, horizon, &mut rng).unwrap();
        free_end[(w.states[horizon] as usize).min(39)] += 1;
    }
    let (stat, df) = chi_square_homogeneity(&coupled_end, &free_end).unwrap();
    let pval = 1.0 - ChiSquared::new(df as f64).unwrap().cdf(stat);
    assert!(pval > 0.01, "chi2 = {stat}, df = {df}, p = {pval}");
}

#[test]
fn storm_with_trust_region_costs_runs() {
    let p = noisy_quadratic(2, 0.1);
    let suite = OracleSuite::new(CostModel::Storm(StormOracleSpec {
        kappa_ef: 1.0,
        delta0: 0.1,
        kappa_eg: 1.0,
        delta1: 0.1,
        sigma_f: 0.1,
        sigma_g: 0.1,
    }));
    assert!(run_adaptive(&p, &Method::Storm, &suite, &AlgoConfig::default(), &[1.0, 0.0], StoppingRule::nonconvex(0.1)).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn step_size_law(
        seed in any::<u64>(),
        gamma in prop::sample::select(vec![0.5f64, 0.7, 0.9]),
        cap_steps in 0i32..4,
        storm in any::<bool>(),
    ) {
        let p = noisy_quadratic(3, 0.5);
        let alpha_max = gamma.powi(-cap_steps);
        let cfg = AlgoConfig { gamma, alpha_max, alpha0: 1.0, seed, max_iterations: 300, ..AlgoConfig::default() };
        let method = if storm { Method::Storm } else { Method::sass() };
        let t = run_adaptive(&p, &method, &OracleSuite::single_sample(), &cfg, &start(3), StoppingRule::nonconvex(1e-3)).unwrap();
        for w in t.records.windows(2) {
            let (a, b) = (w[0].alpha, w[1].alpha);
            let want = if w[0].success { (a / gamma).min(alpha_max) } else { gamma * a };
            prop_assert!((b - want).abs() <= 1e-12 * want, "{a} -> {b}, success {}", w[0].success);
            prop_assert!(b <= alpha_max);
        }
        // every step size is alpha0 gamma^j
        prop_assert!(t.walk_levels(1.0).is_ok());
        let (c0, c1) = t.total_costs();
        prop_assert_eq!(c0, 2 * t.executed().len() as u64);
        prop_assert_eq!(c1, t.executed().len() as u64);
    }

    #[test]
    fn runs_are_deterministic(seed in any::<u64>()) {
        let p = noisy_quadratic(3, 0.5);
        let cfg = AlgoConfig { seed, max_iterations: 200, ..AlgoConfig::default() };
        let a = run_adaptive(&p, &Method::sass(), &OracleSuite::single_sample(), &cfg, &start(3), StoppingRule::nonconvex(1e-2)).unwrap();
        let b = run_adaptive(&p, &Method::sass(), &OracleSuite::single_sample(), &cfg, &start(3), StoppingRule::nonconvex(1e-2)).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn one_exact_step_reaches_the_minimizer() {
    let p = make_problem(ProblemKind::Quadratic, 2, 1.0, NoiseSpec::zero(), 0).unwrap();
    assert_eq!(p.value(&[2.0, 0.0]), 2.0);
    let cfg = AlgoConfig {
        theta: 0.1,
        alpha0: 1.0,
        alpha_max: 1.0,
        r: 0.0,
        ..AlgoConfig::default()
    };
    let t = run_adaptive(&p, &Method::sass(), &OracleSuite::single_sample(), &cfg, &[2.0, 0.0], StoppingRule::nonconvex(1e-3))
        .unwrap();
    assert_eq!(t.stopping_iteration, Some(1));
    assert!(t.records[0].success);
    assert_eq!(t.records[1].true_grad_norm, 0.0);

    let t = run_adaptive(&p, &Method::sass(), &OracleSuite::single_sample(), &cfg, &[0.0, 0.0], StoppingRule::nonconvex(1e-3))
        .unwrap();
    assert_eq!(t.stopping_iteration, Some(0));
    assert_eq!(t.total_costs(), (0, 0));
}

#[test]
fn exact_oracles_always_succeed_below_threshold() {
    let p = make_problem(ProblemKind::Quadratic, 3, 4.0, NoiseSpec::zero(), 0).unwrap();
    let cfg = AlgoConfig {
        alpha0: 0.125,
        alpha_max: 0.125,
        ..AlgoConfig::default()
    };
    let t = run_adaptive(&p, &Method::sass(), &OracleSuite::single_sample(), &cfg, &start(3), StoppingRule::nonconvex(1e-6))
        .unwrap();
    let est = empirical_success_probability([&t], 0.125);
    assert_eq!(est.estimate(), Some(1.0));
}
