//! Command bodies. Each returns its output tables without touching the file
//! system.

use astoc_core::complexity::{expected_toc_bound, highprob_toc_bound, accumulate_toc, TocSummary};
use astoc_core::framework::{run_adaptive, AlgoConfig, StoppingRule};
use astoc_core::oracles::{CostModel, OracleSuite};
use astoc_core::problems::ProblemClass;
use astoc_core::rng::{replication_seed, seeded};
use astoc_core::stats::{quantile_sorted, sorted, Proportion, Z_99};
use astoc_core::walk::{
    gamma_threshold, hitting_prob_bound, hitting_prob_exact, simulate_walk, stepsize_lower_bound, WalkParams,
};

use crate::cli::{
    CostsArgs, GammaPolicy, HittingArgs, MethodChoice, OptimizeArgs, Outputs, SweepArgs, WalkArgs,
};
use crate::error::{CliError, CliResult};
use crate::mc;
use crate::table::{opt_real, real, Table};

fn require(ok: bool, msg: impl FnOnce() -> String) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Validation(msg()))
    }
}

fn bit(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

pub fn walk(a: &WalkArgs) -> CliResult<Outputs> {
    require(a.n >= 2, || "--n must be at least 2".into())?;
    require(a.reps >= 1, || "--reps must be at least 1".into())?;
    require(!a.gammas.is_empty(), || "--gammas is empty".into())?;
    let params: Vec<WalkParams> = a
        .gammas
        .iter()
        .map(|&g| WalkParams::new(a.p, g, a.alpha_bar, a.omega))
        .collect::<Result<_, _>>()?;

    // one representative path, shared by every gamma
    let path = simulate_walk(a.p, a.n, &mut seeded(a.seed))?;
    let maxima = mc::walk_max_levels(a.p, a.n, a.reps, a.seed)?;

    let mut out = Vec::new();
    let mut summary = Table::new(&[
        "gamma",
        "alpha_star",
        "level",
        "success_prob",
        "dip_fraction",
        "dip_ci_halfwidth",
        "reps",
    ]);
    for w in &params {
        let floor = stepsize_lower_bound(w, a.n)?;
        let mut t = Table::new(&["k", "alpha_walk_min_so_far", "alpha_star"]);
        let mut top = 0;
        for (k, &z) in path.states.iter().enumerate() {
            top = top.max(z);
            t.push(vec![
                k.to_string(),
                real(w.alpha_bar * w.gamma.powi(top as i32)),
                real(floor.alpha_star),
            ]);
        }
        out.push((format!("walk_gamma_{}.csv", w.gamma), t));

        let dips = maxima
            .iter()
            .filter(|&&m| w.alpha_bar * w.gamma.powi(m as i32) < floor.alpha_star)
            .count() as u64;
        let prop = Proportion::new(dips, a.reps);
        summary.push(vec![
            real(w.gamma),
            real(floor.alpha_star),
            floor.level.to_string(),
            real(floor.success_prob),
            opt_real(prop.estimate()),
            real(prop.wald_halfwidth(Z_99)),
            a.reps.to_string(),
        ]);
    }
    out.push(("walk_summary.csv".into(), summary));
    Ok(out)
}

pub fn hitting(a: &HittingArgs) -> CliResult<Outputs> {
    require(a.n >= 1, || "--n must be at least 1".into())?;
    require(a.reps >= 1, || "--reps must be at least 1".into())?;
    // validates p for the bound
    hitting_prob_bound(a.p, 1, a.n)?;
    let maxima = mc::walk_max_levels(a.p, a.n, a.reps, a.seed)?;
    let mut t = Table::new(&["l", "exact", "bound", "mc_estimate", "mc_ci_halfwidth"]);
    for l in 0..=a.l_max {
        let exact = hitting_prob_exact(a.p, l, a.n)?;
        let bound = if l == 0 { 1.0 } else { hitting_prob_bound(a.p, l, a.n)? };
        if exact > bound * (1.0 + 1e-12) + 1e-15 {
            return Err(CliError::Assertion(format!(
                "exact hitting probability {exact:e} exceeds its bound {bound:e} at p = {}, l = {l}, n = {}",
                a.p, a.n
            )));
        }
        let hits = maxima.iter().filter(|&&m| m as usize >= l).count() as u64;
        let prop = Proportion::new(hits, a.reps);
        t.push(vec![
            l.to_string(),
            real(exact),
            real(bound),
            opt_real(prop.estimate()),
            real(prop.wald_halfwidth(Z_99)),
        ]);
    }
    Ok(vec![("hitting.csv".into(), t)])
}

pub fn optimize(a: &OptimizeArgs) -> CliResult<Outputs> {
    let problem = a.problem.build()?;
    let class: ProblemClass = a.algo.class.into();
    let choice = a.oracle.choice(a.algo.method);
    let costs = a.oracle.cost_model(choice, problem.noise(), a.epsilon, class)?;
    let config = a.algo.config(1.0);
    let stopping = StoppingRule {
        epsilon: a.epsilon,
        class,
    };
    let trace = run_adaptive(
        &problem,
        &a.algo.method(),
        &OracleSuite::new(costs),
        &config,
        &a.algo.start_point(problem.dim()),
        stopping,
    )?;

    let mut t = Table::new(&["k", "alpha", "success", "cost0", "cost1", "true_grad_norm", "true_gap"]);
    for r in &trace.records {
        t.push(vec![
            r.k.to_string(),
            real(r.alpha),
            bit(r.success),
            r.cost0.to_string(),
            r.cost1.to_string(),
            real(r.true_grad_norm),
            opt_real(r.true_gap),
        ]);
    }

    let toc = accumulate_toc(&trace);
    let mut s = Table::new(&["T_eps", "toc0", "toc1", "toc"]);
    s.comments = problem.descriptor().lines().map(str::to_string).collect();
    s.comments.extend([
        format!("method={}", a.algo.method().name()),
        format!("oracle={}", format!("{choice:?}").to_lowercase()),
        format!("class={}", class.name()),
        format!("epsilon={}", real(a.epsilon)),
        format!("seed={}", a.algo.seed),
    ]);
    s.push(vec![
        trace.stopping_iteration.map(|k| k.to_string()).unwrap_or_default(),
        toc.toc0.to_string(),
        toc.toc1.to_string(),
        toc.toc.to_string(),
    ]);
    Ok(vec![("trace.csv".into(), t), ("summary.csv".into(), s)])
}

/// Largest `alpha0 gamma^j` not above `limit`.
fn lattice_below(alpha0: f64, gamma: f64, limit: f64) -> f64 {
    let mut a = alpha0;
    while a > limit {
        a *= gamma;
    }
    a
}

pub fn sweep(a: &SweepArgs) -> CliResult<Outputs> {
    require(a.reps >= 1, || "--reps must be at least 1".into())?;
    require(!a.epsilons.is_empty(), || "--epsilons is empty".into())?;
    require(a.epsilons.iter().all(|&e| e > 0.0), || "tolerances must be > 0".into())?;
    require((0.0..=1.0).contains(&a.horizon_quantile), || "--horizon-quantile must lie in [0, 1]".into())?;
    if a.gamma_policy == GammaPolicy::Threshold {
        require(a.horizon.is_some(), || "the threshold gamma policy needs --horizon".into())?;
    }
    let problem = a.problem.build()?;
    let class: ProblemClass = a.algo.class.into();
    let choice = a.oracle.choice(a.algo.method);
    let storm = a.algo.method == MethodChoice::Storm;
    let start = a.algo.start_point(problem.dim());

    let mut rows = Table::new(&[
        "epsilon",
        "mean_T",
        "mean_toc0",
        "mean_toc1",
        "bound_expected",
        "bound_highprob",
        "exceed_frac",
    ]);
    let mut report = Table::new(&[
        "epsilon",
        "n",
        "gamma",
        "bound_expected",
        "bound_highprob",
        "failure_prob",
        "mc_mean",
        "mc_p50",
        "mc_p95",
        "exceed_frac",
    ]);

    for (idx, &eps) in a.epsilons.iter().enumerate() {
        let costs = a.oracle.cost_model(choice, problem.noise(), eps, class)?;
        let default_alpha = if storm { eps / a.zeta } else { 1.0 };
        let base = a.algo.config(default_alpha);
        let walk_p = match (a.walk_p, &costs) {
            (Some(p), _) => p,
            (None, CostModel::Storm(spec)) => spec.success_probability(),
            (None, _) => 0.8,
        };
        let alpha_bar = a.alpha_bar.unwrap_or(if storm {
            eps / a.zeta
        } else {
            lattice_below(base.alpha0, base.gamma, (1.0 - base.theta) / problem.smoothness())
        });
        let gamma = match a.gamma_policy {
            GammaPolicy::Fixed => base.gamma,
            GammaPolicy::Threshold => gamma_threshold(walk_p, a.horizon.unwrap_or(2), a.omega, a.beta)?,
        };
        let config = AlgoConfig {
            gamma,
            max_iterations: a.horizon.unwrap_or(base.max_iterations),
            ..base
        };
        let stopping = StoppingRule { epsilon: eps, class };
        let records = mc::toc_records(
            &problem,
            &a.algo.method(),
            &OracleSuite::new(costs.clone()),
            &config,
            &start,
            stopping,
            a.reps,
            replication_seed(a.algo.seed, idx as u64),
        )?;

        let stop_times: Vec<f64> = records
            .iter()
            .map(|r| if r.stopped { r.iterations_used as f64 } else { f64::INFINITY })
            .collect();
        let n = match a.horizon {
            Some(h) => h,
            None => {
                let q = quantile_sorted(&sorted(&stop_times), a.horizon_quantile).unwrap_or(f64::INFINITY);
                if q.is_finite() { q.ceil() as usize } else { config.max_iterations }
            }
        }
        .max(2);
        let beyond = stop_times.iter().filter(|&&t| t > n as f64).count() as f64 / a.reps as f64;

        let walk = WalkParams::new(walk_p, gamma, alpha_bar, a.omega)?;
        let expected = expected_toc_bound(&costs, &walk, n)?;
        let hp = highprob_toc_bound(&costs, &walk, n, beyond)?;
        let summary = TocSummary::new(records, Some(&hp))?;
        let exceed = summary.exceed_frac.unwrap_or(0.0);

        rows.push(vec![
            real(eps),
            real(summary.mean_iterations),
            real(summary.mean_toc0),
            real(summary.mean_toc1),
            real(expected.bound_value),
            real(hp.bound_value),
            real(exceed),
        ]);
        report.push(vec![
            real(eps),
            n.to_string(),
            real(gamma),
            real(expected.bound_value),
            real(hp.bound_value),
            real(hp.failure_prob),
            real(summary.mean_toc),
            real(summary.p50),
            real(summary.p95),
            real(exceed),
        ]);
    }
    let mut out = vec![("sweep.csv".to_string(), rows)];
    if a.report {
        out.push(("sweep_report.csv".into(), report));
    }
    Ok(out)
}

pub fn costs(a: &CostsArgs) -> CliResult<Outputs> {
    require(a.points >= 2, || "--points must be at least 2".into())?;
    require(a.alpha_lo > 0.0 && a.alpha_hi >= a.alpha_lo, || "need 0 < alpha-lo <= alpha-hi".into())?;
    let noise = a.problem.noise_spec();
    noise.validate()?;
    let choice = a.oracle.choice(MethodChoice::Storm);
    let model = a.oracle.cost_model(choice, &noise, a.epsilon, a.class.into())?;
    model.check_monotone(a.alpha_lo, a.alpha_hi, a.points)?;
    let mut t = Table::new(&["alpha", "oc0", "oc1"]);
    let ratio = (a.alpha_hi / a.alpha_lo).ln() / (a.points - 1) as f64;
    for i in 0..a.points {
        let alpha = if i + 1 == a.points { a.alpha_hi } else { a.alpha_lo * (ratio * i as f64).exp() };
        let (b0, b1) = model.batch_sizes(alpha)?;
        t.push(vec![real(alpha), b0.to_string(), b1.to_string()]);
    }
    Ok(vec![("costs.csv".into(), t)])
}
