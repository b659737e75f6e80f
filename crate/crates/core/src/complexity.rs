//! Total oracle complexity: realized sample counts and the bounds on them.
//!
//! Bounds are evaluated numerically from a cost model and walk parameters.
//! The per-iteration cost `oc(alpha)` is the full sample count of one
//! iteration, two value calls plus one gradient call.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::framework::{run_adaptive, AlgoConfig, Method, RunTrace, StoppingRule};
use crate::math;
use crate::oracles::{CostModel, OracleSuite, SassOracleSpec, StormOracleSpec};
use crate::problems::{NoiseSpec, Problem, ProblemClass};
use crate::rng::replication_seed;
use crate::stats;
use crate::walk::{gamma_threshold, stepsize_lower_bound, WalkParams};

/// Samples used by a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TocRecord {
    pub toc0: u64,
    pub toc1: u64,
    pub toc: u64,
    pub iterations_used: usize,
    pub stopped: bool,
}

/// Sums the sample counts of every iteration executed before the run ended.
pub fn accumulate_toc(trace: &RunTrace) -> TocRecord {
    accumulate_toc_until(trace, usize::MAX)
}

/// As [`accumulate_toc`], counting only iterations `k < horizon`.
pub fn accumulate_toc_until(trace: &RunTrace, horizon: usize) -> TocRecord {
    let used: Vec<_> = trace.executed().iter().filter(|r| r.k < horizon).collect();
    let toc0 = used.iter().map(|r| r.cost0).sum();
    let toc1 = used.iter().map(|r| r.cost1).sum();
    TocRecord {
        toc0,
        toc1,
        toc: toc0 + toc1,
        iterations_used: used.len(),
        stopped: trace.stopping_iteration.is_some_and(|t| t <= horizon),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Expected,
    HighProbability,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundKind::Expected => "expected",
            BoundKind::HighProbability => "high_probability",
        }
    }
}

/// Parameters a bound was evaluated at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub walk: WalkParams,
    pub n: usize,
    /// Step-size floor used by a high-probability bound.
    pub alpha_floor: Option<f64>,
    pub prob_t_exceeds_n: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub bound_value: f64,
    /// Probability that the bound fails; 0 for expectation bounds.
    pub failure_prob: f64,
    pub kind: BoundKind,
    pub inputs: BoundInputs,
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::invalid("n", "must be at least 1"))
    } else {
        Ok(())
    }
}

/// `min(1, n (q/p)^l + c (2q)^l)`, the weight of level `l` in the expectation
/// bound.
pub fn level_weight(params: &WalkParams, n: usize, l: usize) -> f64 {
    let q = params.q();
    let lf = l as f64;
    let pw = |x: f64| if x == 0.0 { 0.0 } else { math::exp(lf * math::ln(x)) };
    (n as f64 * pw(q / params.p) + params.c() * pw(2.0 * q)).min(1.0)
}

/// Expectation bound on the samples used in the first `n` iterations, for an
/// arbitrary per-iteration cost `oc`.
///
/// Evaluates `n sum_{l=1..n} w_l oc(alpha_bar gamma^l) + n oc(alpha_bar)`
/// with `w_l` from [`level_weight`]. Levels whose weight underflows to zero
/// are skipped. Fails if `oc` decreases along the evaluated levels.
pub fn expected_toc_bound_with<F>(oc: F, params: &WalkParams, n: usize) -> Result<BoundReport>
where
    F: Fn(f64) -> Result<f64>,
{
    params.validate()?;
    check_n(n)?;
    let nf = n as f64;
    let ln_gamma = math::ln(params.gamma);
    let ln_bar = math::ln(params.alpha_bar);
    let top = oc(params.alpha_bar)?;
    let mut prev = top;
    let mut sum = 0.0;
    for l in 1..=n {
        let w = level_weight(params, n, l);
        if w == 0.0 {
            break;
        }
        let alpha = math::exp(ln_bar + l as f64 * ln_gamma);
        if alpha == 0.0 {
            return Err(Error::invalid(
                "n",
                format!("step size alpha_bar gamma^{l} underflows while its weight is {w:e}"),
            ));
        }
        let cost = oc(alpha)?;
        if cost < prev {
            return Err(Error::AssumptionViolation(format!(
                "cost decreases as alpha shrinks to {alpha:e}: {prev} -> {cost}"
            )));
        }
        prev = cost;
        sum += w * cost;
    }
    Ok(BoundReport {
        bound_value: nf * sum + nf * top,
        failure_prob: 0.0,
        kind: BoundKind::Expected,
        inputs: BoundInputs {
            walk: *params,
            n,
            alpha_floor: None,
            prob_t_exceeds_n: None,
        },
    })
}

fn model_cost(cost: &CostModel) -> impl Fn(f64) -> Result<f64> + '_ {
    move |alpha| {
        let (c0, c1) = cost.iteration_cost(alpha)?;
        Ok(c0 as f64 + c1 as f64)
    }
}

/// [`expected_toc_bound_with`] for a cost model.
pub fn expected_toc_bound(cost: &CostModel, params: &WalkParams, n: usize) -> Result<BoundReport> {
    expected_toc_bound_with(model_cost(cost), params, n)
}

fn failure_probability(params: &WalkParams, n: usize, prob_t_exceeds_n: f64) -> f64 {
    let nf = n as f64;
    let walk_fail =
        math::pow(nf, -params.omega) + params.c() * math::pow(nf, -(1.0 + params.omega));
    (prob_t_exceeds_n + walk_fail).min(1.0)
}

fn check_prob(prob: f64) -> Result<()> {
    if (0.0..=1.0).contains(&prob) {
        Ok(())
    } else {
        Err(Error::invalid("prob_t_exceeds_n", format!("must lie in [0, 1], got {prob}")))
    }
}

/// `n oc(alpha*(n))`, holding except with probability
/// `P(T > n) + n^{-omega} + c n^{-(1+omega)}`.
pub fn highprob_toc_bound_with<F>(oc: F, params: &WalkParams, n: usize, prob_t_exceeds_n: f64) -> Result<BoundReport>
where
    F: Fn(f64) -> Result<f64>,
{
    check_prob(prob_t_exceeds_n)?;
    let floor = stepsize_lower_bound(params, n)?;
    Ok(BoundReport {
        bound_value: n as f64 * oc(floor.alpha_star)?,
        failure_prob: failure_probability(params, n, prob_t_exceeds_n),
        kind: BoundKind::HighProbability,
        inputs: BoundInputs {
            walk: *params,
            n,
            alpha_floor: Some(floor.alpha_star),
            prob_t_exceeds_n: Some(prob_t_exceeds_n),
        },
    })
}

pub fn highprob_toc_bound(cost: &CostModel, params: &WalkParams, n: usize, prob_t_exceeds_n: f64) -> Result<BoundReport> {
    highprob_toc_bound_with(model_cost(cost), params, n, prob_t_exceeds_n)
}

/// High-probability bound with `gamma` at the threshold for `beta`: the
/// floor is then at least `beta alpha_bar`, giving `n oc(beta alpha_bar)`.
/// The `gamma` in `params` is replaced by the threshold.
pub fn threshold_toc_bound(
    cost: &CostModel,
    params: &WalkParams,
    n: usize,
    beta: f64,
    prob_t_exceeds_n: f64,
) -> Result<BoundReport> {
    check_prob(prob_t_exceeds_n)?;
    let gamma = gamma_threshold(params.p, n, params.omega, beta)?;
    let walk = WalkParams { gamma, ..*params };
    walk.validate()?;
    let alpha = beta * params.alpha_bar;
    Ok(BoundReport {
        bound_value: n as f64 * model_cost(cost)(alpha)?,
        failure_prob: failure_probability(&walk, n, prob_t_exceeds_n),
        kind: BoundKind::HighProbability,
        inputs: BoundInputs {
            walk,
            n,
            alpha_floor: Some(alpha),
            prob_t_exceeds_n: Some(prob_t_exceeds_n),
        },
    })
}

/// `min(1, expected_iterations / n)`.
pub fn markov_tail(expected_iterations: f64, n: usize) -> Result<f64> {
    if !(expected_iterations >= 0.0) {
        return Err(Error::invalid("expected_iterations", "must be >= 0"));
    }
    check_n(n)?;
    Ok((expected_iterations / n as f64).min(1.0))
}

/// Both bounds for one configuration, with growth exponents where defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityReport {
    pub expected: BoundReport,
    pub high_probability: BoundReport,
    pub p: f64,
    pub alpha_bar: f64,
    /// Exponent of `n` in the value-sample growth.
    pub toc0_exponent: f64,
    /// Exponent of `n` in the gradient-sample growth.
    pub toc1_exponent: f64,
}

/// Trust-region bounds with `p = 1 - delta0 - delta1` and
/// `alpha_bar = epsilon / zeta`.
pub fn storm_complexity_report(
    spec: &StormOracleSpec,
    epsilon: f64,
    zeta: f64,
    n: usize,
    gamma: f64,
    omega: f64,
    prob_t_exceeds_n: f64,
) -> Result<ComplexityReport> {
    spec.validate()?;
    if !(epsilon > 0.0) || !(zeta > 0.0) {
        return Err(Error::invalid("epsilon / zeta", "both must be > 0"));
    }
    let p = spec.success_probability();
    let alpha_bar = epsilon / zeta;
    let walk = WalkParams::new(p, gamma, alpha_bar, omega)?;
    let cost = CostModel::Storm(*spec);
    let base = math::ln(walk.q() / p);
    Ok(ComplexityReport {
        expected: expected_toc_bound(&cost, &walk, n)?,
        high_probability: highprob_toc_bound(&cost, &walk, n, prob_t_exceeds_n)?,
        p,
        alpha_bar,
        toc0_exponent: 4.0 * math::ln(gamma) / base,
        toc1_exponent: 2.0 * math::ln(gamma) / base,
    })
}

/// Step-search bounds. The walk parameters (success probability and
/// `alpha_bar`) depend on problem constants and are supplied by the caller.
/// `multiplier` scales the batch sizes as in the cost model.
#[allow(clippy::too_many_arguments)]
pub fn sass_complexity_report(
    spec: &SassOracleSpec,
    noise: &NoiseSpec,
    epsilon: f64,
    multiplier: f64,
    walk: &WalkParams,
    n: usize,
    class: ProblemClass,
    prob_t_exceeds_n: f64,
) -> Result<ComplexityReport> {
    spec.validate()?;
    walk.validate()?;
    let cost = CostModel::Sass {
        spec: *spec,
        noise: *noise,
        epsilon,
        class,
        multiplier,
    };
    let base = math::ln(walk.q() / walk.p);
    Ok(ComplexityReport {
        expected: expected_toc_bound(&cost, walk, n)?,
        high_probability: highprob_toc_bound(&cost, walk, n, prob_t_exceeds_n)?,
        p: walk.p,
        alpha_bar: walk.alpha_bar,
        toc0_exponent: 0.0,
        toc1_exponent: 2.0 * math::ln(walk.gamma) / base,
    })
}

/// Iteration horizon for the step-search method: `constant / eps^2` or
/// `constant log(1/eps)`, plus `log_{1/gamma}(alpha0 / alpha_bar)`.
pub fn sass_iteration_horizon(
    class: ProblemClass,
    constant: f64,
    epsilon: f64,
    gamma: f64,
    alpha0: f64,
    alpha_bar: f64,
) -> Result<usize> {
    if !(epsilon > 0.0 && constant > 0.0 && alpha0 > 0.0 && alpha_bar > 0.0) {
        return Err(Error::invalid("horizon", "constant, epsilon and step sizes must be > 0"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid("gamma", "must lie in (0, 1)"));
    }
    let main = match class {
        ProblemClass::Nonconvex => constant / (epsilon * epsilon),
        ProblemClass::StronglyConvex => constant * math::ln(1.0 / epsilon).max(0.0),
    };
    let warmup = (math::ln(alpha0 / alpha_bar) / math::ln(1.0 / gamma)).max(0.0);
    Ok(math::ceil(main + warmup) as usize)
}

/// One replication of a Monte Carlo study. The run seed is derived from
/// `master_seed` and `index`; the configured seed is ignored.
#[allow(clippy::too_many_arguments)]
pub fn replicate(
    problem: &Problem,
    method: &Method,
    suite: &OracleSuite,
    config: &AlgoConfig,
    start: &[f64],
    stopping: StoppingRule,
    master_seed: u64,
    index: u64,
) -> Result<RunTrace> {
    let config = AlgoConfig {
        seed: replication_seed(master_seed, index),
        ..config.clone()
    };
    run_adaptive(problem, method, suite, &config, start, stopping).map_err(|e| Error::Replication {
        index,
        source: alloc::boxed::Box::new(e),
    })
}

/// Empirical distribution of total samples over replications.
#[derive(Debug, Clone, PartialEq)]
pub struct TocSummary {
    pub records: Vec<TocRecord>,
    pub mean_toc: f64,
    pub mean_toc0: f64,
    pub mean_toc1: f64,
    pub mean_iterations: f64,
    /// Standard error of `mean_toc`.
    pub std_error: f64,
    pub p50: f64,
    pub p95: f64,
    /// Fraction of replications that stopped within the iteration cap.
    pub stopped_frac: f64,
    /// Fraction of replications exceeding the supplied bound, if any.
    pub exceed_frac: Option<f64>,
}

impl TocSummary {
    /// Order of `records` does not affect the result.
    pub fn new(records: Vec<TocRecord>, bound: Option<&BoundReport>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::invalid("replications", "must be at least 1"));
        }
        let nf = records.len() as f64;
        let toc: Vec<f64> = records.iter().map(|r| r.toc as f64).collect();
        let avg = |f: fn(&TocRecord) -> f64| records.iter().map(f).sum::<f64>() / nf;
        let mean_toc = avg(|r| r.toc as f64);
        let std_error = stats::sample_variance(&toc).map_or(0.0, |v| math::sqrt(v / nf));
        let sorted = stats::sorted(&toc);
        let exceed_frac =
            bound.map(|b| toc.iter().filter(|&&t| t > b.bound_value).count() as f64 / nf);
        Ok(TocSummary {
            mean_toc,
            mean_toc0: avg(|r| r.toc0 as f64),
            mean_toc1: avg(|r| r.toc1 as f64),
            mean_iterations: avg(|r| r.iterations_used as f64),
            std_error,
            p50: stats::quantile_sorted(&sorted, 0.5).unwrap_or(0.0),
            p95: stats::quantile_sorted(&sorted, 0.95).unwrap_or(0.0),
            stopped_frac: records.iter().filter(|r| r.stopped).count() as f64 / nf,
            exceed_frac,
            records,
        })
    }
}

/// Sequential Monte Carlo over `replications` independent runs.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_toc_sequential(
    problem: &Problem,
    method: &Method,
    suite: &OracleSuite,
    config: &AlgoConfig,
    start: &[f64],
    stopping: StoppingRule,
    replications: u64,
    master_seed: u64,
    bound: Option<&BoundReport>,
) -> Result<TocSummary> {
    let records = (0..replications)
        .map(|i| {
            replicate(problem, method, suite, config, start, stopping, master_seed, i)
                .map(|t| accumulate_toc(&t))
        })
        .collect::<Result<Vec<_>>>()?;
    TocSummary::new(records, bound)
}
