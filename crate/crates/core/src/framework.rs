//! The generic adaptive loop.
//!
//! Each iteration draws fresh oracle estimates at the current point, builds a
//! step of size controlled by `alpha`, evaluates the trial point and either
//! moves (success: `alpha <- min(alpha / gamma, alpha_max)`) or stays
//! (failure: `alpha <- gamma alpha`). Ground truth at every iterate is
//! recorded for the stopping time; the method itself never reads it.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Metric};
use crate::math;
use crate::methods;
use crate::oracles::{CostModel, OracleSuite, Usage};
use crate::problems::{Problem, ProblemClass};
use crate::rng;
use crate::stats::Proportion;

pub const DEFAULT_MAX_ITERATIONS: usize = 1_000_000;

/// Parameters of the adaptive loop.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgoConfig {
    pub theta: f64,
    pub gamma: f64,
    /// May be `f64::INFINITY`.
    pub alpha_max: f64,
    pub alpha0: f64,
    /// Noise compensation in the decrease test.
    pub r: f64,
    /// Trust-region requirement `|g| >= theta2 alpha`.
    pub theta2: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        AlgoConfig {
            theta: 0.1,
            gamma: 0.5,
            alpha_max: 1.0,
            alpha0: 1.0,
            r: 0.0,
            theta2: 1.0,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            seed: 0,
        }
    }
}

impl AlgoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::invalid("theta", format!("must lie in (0, 1), got {}", self.theta)));
        }
        check_gamma(self.gamma)?;
        if !(self.alpha0 > 0.0) || !self.alpha0.is_finite() {
            return Err(Error::invalid("alpha0", format!("must be finite and > 0, got {}", self.alpha0)));
        }
        if !(self.alpha_max >= self.alpha0) {
            return Err(Error::invalid(
                "alpha_max",
                format!("must be >= alpha0 = {}, got {}", self.alpha0, self.alpha_max),
            ));
        }
        if !(self.r >= 0.0) || !self.r.is_finite() {
            return Err(Error::invalid("r", format!("must be finite and >= 0, got {}", self.r)));
        }
        if !(self.theta2 >= 0.0) || !self.theta2.is_finite() {
            return Err(Error::invalid("theta2", format!("must be finite and >= 0, got {}", self.theta2)));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations", "must be at least 1"));
        }
        Ok(())
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("gamma", format!("must lie in (0, 1), got {gamma}")))
    }
}

/// Step-size update of the adaptive loop on plain floats.
pub fn update_step_size(alpha: f64, success: bool, gamma: f64, alpha_max: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha", format!("must be > 0, got {alpha}")));
    }
    check_gamma(gamma)?;
    if !(alpha <= alpha_max) {
        return Err(Error::invalid("alpha", format!("{alpha} exceeds alpha_max = {alpha_max}")));
    }
    Ok(if success {
        (alpha / gamma).min(alpha_max)
    } else {
        gamma * alpha
    })
}

/// `alpha = anchor * gamma^exponent`. The anchor only changes when the cap
/// `alpha_max` binds, so the exponent tracks the lattice exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSize {
    anchor: f64,
    exponent: i64,
    gamma: f64,
    alpha_max: f64,
}

impl StepSize {
    pub fn new(alpha0: f64, gamma: f64, alpha_max: f64) -> Self {
        StepSize {
            anchor: alpha0,
            exponent: 0,
            gamma,
            alpha_max,
        }
    }

    pub fn value(&self) -> f64 {
        self.anchor * math::powi(self.gamma, self.exponent as i32)
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    pub fn advance(self, success: bool) -> Self {
        if success {
            let up = self.anchor * math::powi(self.gamma, (self.exponent - 1) as i32);
            if up >= self.alpha_max {
                StepSize {
                    anchor: self.alpha_max,
                    exponent: 0,
                    ..self
                }
            } else {
                StepSize {
                    exponent: self.exponent - 1,
                    ..self
                }
            }
        } else {
            StepSize {
                exponent: self.exponent + 1,
                ..self
            }
        }
    }
}

/// The step computation plugged into the loop.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    /// Step search with scaling matrix `H` (identity by default).
    Sass { metric: Metric },
    /// First-order trust region with a linear model.
    Storm,
}

impl Method {
    pub fn sass() -> Self {
        Method::Sass {
            metric: Metric::Identity,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Sass { .. } => "sass",
            Method::Storm => "storm",
        }
    }
}

/// Tolerance and optimality measure defining the stopping time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRule {
    pub epsilon: f64,
    pub class: ProblemClass,
}

impl StoppingRule {
    pub fn nonconvex(epsilon: f64) -> Self {
        StoppingRule {
            epsilon,
            class: ProblemClass::Nonconvex,
        }
    }

    pub fn strongly_convex(epsilon: f64) -> Self {
        StoppingRule {
            epsilon,
            class: ProblemClass::StronglyConvex,
        }
    }
}

/// One iteration (or, for the last record, the state where the run ended).
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub alpha: f64,
    pub success: bool,
    pub cost0: u64,
    pub cost1: u64,
    pub true_grad_norm: f64,
    pub true_gap: Option<f64>,
}

/// A realization of the iterate / step-size process.
///
/// `records[k]` describes iteration `k` at iterate `x_k`. The last record is
/// terminal: it holds the ground truth where the run ended, with no oracle
/// calls and `success = false`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    pub stopping_iteration: Option<usize>,
    pub config: AlgoConfig,
    pub epsilon: f64,
}

impl RunTrace {
    /// Iterations that called the oracles.
    pub fn executed(&self) -> &[IterationRecord] {
        &self.records[..self.records.len().saturating_sub(1)]
    }

    pub fn total_costs(&self) -> (u64, u64) {
        self.records
            .iter()
            .fold((0, 0), |(a, b), r| (a + r.cost0, b + r.cost1))
    }

    pub fn alphas(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.alpha)
    }

    /// Levels `Y_k` with `alpha_k = alpha_bar * gamma^{Y_k}`. Fails when a step
    /// size is off that lattice.
    pub fn walk_levels(&self, alpha_bar: f64) -> Result<Vec<i64>> {
        if !(alpha_bar > 0.0) {
            return Err(Error::invalid("alpha_bar", "must be > 0"));
        }
        let lg = math::ln(self.config.gamma);
        self.records
            .iter()
            .map(|r| {
                let y = math::round(math::ln(r.alpha / alpha_bar) / lg);
                let back = alpha_bar * math::powi(self.config.gamma, y as i32);
                if math::abs(back - r.alpha) > 1e-9 * r.alpha {
                    Err(Error::invalid(
                        "alpha_bar",
                        format!("step size {} at k = {} is not alpha_bar * gamma^j", r.alpha, r.k),
                    ))
                } else {
                    Ok(y as i64)
                }
            })
            .collect()
    }
}

/// First index whose recorded optimality measure is within `epsilon`.
pub fn stopping_time(trace: &RunTrace, epsilon: f64, class: ProblemClass) -> Result<Option<usize>> {
    for r in &trace.records {
        let hit = match class {
            ProblemClass::Nonconvex => r.true_grad_norm <= epsilon,
            ProblemClass::StronglyConvex => r.true_gap.ok_or(Error::MissingGroundTruth)? <= epsilon,
        };
        if hit {
            return Ok(Some(r.k));
        }
    }
    Ok(None)
}

fn check_pairing(method: &Method, suite: &OracleSuite) -> Result<()> {
    match (method, &suite.costs) {
        (Method::Storm, CostModel::Sass { .. }) => Err(Error::Configuration(
            "trust-region method paired with step-search oracles".into(),
        )),
        (Method::Sass { .. }, CostModel::Storm(_)) => Err(Error::Configuration(
            "step-search method paired with trust-region oracles".into(),
        )),
        _ => Ok(()),
    }
}

fn finite_or(v: f64, iteration: usize, what: &'static str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { iteration, what })
    }
}

/// Runs the adaptive loop from `start` until the stopping time or
/// `config.max_iterations`. Deterministic given `config.seed`.
pub fn run_adaptive(
    problem: &Problem,
    method: &Method,
    suite: &OracleSuite,
    config: &AlgoConfig,
    start: &[f64],
    stopping: StoppingRule,
) -> Result<RunTrace> {
    config.validate()?;
    check_pairing(method, suite)?;
    if !(stopping.epsilon > 0.0) {
        return Err(Error::invalid("epsilon", "must be > 0"));
    }
    if stopping.class == ProblemClass::StronglyConvex && problem.known_min_value().is_none() {
        return Err(Error::MissingGroundTruth);
    }
    if start.len() != problem.dim() || !linalg::all_finite(start) {
        return Err(Error::invalid("start", "must be a finite point of the problem's dimension"));
    }

    let mut rng = rng::seeded(config.seed);
    let mut x = start.to_vec();
    let mut step = StepSize::new(config.alpha0, config.gamma, config.alpha_max);
    let mut records = Vec::new();
    let mut stopping_iteration = None;

    for k in 0..=config.max_iterations {
        let true_grad_norm = linalg::norm(&problem.gradient(&x));
        let true_gap = problem.gap(&x);
        let done = match stopping.class {
            ProblemClass::Nonconvex => true_grad_norm <= stopping.epsilon,
            ProblemClass::StronglyConvex => true_gap.is_some_and(|g| g <= stopping.epsilon),
        };
        let alpha = step.value();
        if done || k == config.max_iterations {
            records.push(IterationRecord {
                k,
                alpha,
                success: false,
                cost0: 0,
                cost1: 0,
                true_grad_norm,
                true_gap,
            });
            if done {
                stopping_iteration = Some(k);
            }
            break;
        }

        if alpha == 0.0 {
            return Err(Error::NonFinite {
                iteration: k,
                what: "step size (underflow)",
            });
        }
        let mut usage = Usage::default();
        let g = suite.gradient(problem, &x, alpha, &mut rng, &mut usage)?;
        if !linalg::all_finite(&g) {
            return Err(Error::NonFinite {
                iteration: k,
                what: "gradient estimate",
            });
        }
        let proposal = match method {
            Method::Sass { metric } => methods::sass_step(&g, metric, alpha)?,
            Method::Storm => methods::storm_step(&g, alpha),
        };
        let trial = linalg::add_scaled(&x, 1.0, &proposal.step);
        if !linalg::all_finite(&trial) {
            return Err(Error::NonFinite {
                iteration: k,
                what: "trial point",
            });
        }
        let f0 = finite_or(suite.value(problem, &x, alpha, &mut rng, &mut usage)?, k, "value estimate")?;
        let fplus = finite_or(
            suite.value(problem, &trial, alpha, &mut rng, &mut usage)?,
            k,
            "trial value estimate",
        )?;
        let success = match method {
            Method::Sass { .. } => methods::sass_accept(f0, fplus, &g, &proposal.step, config.theta, config.r)
                .map_err(|_| Error::NonFinite {
                    iteration: k,
                    what: "sufficient-decrease input",
                })?,
            Method::Storm => methods::storm_accept(
                f0,
                fplus,
                proposal.model_reduction,
                config.theta,
                proposal.grad_estimate_norm,
                config.theta2,
                alpha,
                config.r,
            ),
        };

        records.push(IterationRecord {
            k,
            alpha,
            success,
            cost0: usage.zeroth,
            cost1: usage.first,
            true_grad_norm,
            true_gap,
        });
        if success {
            x = trial;
        }
        step = step.advance(success);
    }

    Ok(RunTrace {
        records,
        stopping_iteration,
        config: config.clone(),
        epsilon: stopping.epsilon,
    })
}

/// Fraction of iterations before the stopping time with `alpha <= alpha_bar`
/// that succeeded. The estimate is `None` when no iteration qualifies.
pub fn empirical_success_probability<'a, I>(traces: I, alpha_bar: f64) -> Proportion
where
    I: IntoIterator<Item = &'a RunTrace>,
{
    let cutoff = alpha_bar * (1.0 + 1e-12);
    let (mut successes, mut count) = (0, 0);
    for trace in traces {
        let end = trace.stopping_iteration.unwrap_or(usize::MAX);
        for r in trace.executed().iter().filter(|r| r.k < end && r.alpha <= cutoff) {
            count += 1;
            successes += r.success as u64;
        }
    }
    Proportion::new(successes, count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_problem, NoiseSpec, ProblemKind};
    use alloc::vec;

    #[test]
    fn update_examples() {
        assert_eq!(update_step_size(1.0, true, 0.5, 10.0).unwrap(), 2.0);
        assert_eq!(update_step_size(8.0, true, 0.5, 10.0).unwrap(), 10.0);
        assert_eq!(update_step_size(1.0, false, 0.5, 10.0).unwrap(), 0.5);
        assert!(update_step_size(0.0, true, 0.5, 10.0).is_err());
        assert!(update_step_size(1.0, true, 1.0, 10.0).is_err());
        assert!(update_step_size(1.0, true, 0.0, 10.0).is_err());
    }

    #[test]
    fn lattice_step_size_caps() {
        let mut s = StepSize::new(1.0, 0.5, 1.0);
        s = s.advance(true);
        assert_eq!((s.value(), s.exponent()), (1.0, 0));
        s = s.advance(false).advance(false);
        assert_eq!((s.value(), s.exponent()), (0.25, 2));
        s = s.advance(true);
        assert_eq!(s.value(), 0.5);
        // cap off the lattice
        let s = StepSize::new(1.0, 0.5, 3.0).advance(true).advance(true);
        assert_eq!(s.value(), 3.0);
        assert_eq!(s.advance(false).value(), 1.5);
    }

    fn record(k: usize, g: f64, gap: Option<f64>) -> IterationRecord {
        IterationRecord {
            k,
            alpha: 1.0,
            success: false,
            cost0: 0,
            cost1: 0,
            true_grad_norm: g,
            true_gap: gap,
        }
    }

    fn trace_of(records: Vec<IterationRecord>) -> RunTrace {
        RunTrace {
            records,
            stopping_iteration: None,
            config: AlgoConfig::default(),
            epsilon: 1.0,
        }
    }

    #[test]
    fn stopping_time_examples() {
        let t = trace_of(vec![record(0, 3.0, None), record(1, 2.0, None), record(2, 0.5, None)]);
        assert_eq!(stopping_time(&t, 1.0, ProblemClass::Nonconvex).unwrap(), Some(2));
        assert_eq!(stopping_time(&t, 0.1, ProblemClass::Nonconvex).unwrap(), None);
        assert_eq!(
            stopping_time(&t, 1.0, ProblemClass::StronglyConvex),
            Err(Error::MissingGroundTruth)
        );
        let t = trace_of(vec![record(0, 9.0, Some(5.0)), record(1, 9.0, Some(0.9))]);
        assert_eq!(stopping_time(&t, 1.0, ProblemClass::StronglyConvex).unwrap(), Some(1));
    }

    #[test]
    fn config_validation() {
        let ok = AlgoConfig::default();
        ok.validate().unwrap();
        for bad in [
            AlgoConfig { theta: 1.0, ..ok.clone() },
            AlgoConfig { gamma: 1.0, ..ok.clone() },
            AlgoConfig { alpha0: 2.0, ..ok.clone() },
            AlgoConfig { r: -1.0, ..ok.clone() },
            AlgoConfig { max_iterations: 0, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
        AlgoConfig {
            alpha_max: f64::INFINITY,
            ..ok
        }
        .validate()
        .unwrap();
    }

    #[test]
    fn mismatched_oracles_are_rejected() {
        let p = make_problem(ProblemKind::Quadratic, 2, 1.0, NoiseSpec::zero(), 0).unwrap();
        let spec = crate::oracles::StormOracleSpec {
            kappa_ef: 1.0,
            delta0: 0.1,
            kappa_eg: 1.0,
            delta1: 0.1,
            sigma_f: 0.0,
            sigma_g: 0.0,
        };
        let suite = OracleSuite::new(CostModel::Storm(spec));
        let err = run_adaptive(
            &p,
            &Method::sass(),
            &suite,
            &AlgoConfig::default(),
            &[1.0, 0.0],
            StoppingRule::nonconvex(0.1),
        );
        assert!(matches!(err, Err(Error::Configuration(_))));
    }

    #[test]
    fn strongly_convex_needs_known_minimum() {
        let p = make_problem(ProblemKind::LogisticSynthetic, 2, 1.0, NoiseSpec::zero(), 0).unwrap();
        let err = run_adaptive(
            &p,
            &Method::sass(),
            &OracleSuite::single_sample(),
            &AlgoConfig::default(),
            &[1.0, 0.0],
            StoppingRule::strongly_convex(0.1),
        );
        assert_eq!(err, Err(Error::MissingGroundTruth));
    }

    #[test]
    fn empty_qualifying_set_is_undefined() {
        let t = trace_of(vec![record(0, 1.0, None)]);
        let est = empirical_success_probability([&t], 0.5);
        assert_eq!(est.trials, 0);
        assert!(est.estimate().is_none());
    }
}
