//! Minibatch oracles, their accuracy contracts and per-call cost models.
//!
//! A zeroth-order call averages `b0` value samples and a first-order call
//! averages `b1` gradient samples. Batch sizes come from a [`CostModel`] as a
//! function of the step size parameter and never increase with it.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::math::{self, batch_count};
use crate::problems::{NoiseSpec, Problem, ProblemClass};
use crate::rng;
use crate::stats::Proportion;

/// Step-search oracle parameters (value tail `eps_f`, `lambda`; gradient
/// accuracy `eps_g`, `kappa`, `tau`; gradient failure probability `delta1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SassOracleSpec {
    pub eps_f: f64,
    pub lambda: f64,
    pub eps_g: f64,
    pub kappa: f64,
    pub tau: f64,
    pub delta1: f64,
}

impl SassOracleSpec {
    pub fn validate(&self) -> Result<()> {
        positive("lambda", self.lambda)?;
        positive("kappa", self.kappa)?;
        positive("tau", self.tau)?;
        nonneg("eps_f", self.eps_f)?;
        nonneg("eps_g", self.eps_g)?;
        if !(0.0..1.0).contains(&self.delta1) {
            return Err(Error::invalid("delta1", format!("must lie in [0, 1), got {}", self.delta1)));
        }
        Ok(())
    }

    /// The compensation `2 eps_f + (2 / lambda) log 4` suggested for the
    /// trust-region variant with the same value oracle. A reasonable default
    /// for `r`, not a tuned one.
    pub fn suggested_r(&self) -> f64 {
        2.0 * self.eps_f + 2.0 / self.lambda * math::ln(4.0)
    }
}

/// First-order trust-region oracle parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StormOracleSpec {
    pub kappa_ef: f64,
    pub delta0: f64,
    pub kappa_eg: f64,
    pub delta1: f64,
    pub sigma_f: f64,
    pub sigma_g: f64,
}

impl StormOracleSpec {
    pub fn validate(&self) -> Result<()> {
        positive("kappa_ef", self.kappa_ef)?;
        positive("kappa_eg", self.kappa_eg)?;
        nonneg("sigma_f", self.sigma_f)?;
        nonneg("sigma_g", self.sigma_g)?;
        for (name, d) in [("delta0", self.delta0), ("delta1", self.delta1)] {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::invalid(name, format!("must lie in (0, 1), got {d}")));
            }
        }
        if self.delta0 + self.delta1 >= 0.5 {
            return Err(Error::invalid(
                "delta0 + delta1",
                format!("must be below 1/2, got {}", self.delta0 + self.delta1),
            ));
        }
        Ok(())
    }

    /// `p = 1 - delta0 - delta1`.
    pub fn success_probability(&self) -> f64 {
        1.0 - self.delta0 - self.delta1
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and > 0, got {v}")))
    }
}

fn nonneg(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")))
    }
}

/// Chebyshev minibatch sizes for the trust-region oracles:
/// `oc0 = sigma_f^2 / (delta0 kappa_ef^2 alpha^4)` and
/// `oc1 = sigma_g^2 / (delta1 kappa_eg^2 alpha^2)`, ceilinged, at least one.
pub fn storm_batch_sizes(alpha: f64, spec: &StormOracleSpec) -> Result<(u64, u64)> {
    positive("alpha", alpha)?;
    positive("delta0", spec.delta0)?;
    positive("delta1", spec.delta1)?;
    positive("kappa_ef", spec.kappa_ef)?;
    positive("kappa_eg", spec.kappa_eg)?;
    let a2 = alpha * alpha;
    let oc0 = spec.sigma_f * spec.sigma_f / (spec.delta0 * spec.kappa_ef * spec.kappa_ef * a2 * a2);
    let oc1 = spec.sigma_g * spec.sigma_g / (spec.delta1 * spec.kappa_eg * spec.kappa_eg * a2);
    Ok((batch_count(oc0), batch_count(oc1)))
}

/// Step-search minibatch sizes, scaled by the explicit constant `multiplier`.
///
/// Value batches do not depend on `alpha`: `sigma_f^2 / eps^4` (nonconvex) or
/// `sigma_f^2 / eps^2` (strongly convex). Gradient batches are
/// `M_c / eps^2 + M_v / min(tau, kappa alpha)^2` (nonconvex) or
/// `M_c / eps + M_v / min(tau, kappa alpha)^2` (strongly convex).
pub fn sass_batch_sizes(
    alpha: f64,
    epsilon: f64,
    spec: &SassOracleSpec,
    noise: &NoiseSpec,
    class: ProblemClass,
    multiplier: f64,
) -> Result<(u64, u64)> {
    positive("alpha", alpha)?;
    positive("epsilon", epsilon)?;
    positive("multiplier", multiplier)?;
    positive("kappa", spec.kappa)?;
    positive("tau", spec.tau)?;
    let sf2 = noise.sigma_f * noise.sigma_f;
    let radius = spec.tau.min(spec.kappa * alpha);
    let variance_part = noise.m_v / (radius * radius);
    let (oc0, oc1) = match class {
        ProblemClass::Nonconvex => (
            sf2 / math::powi(epsilon, 4),
            noise.m_c / (epsilon * epsilon) + variance_part,
        ),
        ProblemClass::StronglyConvex => (sf2 / (epsilon * epsilon), noise.m_c / epsilon + variance_part),
    };
    Ok((batch_count(multiplier * oc0), batch_count(multiplier * oc1)))
}

/// Per-call batch sizes as a function of the step size parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum CostModel {
    Constant {
        zeroth: u64,
        first: u64,
    },
    Storm(StormOracleSpec),
    Sass {
        spec: SassOracleSpec,
        noise: NoiseSpec,
        epsilon: f64,
        class: ProblemClass,
        multiplier: f64,
    },
}

impl CostModel {
    /// `(oc0, oc1)`: samples per zeroth-order call and per first-order call.
    pub fn batch_sizes(&self, alpha: f64) -> Result<(u64, u64)> {
        match self {
            CostModel::Constant { zeroth, first } => {
                positive("alpha", alpha)?;
                Ok(((*zeroth).max(1), (*first).max(1)))
            }
            CostModel::Storm(spec) => storm_batch_sizes(alpha, spec),
            CostModel::Sass {
                spec,
                noise,
                epsilon,
                class,
                multiplier,
            } => sass_batch_sizes(alpha, *epsilon, spec, noise, *class, *multiplier),
        }
    }

    /// Samples charged by one iteration of the adaptive loop: two value calls
    /// (current and trial point) and one gradient call.
    pub fn iteration_cost(&self, alpha: f64) -> Result<(u64, u64)> {
        let (b0, b1) = self.batch_sizes(alpha)?;
        Ok((b0.saturating_mul(2), b1))
    }

    /// Total samples of one iteration as a real, the `oc(alpha)` that enters
    /// the complexity bounds. Panics on an invalid model.
    pub fn iteration_total(&self, alpha: f64) -> f64 {
        let (c0, c1) = self.iteration_cost(alpha).expect("cost model evaluation");
        c0 as f64 + c1 as f64
    }

    /// Checks that batch sizes never increase with alpha on a log grid of
    /// `points` values spanning `[lo, hi]`.
    pub fn check_monotone(&self, lo: f64, hi: f64, points: usize) -> Result<()> {
        positive("lo", lo)?;
        if !(hi >= lo) || points < 2 {
            return Err(Error::invalid("grid", "need hi >= lo and at least two points"));
        }
        let step = math::ln(hi / lo) / (points - 1) as f64;
        let mut prev = self.batch_sizes(lo)?;
        for i in 1..points {
            let a = lo * math::exp(step * i as f64);
            let cur = self.batch_sizes(a)?;
            if cur.0 > prev.0 || cur.1 > prev.1 {
                return Err(Error::AssumptionViolation(format!(
                    "cost increases with alpha near {a:e}: {prev:?} -> {cur:?}"
                )));
            }
            prev = cur;
        }
        Ok(())
    }
}

/// Mean of `batch` value samples at `x`.
pub fn minibatch_value<R: Rng + ?Sized>(
    problem: &Problem,
    x: &[f64],
    batch: u64,
    rng: &mut R,
) -> Result<f64> {
    if batch == 0 {
        return Err(Error::invalid("batch", "must be at least 1"));
    }
    // One exact evaluation, then the per-sample perturbations.
    let first = problem.sample_loss(x, rng)?;
    if batch == 1 {
        return Ok(first);
    }
    let truth = problem.value(x);
    let mut sum = first;
    for _ in 1..batch {
        sum += problem.loss_around(truth, rng);
    }
    Ok(sum / batch as f64)
}

/// Componentwise mean of `batch` gradient samples at `x`.
pub fn minibatch_grad<R: Rng + ?Sized>(
    problem: &Problem,
    x: &[f64],
    batch: u64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if batch == 0 {
        return Err(Error::invalid("batch", "must be at least 1"));
    }
    let mut sum = problem.sample_grad(x, rng)?;
    if batch == 1 {
        return Ok(sum);
    }
    let truth = problem.gradient(x);
    let scale = problem.gradient_noise_scale(&truth);
    let mut draw = vec![0.0; truth.len()];
    for _ in 1..batch {
        problem.grad_around(&truth, scale, rng, &mut draw);
        for (s, d) in sum.iter_mut().zip(&draw) {
            *s += d;
        }
    }
    let inv = batch as f64;
    sum.iter_mut().for_each(|s| *s /= inv);
    Ok(sum)
}

/// Samples drawn so far, split by oracle order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Usage {
    pub zeroth: u64,
    pub first: u64,
}

/// The oracles used by one run: minibatch estimators over the problem's
/// sampling model, sized by a cost model.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSuite {
    pub costs: CostModel,
}

impl OracleSuite {
    pub fn new(costs: CostModel) -> Self {
        OracleSuite { costs }
    }

    /// Oracles that ignore alpha and use single-sample estimates.
    pub fn single_sample() -> Self {
        OracleSuite::new(CostModel::Constant { zeroth: 1, first: 1 })
    }

    pub fn value<R: Rng + ?Sized>(
        &self,
        problem: &Problem,
        x: &[f64],
        alpha: f64,
        rng: &mut R,
        usage: &mut Usage,
    ) -> Result<f64> {
        let (b0, _) = self.costs.batch_sizes(alpha)?;
        usage.zeroth += b0;
        minibatch_value(problem, x, b0, rng)
    }

    pub fn gradient<R: Rng + ?Sized>(
        &self,
        problem: &Problem,
        x: &[f64],
        alpha: f64,
        rng: &mut R,
        usage: &mut Usage,
    ) -> Result<Vec<f64>> {
        let (_, b1) = self.costs.batch_sizes(alpha)?;
        usage.first += b1;
        minibatch_grad(problem, x, b1, rng)
    }
}

/// Accuracy requirement of a single oracle call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Contract {
    /// `|f - phi| <= kappa_ef alpha^2`
    TrustRegionValue { kappa_ef: f64 },
    /// `|g - grad phi| <= eps_g + kappa_eg alpha`
    TrustRegionGradient { eps_g: f64, kappa_eg: f64 },
    /// `|f - phi| < eps_f + t`, expected to fail with probability at most
    /// `exp(-lambda t)`.
    StepSearchValue { eps_f: f64, t: f64 },
    /// `|g - grad phi| <= max(eps_g, min(tau, kappa alpha) |g|)`
    StepSearchGradient { eps_g: f64, kappa: f64, tau: f64 },
}

impl Contract {
    fn is_value(&self) -> bool {
        matches!(self, Contract::TrustRegionValue { .. } | Contract::StepSearchValue { .. })
    }

    fn value_holds(&self, estimate: f64, truth: f64, alpha: f64) -> bool {
        let err = math::abs(estimate - truth);
        match *self {
            Contract::TrustRegionValue { kappa_ef } => err <= kappa_ef * alpha * alpha,
            Contract::StepSearchValue { eps_f, t } => err < eps_f + t,
            _ => unreachable!(),
        }
    }

    fn gradient_holds(&self, estimate: &[f64], truth: &[f64], alpha: f64) -> bool {
        let diff: Vec<f64> = estimate.iter().zip(truth).map(|(a, b)| a - b).collect();
        let err = linalg::norm(&diff);
        match *self {
            Contract::TrustRegionGradient { eps_g, kappa_eg } => err <= eps_g + kappa_eg * alpha,
            Contract::StepSearchGradient { eps_g, kappa, tau } => {
                err <= eps_g.max(tau.min(kappa * alpha) * linalg::norm(estimate))
            }
            _ => unreachable!(),
        }
    }
}

/// Fraction of `trials` independent oracle calls at `(x, alpha)` that violate
/// `contract`, with batch sizes from `suite`.
pub fn empirical_oracle_failure_rate(
    contract: &Contract,
    suite: &OracleSuite,
    problem: &Problem,
    x: &[f64],
    alpha: f64,
    trials: u64,
    master_seed: u64,
) -> Result<Proportion> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    let mut rng = rng::seeded(master_seed);
    let mut usage = Usage::default();
    let mut failures = 0;
    if contract.is_value() {
        let truth = problem.value(x);
        for _ in 0..trials {
            let f = suite.value(problem, x, alpha, &mut rng, &mut usage)?;
            if !contract.value_holds(f, truth, alpha) {
                failures += 1;
            }
        }
    } else {
        let truth = problem.gradient(x);
        for _ in 0..trials {
            let g = suite.gradient(problem, x, alpha, &mut rng, &mut usage)?;
            if !contract.gradient_holds(&g, &truth, alpha) {
                failures += 1;
            }
        }
    }
    Ok(Proportion::new(failures, trials))
}

/// Per-iteration success probability of the adaptive loop under
/// single-sample Bernoulli-corruption oracles, for iterations where the exact
/// oracles would succeed.
///
/// Valid on convex problems with `r = 0` and a corruption magnitude larger
/// than any achievable decrease. Then an iteration succeeds exactly when the
/// trial value is clean, or both values are corrupted and the gradient is
/// clean, or only the current value is corrupted.
pub fn corruption_success_probability(delta_f: f64, delta_g: f64) -> f64 {
    let one_sided = delta_f * (1.0 - delta_f);
    (1.0 - delta_g) * (1.0 - one_sided) + delta_g * one_sided
}
