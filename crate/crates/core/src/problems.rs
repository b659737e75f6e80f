//! Synthetic expected-risk objectives `phi(x) = E_d[l(x, d)]` with exact ground
//! truth and per-sample noise of controlled size.
//!
//! A per-sample loss is the exact objective plus an independent perturbation:
//! `l(x, d) = phi(x) + e_f` and `grad l(x, d) = grad phi(x) + e_g`. Under
//! [`NoiseDistribution::Gaussian`], `e_f ~ N(0, sigma_f^2)` and every coordinate
//! of `e_g` is `N(0, (M_c + M_v |grad phi(x)|^2) / dim)`, so the declared
//! variance bounds hold with equality. Gaussian tails are sub-exponential,
//! which covers the tail requirement of the step-search value oracle.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, all_finite};
use crate::math;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    /// `phi(x) = x^T D x / 2` with a diagonal spectrum spread over
    /// `[1, conditioning]`.
    Quadratic,
    /// L2-regularized logistic loss over a generated dataset.
    LogisticSynthetic,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Quadratic => "quadratic",
            ProblemKind::LogisticSynthetic => "logistic_synthetic",
        }
    }
}

/// Which optimality measure defines the stopping time and which oracle cost
/// regime applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemClass {
    /// Stop once the true gradient norm is at most epsilon.
    Nonconvex,
    /// Stop once the true optimality gap is at most epsilon.
    StronglyConvex,
}

impl ProblemClass {
    pub fn name(self) -> &'static str {
        match self {
            ProblemClass::Nonconvex => "nonconvex",
            ProblemClass::StronglyConvex => "strongly_convex",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseDistribution {
    Gaussian,
    /// Each sample is exact, except that with probability `delta_f` a value
    /// sample is shifted up by `magnitude`, and with probability `delta_g` a
    /// gradient sample is replaced by `-grad phi(x)`.
    BernoulliCorruption {
        delta_f: f64,
        delta_g: f64,
        magnitude: f64,
    },
}

/// Noise scales of the per-sample losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Standard deviation bound of a value sample.
    pub sigma_f: f64,
    /// Gradient noise: `E|grad l - grad phi|^2 <= m_c + m_v |grad phi|^2`.
    pub m_c: f64,
    pub m_v: f64,
    /// Uniform gradient noise bound `E|grad l - grad phi|^2 <= sigma_g^2`,
    /// used by the trust-region cost model.
    pub sigma_g: f64,
    pub distribution: NoiseDistribution,
}

impl NoiseSpec {
    pub fn zero() -> Self {
        NoiseSpec::gaussian(0.0, 0.0, 0.0)
    }

    /// Gaussian noise; `sigma_g` is set to `sqrt(m_c)`, which is the uniform
    /// bound when `m_v = 0`.
    pub fn gaussian(sigma_f: f64, m_c: f64, m_v: f64) -> Self {
        NoiseSpec {
            sigma_f,
            m_c,
            m_v,
            sigma_g: math::sqrt(m_c),
            distribution: NoiseDistribution::Gaussian,
        }
    }

    /// Gaussian noise with a uniform gradient variance `sigma_g^2`.
    pub fn uniform(sigma_f: f64, sigma_g: f64) -> Self {
        NoiseSpec::gaussian(sigma_f, sigma_g * sigma_g, 0.0)
    }

    pub fn bernoulli(delta_f: f64, delta_g: f64, magnitude: f64) -> Self {
        NoiseSpec {
            sigma_f: 0.0,
            m_c: 0.0,
            m_v: 0.0,
            sigma_g: 0.0,
            distribution: NoiseDistribution::BernoulliCorruption {
                delta_f,
                delta_g,
                magnitude,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_f", self.sigma_f),
            ("m_c", self.m_c),
            ("m_v", self.m_v),
            ("sigma_g", self.sigma_g),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if self.m_v == 0.0 && self.sigma_g * self.sigma_g < self.m_c * (1.0 - 1e-12) {
            return Err(Error::invalid(
                "sigma_g",
                format!(
                    "declared bound {} is below the gradient noise level sqrt(m_c) = {}",
                    self.sigma_g,
                    math::sqrt(self.m_c)
                ),
            ));
        }
        if let NoiseDistribution::BernoulliCorruption {
            delta_f,
            delta_g,
            magnitude,
        } = self.distribution
        {
            for (name, d) in [("delta_f", delta_f), ("delta_g", delta_g)] {
                if !(0.0..=1.0).contains(&d) {
                    return Err(Error::invalid(name, format!("must lie in [0, 1], got {d}")));
                }
            }
            if !(magnitude >= 0.0) || !magnitude.is_finite() {
                return Err(Error::invalid("magnitude", format!("must be finite and >= 0, got {magnitude}")));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        match self.distribution {
            NoiseDistribution::Gaussian => self.sigma_f == 0.0 && self.m_c == 0.0 && self.m_v == 0.0,
            NoiseDistribution::BernoulliCorruption { delta_f, delta_g, .. } => {
                delta_f == 0.0 && delta_g == 0.0
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Objective {
    Quadratic {
        diag: Vec<f64>,
    },
    Logistic {
        /// Row-major `samples x dim`.
        features: Vec<f64>,
        labels: Vec<f64>,
        reg: f64,
    },
}

/// An objective with exact value and gradient plus a noisy sampling model.
/// Immutable after construction; concurrent samplers bring their own RNG.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    kind: ProblemKind,
    dim: usize,
    conditioning: f64,
    seed: u64,
    objective: Objective,
    noise: NoiseSpec,
    smoothness: f64,
    known_min_value: Option<f64>,
}

/// Samples per feature dimension in the logistic dataset.
const LOGISTIC_SAMPLES_PER_DIM: usize = 40;

/// Builds a problem instance.
///
/// For [`ProblemKind::Quadratic`] the Hessian diagonal is log-spaced over
/// `[1, conditioning]` and the seed is unused. For
/// [`ProblemKind::LogisticSynthetic`] the seed drives the dataset and the
/// regularization weight is `1 / conditioning`.
pub fn make_problem(
    kind: ProblemKind,
    dim: usize,
    conditioning: f64,
    noise: NoiseSpec,
    seed: u64,
) -> Result<Problem> {
    if dim == 0 {
        return Err(Error::invalid("dim", "must be at least 1"));
    }
    if !(conditioning >= 1.0) || !conditioning.is_finite() {
        return Err(Error::invalid("conditioning", format!("must be finite and >= 1, got {conditioning}")));
    }
    noise.validate()?;

    let (objective, smoothness, known_min_value) = match kind {
        ProblemKind::Quadratic => {
            let diag: Vec<f64> = (0..dim)
                .map(|i| {
                    if dim == 1 {
                        1.0
                    } else {
                        math::pow(conditioning, i as f64 / (dim - 1) as f64)
                    }
                })
                .collect();
            let l = diag.iter().copied().fold(0.0, f64::max);
            (Objective::Quadratic { diag }, l, Some(0.0))
        }
        ProblemKind::LogisticSynthetic => {
            let mut rng = rng::seeded(seed);
            let samples = LOGISTIC_SAMPLES_PER_DIM * dim;
            let scale = 1.0 / math::sqrt(dim as f64);
            let truth: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let mut features = Vec::with_capacity(samples * dim);
            let mut labels = Vec::with_capacity(samples);
            let mut max_sq = 0.0f64;
            for _ in 0..samples {
                let row: Vec<f64> = (0..dim)
                    .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let margin = linalg::dot(&row, &truth) + 0.5 * rng.sample::<f64, _>(StandardNormal);
                labels.push(if margin >= 0.0 { 1.0 } else { -1.0 });
                max_sq = max_sq.max(linalg::dot(&row, &row));
                features.extend_from_slice(&row);
            }
            let reg = 1.0 / conditioning;
            // Hessian = mean(s'(.) a a^T) + reg I with s' <= 1/4.
            let l = 0.25 * max_sq + reg;
            (
                Objective::Logistic {
                    features,
                    labels,
                    reg,
                },
                l,
                None,
            )
        }
    };

    Ok(Problem {
        kind,
        dim,
        conditioning,
        seed,
        objective,
        noise,
        smoothness,
        known_min_value,
    })
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(math::exp(-z))
    } else {
        libm::log1p(math::exp(z))
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + math::exp(-z))
    } else {
        let e = math::exp(z);
        e / (1.0 + e)
    }
}

impl Problem {
    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    /// Lipschitz constant of the gradient (exact for quadratics, an upper
    /// bound for the logistic loss).
    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn known_min_value(&self) -> Option<f64> {
        self.known_min_value
    }

    /// Same objective, different noise.
    pub fn with_noise(&self, noise: NoiseSpec) -> Result<Problem> {
        noise.validate()?;
        Ok(Problem {
            noise,
            ..self.clone()
        })
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::invalid("x", format!("expected {} coordinates, got {}", self.dim, x.len())));
        }
        if !all_finite(x) {
            return Err(Error::invalid("x", "point has non-finite coordinates"));
        }
        Ok(())
    }

    /// Exact objective value. Panics if `x` has the wrong dimension.
    pub fn value(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "dimension mismatch");
        match &self.objective {
            Objective::Quadratic { diag } => {
                0.5 * diag.iter().zip(x).map(|(d, v)| d * v * v).sum::<f64>()
            }
            Objective::Logistic {
                features,
                labels,
                reg,
            } => {
                let n = labels.len();
                let loss: f64 = features
                    .chunks_exact(self.dim)
                    .zip(labels)
                    .map(|(a, &b)| softplus(-b * linalg::dot(a, x)))
                    .sum();
                loss / n as f64 + 0.5 * reg * linalg::dot(x, x)
            }
        }
    }

    /// Exact gradient. Panics if `x` has the wrong dimension.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "dimension mismatch");
        match &self.objective {
            Objective::Quadratic { diag } => diag.iter().zip(x).map(|(d, v)| d * v).collect(),
            Objective::Logistic {
                features,
                labels,
                reg,
            } => {
                let n = labels.len() as f64;
                let mut g: Vec<f64> = x.iter().map(|v| reg * v).collect();
                for (a, &b) in features.chunks_exact(self.dim).zip(labels) {
                    let w = -b * sigmoid(-b * linalg::dot(a, x)) / n;
                    for (gi, ai) in g.iter_mut().zip(a) {
                        *gi += w * ai;
                    }
                }
                g
            }
        }
    }

    /// `phi(x) - inf phi`, when the optimal value is known.
    pub fn gap(&self, x: &[f64]) -> Option<f64> {
        self.known_min_value.map(|m| self.value(x) - m)
    }

    /// One per-sample loss `l(x, d)`.
    pub fn sample_loss<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.loss_around(self.value(x), rng))
    }

    /// One per-sample gradient `grad l(x, d)`.
    pub fn sample_grad<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let truth = self.gradient(x);
        let mut out = alloc::vec![0.0; self.dim];
        let scale = self.gradient_noise_scale(&truth);
        self.grad_around(&truth, scale, rng, &mut out);
        Ok(out)
    }

    /// A value sample given the exact value at the point.
    pub(crate) fn loss_around<R: Rng + ?Sized>(&self, truth: f64, rng: &mut R) -> f64 {
        match self.noise.distribution {
            NoiseDistribution::Gaussian => {
                if self.noise.sigma_f == 0.0 {
                    truth
                } else {
                    truth + self.noise.sigma_f * rng.sample::<f64, _>(StandardNormal)
                }
            }
            NoiseDistribution::BernoulliCorruption {
                delta_f, magnitude, ..
            } => {
                if rng.random_bool(delta_f) {
                    truth + magnitude
                } else {
                    truth
                }
            }
        }
    }

    /// Per-coordinate standard deviation of Gaussian gradient noise at a
    /// point with exact gradient `truth`.
    pub(crate) fn gradient_noise_scale(&self, truth: &[f64]) -> f64 {
        let second_moment = self.noise.m_c + self.noise.m_v * linalg::dot(truth, truth);
        math::sqrt(second_moment / self.dim as f64)
    }

    /// Writes one gradient sample into `out`.
    pub(crate) fn grad_around<R: Rng + ?Sized>(
        &self,
        truth: &[f64],
        scale: f64,
        rng: &mut R,
        out: &mut [f64],
    ) {
        match self.noise.distribution {
            NoiseDistribution::Gaussian => {
                if scale == 0.0 {
                    out.copy_from_slice(truth);
                } else {
                    for (o, t) in out.iter_mut().zip(truth) {
                        *o = t + scale * rng.sample::<f64, _>(StandardNormal);
                    }
                }
            }
            NoiseDistribution::BernoulliCorruption { delta_g, .. } => {
                let flip = rng.random_bool(delta_g);
                for (o, t) in out.iter_mut().zip(truth) {
                    *o = if flip { -t } else { *t };
                }
            }
        }
    }

    /// `key=value` lines describing the instance, for experiment headers.
    pub fn descriptor(&self) -> String {
        let mut s = String::new();
        let n = &self.noise;
        let _ = writeln!(s, "kind={}", self.kind.name());
        let _ = writeln!(s, "dim={}", self.dim);
        let _ = writeln!(s, "conditioning={:e}", self.conditioning);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "smoothness={:e}", self.smoothness);
        match self.known_min_value {
            Some(v) => {
                let _ = writeln!(s, "known_min_value={v:e}");
            }
            None => {
                let _ = writeln!(s, "known_min_value=");
            }
        }
        let _ = writeln!(s, "sigma_f={:e}", n.sigma_f);
        let _ = writeln!(s, "m_c={:e}", n.m_c);
        let _ = writeln!(s, "m_v={:e}", n.m_v);
        let _ = writeln!(s, "sigma_g={:e}", n.sigma_g);
        match n.distribution {
            NoiseDistribution::Gaussian => {
                let _ = writeln!(s, "distribution=gaussian");
            }
            NoiseDistribution::BernoulliCorruption {
                delta_f,
                delta_g,
                magnitude,
            } => {
                let _ = writeln!(s, "distribution=bernoulli_corruption");
                let _ = writeln!(s, "delta_f={delta_f:e}");
                let _ = writeln!(s, "delta_g={delta_g:e}");
                let _ = writeln!(s, "magnitude={magnitude:e}");
            }
        }
        s
    }
}
