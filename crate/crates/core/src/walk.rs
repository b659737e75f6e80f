//! One-sided random walk on the non-negative integers and the bounds built
//! on it.
//!
//! With `Z_0 = 0` the walk moves up with probability `q = 1 - p` and down
//! (holding at 0) with probability `p`. Coupled with the step-size exponent
//! of a run it dominates that exponent pathwise, so its maximum controls how
//! small the step size can get.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;

/// Walk and step-size lattice parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkParams {
    /// Probability of a successful step once the step size is small enough.
    pub p: f64,
    pub gamma: f64,
    /// Step-size threshold below which success has probability at least `p`.
    pub alpha_bar: f64,
    pub omega: f64,
}

impl WalkParams {
    pub fn new(p: f64, gamma: f64, alpha_bar: f64, omega: f64) -> Result<Self> {
        let w = WalkParams {
            p,
            gamma,
            alpha_bar,
            omega,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        check_p(self.p)?;
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid("gamma", format!("must lie in (0, 1), got {}", self.gamma)));
        }
        if !(self.alpha_bar > 0.0) || !self.alpha_bar.is_finite() {
            return Err(Error::invalid("alpha_bar", format!("must be finite and > 0, got {}", self.alpha_bar)));
        }
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::invalid("omega", format!("must be finite and > 0, got {}", self.omega)));
        }
        Ok(())
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }

    /// `2 sqrt(pq) / (1 - 2 sqrt(pq))^2`.
    pub fn c(&self) -> f64 {
        tail_constant(self.p)
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.5 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("p", format!("must lie in (1/2, 1], got {p}")))
    }
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid("p", format!("must lie in [0, 1], got {p}")))
    }
}

fn tail_constant(p: f64) -> f64 {
    let s = 2.0 * math::sqrt(p * (1.0 - p));
    s / ((1.0 - s) * (1.0 - s))
}

/// `x^k` through logarithms, with `0^0 = 1`.
fn pow_log(x: f64, k: f64) -> f64 {
    if k == 0.0 {
        1.0
    } else if x == 0.0 {
        0.0
    } else {
        math::exp(k * math::ln(x))
    }
}

/// `Z_0, ..., Z_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkPath {
    pub states: Vec<u32>,
}

impl WalkPath {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn max_level(&self) -> u32 {
        self.states.iter().copied().max().unwrap_or(0)
    }

    /// Step sizes `alpha_bar * gamma^{Z_k}` induced by the path.
    pub fn step_sizes(&self, alpha_bar: f64, gamma: f64) -> impl Iterator<Item = f64> + '_ {
        self.states
            .iter()
            .map(move |&z| alpha_bar * math::powi(gamma, z as i32))
    }

    /// Visits to each level `0..levels`; the last bin absorbs everything above.
    pub fn occupancy(&self, levels: usize) -> Vec<u64> {
        let mut h = vec![0u64; levels];
        for &z in &self.states {
            h[(z as usize).min(levels - 1)] += 1;
        }
        h
    }

    pub fn is_valid(&self) -> bool {
        self.states.first() == Some(&0)
            && self
                .states
                .windows(2)
                .all(|w| w[0].abs_diff(w[1]) <= 1 && (w[1] != w[0] || w[0] == 0))
    }
}

fn walk_step<R: Rng + ?Sized>(z: u32, q: f64, rng: &mut R) -> u32 {
    if rng.random_bool(q) {
        z + 1
    } else {
        z.saturating_sub(1)
    }
}

/// An `n`-step walk with success probability `p`. Any `p` in `[0, 1]` is
/// accepted here.
pub fn simulate_walk<R: Rng + ?Sized>(p: f64, n: usize, rng: &mut R) -> Result<WalkPath> {
    check_probability(p)?;
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let q = 1.0 - p;
    let mut states = Vec::with_capacity(n + 1);
    let mut z = 0;
    states.push(z);
    for _ in 0..n {
        z = walk_step(z, q, rng);
        states.push(z);
    }
    Ok(WalkPath { states })
}

/// Exponent path of a run together with its dominating walk.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    /// The run's levels, extended past the end of the run by a free walk.
    pub levels: Vec<i64>,
    pub walk: WalkPath,
}

impl Coupling {
    /// `min_k (Z_k - Y_k)`.
    pub fn min_gap(&self) -> i64 {
        self.levels
            .iter()
            .zip(&self.walk.states)
            .map(|(&y, &z)| z as i64 - y)
            .min()
            .unwrap_or(0)
    }
}

/// Builds a walk `Z` dominating the exponent path `levels` over `horizon`
/// steps.
///
/// `levels[k]` is the level of the step size at iteration `k` of the run, so
/// `levels.len() - 1` is the stopping iteration. `success_probs[k]` is the
/// probability that iteration `k` succeeds; it must be at least `p` wherever
/// `levels[k] >= 0`. A transition counts as a success whenever the level does
/// not increase, which covers the step-size cap.
pub fn couple_with_trace<R: Rng + ?Sized>(
    levels: &[i64],
    success_probs: &[f64],
    p: f64,
    horizon: usize,
    rng: &mut R,
) -> Result<Coupling> {
    check_p(p)?;
    if levels.is_empty() {
        return Err(Error::invalid("levels", "must be nonempty"));
    }
    if levels[0] > 0 {
        return Err(Error::invalid("levels", "the run must start at or above alpha_bar"));
    }
    let stop = levels.len() - 1;
    if success_probs.len() < stop.min(horizon) {
        return Err(Error::invalid(
            "success_probs",
            format!("need one entry per executed iteration, got {}", success_probs.len()),
        ));
    }
    for w in levels.windows(2) {
        if w[1] > w[0] + 1 {
            return Err(Error::invalid("levels", "a failed step raises the level by exactly one"));
        }
    }
    let q = 1.0 - p;
    let mut y_out = Vec::with_capacity(horizon + 1);
    let mut z_out = Vec::with_capacity(horizon + 1);
    let (mut y, mut z) = (levels[0], 0u32);
    y_out.push(y);
    z_out.push(z);
    for k in 0..horizon {
        let (y_next, z_next) = if k < stop {
            let y_next = levels[k + 1];
            let z_next = if y <= -1 {
                walk_step(z, q, rng)
            } else {
                let p_prime = success_probs[k];
                if !(p_prime >= p) {
                    return Err(Error::CouplingInfeasible { step: k, p_prime, p });
                }
                if y_next > y || rng.random_bool(1.0 - p / p_prime) {
                    z + 1
                } else {
                    z.saturating_sub(1)
                }
            };
            (y_next, z_next)
        } else if rng.random_bool(q) {
            (y + 1, z + 1)
        } else {
            (y - 1, z.saturating_sub(1))
        };
        if (z_next as i64) < y_next {
            return Err(Error::AssumptionViolation(format!(
                "dominance lost at step {}: the step-size cap lies below alpha_bar",
                k + 1
            )));
        }
        y = y_next;
        z = z_next;
        y_out.push(y);
        z_out.push(z);
    }
    Ok(Coupling {
        levels: y_out,
        walk: WalkPath { states: z_out },
    })
}

/// `P^m_{0,l}` for the walk restricted to `{0..l}` and holding at `l`,
/// from its spectral decomposition.
pub fn feller_transition_prob(p: f64, l: usize, m: usize) -> Result<f64> {
    check_p(p)?;
    if l == 0 {
        return Err(Error::invalid("l", "must be at least 1"));
    }
    if m < l {
        return Ok(0.0);
    }
    let q = 1.0 - p;
    if q == 0.0 {
        return Ok(0.0);
    }
    let r = q / p;
    let lf = l as f64;
    let stationary = (1.0 - r) / (1.0 - pow_log(r, lf + 1.0)) * pow_log(r, lf);
    let s = 2.0 * math::sqrt(p * q);
    let mut sum = 0.0;
    for j in 1..=l {
        let t = PI * j as f64 / (lf + 1.0);
        let c = s * math::cos(t);
        sum += math::sin(t) * math::sin(t * lf) * math::powi(c, m as i32) / (1.0 - c);
    }
    let prefactor = 2.0 * q / (lf + 1.0) * pow_log(r, (lf - 1.0) / 2.0);
    Ok((stationary - prefactor * sum).clamp(0.0, 1.0))
}

/// Probability that the walk visits level `l` within `n` steps, by
/// propagating the distribution with `l` absorbing.
pub fn hitting_prob_exact(p: f64, l: usize, n: usize) -> Result<f64> {
    check_probability(p)?;
    if l == 0 {
        return Ok(1.0);
    }
    if l > n {
        return Ok(0.0);
    }
    let q = 1.0 - p;
    let mut dist = vec![0.0; l + 1];
    let mut next = vec![0.0; l + 1];
    dist[0] = 1.0;
    for _ in 0..n {
        next.iter_mut().for_each(|v| *v = 0.0);
        next[l] = dist[l];
        next[0] += p * dist[0];
        for i in 0..l {
            next[i + 1] += q * dist[i];
            if i > 0 {
                next[i - 1] += p * dist[i];
            }
        }
        core::mem::swap(&mut dist, &mut next);
    }
    Ok(dist[l])
}

/// `sum_{m=l..n} P^m_{0,l}`, the union bound behind [`hitting_prob_bound`].
pub fn hitting_prob_union(p: f64, l: usize, n: usize) -> Result<f64> {
    (l..=n).try_fold(0.0, |acc, m| Ok(acc + feller_transition_prob(p, l, m)?))
}

/// Closed-form upper bound on the probability of visiting level `l` within
/// `n` steps. Not clamped; it can exceed 1.
pub fn hitting_prob_bound(p: f64, l: usize, n: usize) -> Result<f64> {
    check_p(p)?;
    if l == 0 {
        return Err(Error::invalid("l", "must be at least 1"));
    }
    let q = 1.0 - p;
    let r = q / p;
    let lf = l as f64;
    let count = (n as f64 - lf + 1.0).max(0.0);
    let head = count * (1.0 - r) / (1.0 - pow_log(r, lf + 1.0)) * pow_log(r, lf);
    Ok(head + tail_constant(p) * pow_log(2.0 * q, lf))
}

/// High-probability floor on the step size over `n` iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepsizeFloor {
    pub alpha_star: f64,
    /// Lower bound on the probability that the floor holds (or the run stops
    /// first).
    pub success_prob: f64,
    /// Walk level whose avoidance gives the floor.
    pub level: u32,
    /// `(1 + omega) ln(1/gamma) / ln(1/(2q))`, so `alpha_star = alpha_bar gamma n^{-exponent}`.
    pub exponent: f64,
}

pub fn stepsize_lower_bound(params: &WalkParams, n: usize) -> Result<StepsizeFloor> {
    params.validate()?;
    if n < 2 {
        return Err(Error::invalid("n", "must be at least 2"));
    }
    let nf = n as f64;
    let log_inv_2q = math::ln(1.0 / (2.0 * params.q()));
    let a = (1.0 + params.omega) / log_inv_2q;
    let exponent = a * math::ln(1.0 / params.gamma);
    let alpha_star = params.alpha_bar * params.gamma * pow_log(nf, -exponent);
    let fail = pow_log(nf, -params.omega) + params.c() * pow_log(nf, -(1.0 + params.omega));
    Ok(StepsizeFloor {
        alpha_star,
        success_prob: (1.0 - fail).clamp(0.0, 1.0),
        level: math::ceil(a * math::ln(nf)) as u32,
        exponent,
    })
}

/// Smallest `gamma` for which the floor over `n` iterations is at least
/// `beta * alpha_bar`.
pub fn gamma_threshold(p: f64, n: usize, omega: f64, beta: f64) -> Result<f64> {
    check_p(p)?;
    if !(beta > 0.0 && beta < 0.5) {
        return Err(Error::invalid("beta", format!("must lie in (0, 1/2), got {beta}")));
    }
    if !(omega > 0.0) {
        return Err(Error::invalid("omega", "must be > 0"));
    }
    if n < 2 {
        return Err(Error::invalid("n", "must be at least 2"));
    }
    let base = 1.0 / (2.0 * (1.0 - p));
    let e = math::ln(2.0 * beta) / ((1.0 + omega) * math::ln(n as f64));
    Ok(math::pow(base, e).max(0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn degenerate_walks() {
        let mut rng = seeded(1);
        assert!(simulate_walk(1.0, 50, &mut rng).unwrap().states.iter().all(|&z| z == 0));
        let up = simulate_walk(0.0, 50, &mut rng).unwrap();
        assert!(up.states.iter().enumerate().all(|(k, &z)| z as usize == k));
        assert!(simulate_walk(1.5, 5, &mut rng).is_err());
        assert!(simulate_walk(0.5, 0, &mut rng).is_err());
    }

    #[test]
    fn transition_examples() {
        for p in [0.6, 0.8, 0.95] {
            let v = feller_transition_prob(p, 1, 1).unwrap();
            assert!((v - (1.0 - p)).abs() < 1e-12, "{p}: {v}");
        }
        assert_eq!(feller_transition_prob(0.8, 3, 2).unwrap(), 0.0);
        assert_eq!(feller_transition_prob(1.0, 3, 20).unwrap(), 0.0);
    }

    #[test]
    fn hitting_examples() {
        assert_eq!(hitting_prob_exact(0.8, 0, 10).unwrap(), 1.0);
        assert_eq!(hitting_prob_exact(0.8, 11, 10).unwrap(), 0.0);
        // reach level 1 within one step
        assert!((hitting_prob_exact(0.8, 1, 1).unwrap() - 0.2).abs() < 1e-15);
        // two steps: up immediately, or hold then up
        assert!((hitting_prob_exact(0.8, 1, 2).unwrap() - (0.2 + 0.8 * 0.2)).abs() < 1e-15);
    }

    #[test]
    fn bound_example() {
        let q: f64 = 0.2;
        let r = q / 0.8;
        let head = 91.0 * (1.0 - r) / (1.0 - r.powi(11)) * r.powi(10);
        let tail = 20.0 * 0.4f64.powi(10);
        let v = hitting_prob_bound(0.8, 10, 100).unwrap();
        assert!((v - (head + tail)).abs() < 1e-15);
        assert!((v - 2.16e-3).abs() < 1e-5);
        assert!(hitting_prob_bound(1.0, 3, 100).unwrap() == 0.0);
    }

    #[test]
    fn floor_example() {
        let w = WalkParams::new(0.8, 0.5, 1.0, 1.0).unwrap();
        assert!((w.c() - 20.0).abs() < 1e-12);
        let f = stepsize_lower_bound(&w, 100).unwrap();
        let exponent = 2.0 * 2f64.ln() / 2.5f64.ln();
        assert!((f.exponent - exponent).abs() < 1e-12);
        assert!((f.alpha_star - 0.5 * 100f64.powf(-exponent)).abs() < 1e-15);
        assert!((f.alpha_star - 4.7e-4).abs() < 0.1e-4);
        assert!((f.success_prob - 0.988).abs() < 1e-12);
        assert_eq!(f.level, 11);
        assert!(stepsize_lower_bound(&w, 1).is_err());
    }

    #[test]
    fn floor_limits() {
        let w = WalkParams::new(1.0, 0.5, 2.0, 1.0).unwrap();
        assert_eq!(stepsize_lower_bound(&w, 1000).unwrap().alpha_star, 1.0);
        // gamma = (1/2q)^{-1/4} with omega = 1 gives alpha_bar gamma / sqrt(n)
        let gamma = 2.5f64.powf(-0.25);
        let w = WalkParams::new(0.8, gamma, 1.0, 1.0).unwrap();
        let f = stepsize_lower_bound(&w, 400).unwrap();
        assert!((f.alpha_star - gamma / 20.0).abs() < 1e-14);
        assert!(WalkParams::new(0.5, 0.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn threshold_examples() {
        let g = gamma_threshold(0.8, 10_000, 1.0, 0.25).unwrap();
        let expect = 2.5f64.powf(0.5f64.ln() / (2.0 * 1e4f64.ln()));
        assert!((g - expect).abs() < 1e-15);
        assert!((g - 0.966).abs() < 1e-3);
        assert_eq!(gamma_threshold(0.8, 100, 1.0, 1e-300).unwrap(), 0.5);
        assert!(gamma_threshold(0.8, 100, 1.0, 0.5).is_err());
    }

    #[test]
    fn coupling_below_threshold_is_free_walk() {
        let levels = vec![-3i64; 1];
        let c = couple_with_trace(&levels, &[], 0.8, 40, &mut seeded(9)).unwrap();
        let mut free = seeded(9);
        // after the run the level path is a walk driven by the same draws
        let w = simulate_walk(0.8, 40, &mut free).unwrap();
        assert_eq!(c.walk, w);
        assert!(c.min_gap() >= 0);
    }

    #[test]
    fn coupling_rejects_low_success_probability() {
        let levels = [0i64, 1, 0];
        let err = couple_with_trace(&levels, &[0.7, 0.9], 0.8, 2, &mut seeded(0));
        assert!(matches!(err, Err(Error::CouplingInfeasible { step: 0, .. })));
    }
}
