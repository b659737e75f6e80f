//! Summary statistics for Monte Carlo estimates.

use alloc::vec::Vec;

use crate::math;

/// Two-sided 99% standard-normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_900_4;

/// An estimated proportion `successes / trials`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
}

impl Proportion {
    pub fn new(successes: u64, trials: u64) -> Self {
        assert!(successes <= trials, "more successes than trials");
        Proportion { successes, trials }
    }

    /// `None` when there are no trials.
    pub fn estimate(&self) -> Option<f64> {
        (self.trials > 0).then(|| self.successes as f64 / self.trials as f64)
    }

    /// Normal-approximation half-width at quantile `z`.
    pub fn wald_halfwidth(&self, z: f64) -> f64 {
        match self.estimate() {
            Some(p) => z * math::sqrt(p * (1.0 - p) / self.trials as f64),
            None => f64::INFINITY,
        }
    }

    /// Wilson score interval at quantile `z`. Well behaved near 0 and 1, which
    /// matters for rare-event frequencies.
    pub fn wilson(&self, z: f64) -> (f64, f64) {
        if self.trials == 0 {
            return (0.0, 1.0);
        }
        let n = self.trials as f64;
        let p = self.successes as f64 / n;
        let z2 = z * z;
        let denom = 1.0 + z2 / n;
        let centre = (p + z2 / (2.0 * n)) / denom;
        let half = z * math::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
        ((centre - half).max(0.0), (centre + half).min(1.0))
    }
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Unbiased sample variance; `None` for fewer than two points.
pub fn sample_variance(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    Some(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64)
}

/// Linear-interpolated quantile of already sorted data, `q` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let q = q.clamp(0.0, 1.0);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    Some(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Sorts a copy (NaN last) and returns it.
pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Ordinary least squares fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let mx = mean(x)?;
    let my = mean(y)?;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Pearson statistic for two samples drawn from the same categorical law,
/// with degrees of freedom. Trailing bins are pooled until every expected
/// count is at least 5. `None` if fewer than two bins remain.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> Option<(f64, usize)> {
    let bins = a.len().max(b.len());
    let get = |h: &[u64], i: usize| h.get(i).copied().unwrap_or(0) as f64;
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    let total = na + nb;
    let mut merged: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for i in 0..bins {
        acc.0 += get(a, i);
        acc.1 += get(b, i);
        let pooled = acc.0 + acc.1;
        if pooled * na.min(nb) / total >= 5.0 {
            merged.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 + acc.1 > 0.0 {
        match merged.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => merged.push(acc),
        }
    }
    if merged.len() < 2 {
        return None;
    }
    let stat = merged
        .iter()
        .map(|&(x, y)| {
            let ea = (x + y) * na / total;
            let eb = (x + y) * nb / total;
            (x - ea) * (x - ea) / ea + (y - eb) * (y - eb) / eb
        })
        .sum();
    Some((stat, merged.len() - 1))
}
