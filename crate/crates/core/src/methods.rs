//! Step computation and acceptance tests of the two concrete methods.
//!
//! Step search (SASS) uses the model `phi(x) + g^T s + s^T H s / (2 alpha)`,
//! whose minimizer is `s = -alpha H^{-1} g`, and accepts on sufficient
//! decrease `f0 - f+ >= -theta g^T s - r`.
//!
//! The first-order trust region (STORM) uses the linear model
//! `phi(x) + g^T s` on the ball `|s| <= alpha`, minimized by
//! `s = -alpha g / |g|`, and accepts when
//! `(f0 - f+ + r) / (m(x) - m(x + s)) >= theta` and `|g| >= theta2 alpha`.
//!
//! Both tests accept on equality.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Metric};

/// A candidate step and the model decrease it promises.
#[derive(Debug, Clone, PartialEq)]
pub struct StepProposal {
    pub step: Vec<f64>,
    /// `m(x) - m(x + s) >= 0`
    pub model_reduction: f64,
    pub grad_estimate_norm: f64,
}

pub fn sass_step(g: &[f64], metric: &Metric, alpha: f64) -> Result<StepProposal> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha", "must be positive"));
    }
    let h_inv_g = metric.solve(g)?;
    let step: Vec<f64> = h_inv_g.iter().map(|v| -alpha * v).collect();
    let model_reduction = (0.5 * alpha * linalg::dot(g, &h_inv_g)).max(0.0);
    Ok(StepProposal {
        step,
        model_reduction,
        grad_estimate_norm: linalg::norm(g),
    })
}

pub fn sass_accept(f0: f64, fplus: f64, g: &[f64], step: &[f64], theta: f64, r: f64) -> Result<bool> {
    let gts = linalg::dot(g, step);
    if !(f0.is_finite() && fplus.is_finite() && gts.is_finite() && theta.is_finite() && r.is_finite()) {
        return Err(Error::NonFinite {
            iteration: 0,
            what: "sufficient-decrease input",
        });
    }
    Ok(f0 - fplus >= -theta * gts - r)
}

pub fn storm_step(g: &[f64], alpha: f64) -> StepProposal {
    let gnorm = linalg::norm(g);
    if gnorm == 0.0 {
        return StepProposal {
            step: vec![0.0; g.len()],
            model_reduction: 0.0,
            grad_estimate_norm: 0.0,
        };
    }
    let t = alpha / gnorm;
    StepProposal {
        step: g.iter().map(|v| -t * v).collect(),
        model_reduction: alpha * gnorm,
        grad_estimate_norm: gnorm,
    }
}

#[allow(clippy::too_many_arguments)]
pub fn storm_accept(
    f0: f64,
    fplus: f64,
    model_reduction: f64,
    theta: f64,
    grad_norm: f64,
    theta2: f64,
    alpha: f64,
    r: f64,
) -> bool {
    if !(model_reduction > 0.0) {
        return false;
    }
    (f0 - fplus + r) / model_reduction >= theta && grad_norm >= theta2 * alpha
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sass_step_examples() {
        let p = sass_step(&[2.0, 0.0], &Metric::Identity, 0.5).unwrap();
        assert_eq!(p.step, vec![-1.0, 0.0]);
        assert_eq!(p.model_reduction, 1.0);

        let p = sass_step(&[0.0, 0.0], &Metric::Identity, 0.5).unwrap();
        assert_eq!(p.step, vec![0.0, 0.0]);
        assert_eq!(p.model_reduction, 0.0);

        let p = sass_step(&[2.0, 2.0], &Metric::Diagonal(vec![2.0, 1.0]), 1.0).unwrap();
        assert_eq!(p.step, vec![-1.0, -2.0]);
        assert_eq!(p.model_reduction, 0.5 * (2.0 + 4.0));
    }

    #[test]
    fn sass_step_singular_metric() {
        let h = Metric::Dense {
            dim: 2,
            entries: vec![1.0, 2.0, 2.0, 4.0],
        };
        assert!(matches!(sass_step(&[1.0, 1.0], &h, 1.0), Err(Error::LinearSolve(_))));
    }

    #[test]
    fn sass_accept_examples() {
        // g^T s = -1
        assert!(sass_accept(1.0, 0.5, &[1.0], &[-1.0], 0.1, 0.05).unwrap());
        // exact boundary: 0.1 = 0.1
        assert!(sass_accept(0.25, 0.125, &[1.0], &[-1.0], 0.125, 0.0).unwrap());
        assert!(sass_accept(1.0, 1.0, &[0.0], &[0.0], 0.5, 0.0).unwrap());
        assert!(!sass_accept(1.0, 1.0, &[1.0], &[-1.0], 0.5, 0.0).unwrap());
        assert!(sass_accept(f64::NAN, 1.0, &[0.0], &[0.0], 0.5, 0.0).is_err());
    }

    #[test]
    fn storm_step_examples() {
        let p = storm_step(&[3.0, 4.0], 1.0);
        assert!((p.step[0] + 0.6).abs() < 1e-15 && (p.step[1] + 0.8).abs() < 1e-15);
        assert_eq!(p.model_reduction, 5.0);
        let p = storm_step(&[0.0, 0.0], 1.0);
        assert_eq!(p.step, vec![0.0, 0.0]);
        assert_eq!(p.model_reduction, 0.0);
        let p = storm_step(&[3.0, 4.0], 0.1);
        assert!((p.model_reduction - 0.5).abs() < 1e-15);
    }

    #[test]
    fn storm_accept_examples() {
        assert!(storm_accept(1.9, 1.0, 1.0, 0.5, 5.0, 1.0, 1.0, 0.0));
        assert!(!storm_accept(100.0, 0.0, 1.0, 0.5, 0.5, 1.0, 1.0, 0.0));
        assert!(!storm_accept(1.0, 0.0, 0.0, 0.5, 5.0, 1.0, 1.0, 0.0));
        // boundary on both conditions
        assert!(storm_accept(0.5, 0.0, 1.0, 0.5, 1.0, 1.0, 1.0, 0.0));
    }

    fn vec2() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 1..6)
    }

    proptest! {
        #[test]
        fn storm_step_stays_in_the_ball(g in vec2(), alpha in 1e-3f64..10.0) {
            let p = storm_step(&g, alpha);
            let len = linalg::norm(&p.step);
            prop_assert!(len <= alpha * (1.0 + 1e-12));
            if linalg::norm(&g) > 0.0 {
                prop_assert!((len - alpha).abs() <= 1e-12 * alpha);
            }
        }

        #[test]
        fn accept_tests_ignore_common_shifts(
            f0 in -5.0f64..5.0, fp in -5.0f64..5.0, shift in -100.0f64..100.0,
            red in 0.0f64..3.0, theta in 0.01f64..0.99,
        ) {
            // Shifts by a power of two keep differences exact.
            let shift = (shift * 4.0).round() / 4.0;
            let f0 = (f0 * 1024.0).round() / 1024.0;
            let fp = (fp * 1024.0).round() / 1024.0;
            prop_assert_eq!(
                storm_accept(f0, fp, red, theta, 1.0, 0.5, 1.0, 0.0),
                storm_accept(f0 + shift, fp + shift, red, theta, 1.0, 0.5, 1.0, 0.0)
            );
            let g = [1.0];
            let s = [-red];
            prop_assert_eq!(
                sass_accept(f0, fp, &g, &s, theta, 0.0).unwrap(),
                sass_accept(f0 + shift, fp + shift, &g, &s, theta, 0.0).unwrap()
            );
        }
    }
}
