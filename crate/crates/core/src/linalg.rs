//! Small dense vector helpers and the positive-definite scaling used by
//! step search.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    math::sqrt(dot(a, a))
}

/// `a + t * b`
pub fn add_scaled(a: &[f64], t: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * y).collect()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// A symmetric positive-definite matrix `H` used to scale gradient steps.
#[derive(Debug, Clone, Default, PartialEq)]
pub enum Metric {
    #[default]
    Identity,
    Diagonal(Vec<f64>),
    /// Row-major `dim x dim` symmetric matrix.
    Dense { dim: usize, entries: Vec<f64> },
}

impl Metric {
    /// Solves `H x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match self {
            Metric::Identity => Ok(rhs.to_vec()),
            Metric::Diagonal(d) => {
                if d.len() != rhs.len() {
                    return Err(Error::LinearSolve(format!(
                        "diagonal has {} entries, right-hand side {}",
                        d.len(),
                        rhs.len()
                    )));
                }
                d.iter()
                    .zip(rhs)
                    .map(|(&h, &b)| {
                        if h > 0.0 && h.is_finite() {
                            Ok(b / h)
                        } else {
                            Err(Error::LinearSolve(format!(
                                "diagonal entry {h} is not positive"
                            )))
                        }
                    })
                    .collect()
            }
            Metric::Dense { dim, entries } => {
                if rhs.len() != *dim || entries.len() != dim * dim {
                    return Err(Error::LinearSolve(format!(
                        "matrix is {dim}x{dim} with {} entries, right-hand side {}",
                        entries.len(),
                        rhs.len()
                    )));
                }
                let l = cholesky(*dim, entries)?;
                Ok(cholesky_solve(*dim, &l, rhs))
            }
        }
    }
}

fn cholesky(n: usize, a: &[f64]) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            if math::abs(a[i * n + j] - a[j * n + i]) > 1e-12 * (1.0 + math::abs(a[i * n + j])) {
                return Err(Error::LinearSolve(format!("matrix is not symmetric at ({i},{j})")));
            }
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::LinearSolve(format!(
                        "matrix is not positive definite (pivot {i} = {s})"
                    )));
                }
                l[i * n + i] = math::sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(l)
}

fn cholesky_solve(n: usize, l: &[f64], b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}
