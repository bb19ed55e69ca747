//! Least squares with polynomial feature expansion.
//!
//! Degree 2 expands `x` to `[1, x_1..x_d, x_j x_l for j <= l]`, which is
//! rich enough to represent every smooth nuisance truth of the simulation
//! benchmark up to quadratic terms. Normal equations are solved by
//! Cholesky; a rank-deficient design falls back to ridge with a fixed
//! jitter of 1e-8 and records a diagnostic flag.

use super::FitTask;
use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector};

/// Jitter added to the normal-equation diagonal when Cholesky fails.
pub const RIDGE_JITTER: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct PolyLeastSquares {
    coef: Vec<f64>,
    degree: u32,
    d: usize,
    probability: bool,
    ridge_fallback: bool,
}

/// Number of expanded features for dimension `d` at `degree`.
fn expanded_len(d: usize, degree: u32) -> usize {
    match degree {
        1 => 1 + d,
        2 => 1 + d + d * (d + 1) / 2,
        _ => unreachable!("degree validated to 1 or 2"),
    }
}

fn expand_into(x: &[f64], degree: u32, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    out.extend_from_slice(x);
    if degree == 2 {
        for j in 0..x.len() {
            for l in j..x.len() {
                out.push(x[j] * x[l]);
            }
        }
    }
}

pub(super) fn fit(
    features: &[f64],
    n: usize,
    d: usize,
    targets: &[f64],
    degree: u32,
    task: FitTask,
) -> Result<PolyLeastSquares> {
    let p = expanded_len(d, degree);
    let mut design = DMatrix::zeros(n, p);
    let mut row = Vec::with_capacity(p);
    for i in 0..n {
        expand_into(&features[i * d..(i + 1) * d], degree, &mut row);
        for (j, v) in row.iter().enumerate() {
            design[(i, j)] = *v;
        }
    }
    let y = DVector::from_column_slice(targets);
    let gram = design.transpose() * &design;
    let moment = design.transpose() * y;

    let mut ridge_fallback = false;
    let chol = match Cholesky::new(gram.clone()) {
        Some(c) => c,
        None => {
            ridge_fallback = true;
            let jittered = gram + DMatrix::identity(p, p) * RIDGE_JITTER;
            Cholesky::new(jittered).ok_or_else(|| {
                Error::estimation("least squares design singular even after ridge jitter")
            })?
        }
    };
    let coef = chol.solve(&moment);

    Ok(PolyLeastSquares {
        coef: coef.as_slice().to_vec(),
        degree,
        d,
        probability: task == FitTask::Probability,
        ridge_fallback,
    })
}

impl PolyLeastSquares {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn is_probability(&self) -> bool {
        self.probability
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coef
    }

    pub fn flags(&self) -> Vec<String> {
        if self.ridge_fallback {
            vec!["least_squares: ridge fallback (singular design)".into()]
        } else {
            Vec::new()
        }
    }

    pub(super) fn predict_raw(&self, x: &[f64]) -> f64 {
        let mut expanded = Vec::with_capacity(self.coef.len());
        expand_into(x, self.degree, &mut expanded);
        expanded
            .iter()
            .zip(&self.coef)
            .map(|(f, c)| f * c)
            .sum()
    }
}
