//! k-nearest-neighbour regression/classification.
//!
//! Features are standardized with training-fold statistics (mean 0, sd 1)
//! before Euclidean distances are computed; constant features pass through.
//! Distance ties are broken by training index, so predictions are
//! deterministic. `k` larger than the training set degrades to the global
//! mean.

use super::{FitTask, Standardizer};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    k: usize,
    d: usize,
    standardizer: Standardizer,
    /// Standardized training features, row-major.
    xs: Vec<f64>,
    targets: Vec<f64>,
    probability: bool,
}

pub(super) fn fit(
    features: &[f64],
    n: usize,
    d: usize,
    targets: &[f64],
    k: usize,
    task: FitTask,
) -> Result<KnnModel> {
    let standardizer = Standardizer::fit(features, n, d);
    let mut xs = vec![0.0; n * d];
    for i in 0..n {
        let (src, dst) = (&features[i * d..(i + 1) * d], &mut xs[i * d..(i + 1) * d]);
        standardizer.apply_into(src, dst);
    }
    Ok(KnnModel {
        k: k.min(n),
        d,
        standardizer,
        xs,
        targets: targets.to_vec(),
        probability: task == FitTask::Probability,
    })
}

impl KnnModel {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn is_probability(&self) -> bool {
        self.probability
    }

    pub(super) fn predict_raw(&self, x: &[f64]) -> f64 {
        let n = self.targets.len();
        let mut q = vec![0.0; self.d];
        self.standardizer.apply_into(x, &mut q);
        let mut scored: Vec<(f64, usize)> = (0..n)
            .map(|i| {
                let row = &self.xs[i * self.d..(i + 1) * self.d];
                let dist2: f64 = row.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
                (dist2, i)
            })
            .collect();
        // Total order (distance, then index) makes the neighbour set unique.
        let cmp = |a: &(f64, usize), b: &(f64, usize)| {
            a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1))
        };
        if self.k < n {
            scored.select_nth_unstable_by(self.k - 1, cmp);
        }
        let sum: f64 = scored[..self.k].iter().map(|(_, i)| self.targets[*i]).sum();
        sum / self.k as f64
    }
}
