//! Gradient-boosted depth-1 regression trees (stumps), squared-error loss.
//!
//! Full-batch and fully deterministic: every round scans all features and
//! all split points via prefix sums over presorted feature orders, picking
//! the first best split (lowest feature index, then lowest threshold) on
//! ties. Features are standardized with training-fold statistics, which
//! leaves split structure unchanged but keeps the stored model scale-free.

use super::{FitTask, Standardizer};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
struct Stump {
    feature: usize,
    threshold: f64,
    left: f64,
    right: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StumpEnsemble {
    base: f64,
    learning_rate: f64,
    stumps: Vec<Stump>,
    standardizer: Standardizer,
    d: usize,
    probability: bool,
}

pub(super) fn fit(
    features: &[f64],
    n: usize,
    d: usize,
    targets: &[f64],
    rounds: usize,
    learning_rate: f64,
    task: FitTask,
) -> Result<StumpEnsemble> {
    let standardizer = Standardizer::fit(features, n, d);
    let mut xs = vec![0.0; n * d];
    for i in 0..n {
        standardizer.apply_into(&features[i * d..(i + 1) * d], &mut xs[i * d..(i + 1) * d]);
    }

    // Presorted row order per feature, reused every round.
    let orders: Vec<Vec<usize>> = (0..d)
        .map(|j| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| {
                xs[a * d + j]
                    .partial_cmp(&xs[b * d + j])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            idx
        })
        .collect();

    let base = targets.iter().sum::<f64>() / n as f64;
    let mut fitted = vec![base; n];
    let mut stumps = Vec::with_capacity(rounds);

    let mut left_sum = vec![0.0; n];
    for _ in 0..rounds {
        // Best split = largest reduction sum_l^2/n_l + sum_r^2/n_r of the
        // residual sum of squares; ties keep the first candidate found.
        let mut best: Option<(f64, usize, f64, f64, f64)> = None;
        let total: f64 = (0..n).map(|i| targets[i] - fitted[i]).sum();
        for (j, order) in orders.iter().enumerate() {
            let mut acc = 0.0;
            for (pos, &i) in order.iter().enumerate() {
                acc += targets[i] - fitted[i];
                left_sum[pos] = acc;
            }
            for pos in 0..n - 1 {
                let here = xs[order[pos] * d + j];
                let next = xs[order[pos + 1] * d + j];
                if here >= next {
                    continue;
                }
                let nl = (pos + 1) as f64;
                let nr = (n - pos - 1) as f64;
                let sl = left_sum[pos];
                let sr = total - sl;
                let gain = sl * sl / nl + sr * sr / nr;
                if best.is_none_or(|b| gain > b.0) {
                    best = Some((gain, j, 0.5 * (here + next), sl / nl, sr / nr));
                }
            }
        }
        let stump = match best {
            Some((_, feature, threshold, left, right)) => Stump {
                feature,
                threshold,
                left,
                right,
            },
            // All feature values identical: constant correction.
            None => Stump {
                feature: 0,
                threshold: f64::INFINITY,
                left: total / n as f64,
                right: 0.0,
            },
        };
        for i in 0..n {
            let v = xs[i * d + stump.feature];
            let out = if v <= stump.threshold {
                stump.left
            } else {
                stump.right
            };
            fitted[i] += learning_rate * out;
        }
        stumps.push(stump);
    }

    Ok(StumpEnsemble {
        base,
        learning_rate,
        stumps,
        standardizer,
        d,
        probability: task == FitTask::Probability,
    })
}

impl StumpEnsemble {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn is_probability(&self) -> bool {
        self.probability
    }

    pub fn rounds(&self) -> usize {
        self.stumps.len()
    }

    pub(super) fn predict_raw(&self, x: &[f64]) -> f64 {
        let mut q = vec![0.0; self.d];
        self.standardizer.apply_into(x, &mut q);
        let mut out = self.base;
        for s in &self.stumps {
            out += self.learning_rate
                * if q[s.feature] <= s.threshold {
                    s.left
                } else {
                    s.right
                };
        }
        out
    }
}
