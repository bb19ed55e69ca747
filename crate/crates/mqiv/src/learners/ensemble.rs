//! Cross-validated convex ensemble over base learners.
//!
//! A lightweight stand-in for a stacked super learner: each candidate is
//! fitted on inner training folds and evaluated out-of-fold, then a convex
//! weight vector minimizing the inner-cross-validated squared error is
//! found by projected gradient descent on the simplex (fixed 500
//! iterations, step 0.1, tolerance 1e-8). Survivors are refitted on the
//! full training set and combined with those weights. Candidates whose fit
//! fails are dropped with a diagnostic; if all drop, fitting errors.

use super::{FitTask, FittedModel, LearnerSpec};
use crate::data::split_folds;
use crate::error::{Error, Result};

pub const WEIGHT_ITERATIONS: usize = 500;
pub const WEIGHT_STEP: f64 = 0.1;
pub const WEIGHT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct ConvexEnsemble {
    models: Vec<FittedModel>,
    weights: Vec<f64>,
    dropped: Vec<String>,
    d: usize,
    probability: bool,
}

impl ConvexEnsemble {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn is_probability(&self) -> bool {
        self.probability
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn flags(&self) -> Vec<String> {
        let mut flags = self.dropped.clone();
        for m in &self.models {
            flags.extend(m.flags());
        }
        flags
    }

    pub(super) fn predict_raw(&self, x: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for (model, w) in self.models.iter().zip(&self.weights) {
            acc += w * model.predict(x)?;
        }
        Ok(acc)
    }
}

/// Euclidean projection of `v` onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (j, sv) in sorted.iter().enumerate() {
        cumulative += sv;
        let candidate = (cumulative - 1.0) / (j as f64 + 1.0);
        if sv - candidate > 0.0 {
            tau = candidate;
        }
    }
    v.iter().map(|vi| (vi - tau).max(0.0)).collect()
}

/// Convex weights minimizing `(1/n) || P w - y ||^2` over the simplex,
/// where column `m` of `P` holds candidate `m`'s out-of-fold predictions.
fn solve_weights(oof: &[Vec<f64>], targets: &[f64]) -> Vec<f64> {
    let m = oof.len();
    let n = targets.len() as f64;
    let mut w = vec![1.0 / m as f64; m];
    let mut residual = vec![0.0; targets.len()];
    for _ in 0..WEIGHT_ITERATIONS {
        for (i, r) in residual.iter_mut().enumerate() {
            let mut pred = 0.0;
            for (c, wc) in oof.iter().zip(&w) {
                pred += wc * c[i];
            }
            *r = pred - targets[i];
        }
        let grad: Vec<f64> = oof
            .iter()
            .map(|c| 2.0 / n * c.iter().zip(&residual).map(|(p, r)| p * r).sum::<f64>())
            .collect();
        let proposal: Vec<f64> = w.iter().zip(&grad).map(|(wi, g)| wi - WEIGHT_STEP * g).collect();
        let next = project_simplex(&proposal);
        let change = next
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        w = next;
        if change < WEIGHT_TOLERANCE {
            break;
        }
    }
    w
}

#[allow(clippy::too_many_arguments)]
pub(super) fn cv_ensemble_fit(
    candidates: &[LearnerSpec],
    features: &[f64],
    n: usize,
    d: usize,
    targets: &[f64],
    task: FitTask,
    inner_k: usize,
    seed: u64,
) -> Result<FittedModel> {
    if n < inner_k {
        return Err(Error::estimation(format!(
            "cv_ensemble needs at least inner_k = {inner_k} rows, got {n}"
        )));
    }
    let folds = split_folds(n, inner_k, seed)?;

    // Out-of-fold prediction matrix, one column per surviving candidate.
    let mut survivors: Vec<&LearnerSpec> = Vec::new();
    let mut oof: Vec<Vec<f64>> = Vec::new();
    let mut dropped = Vec::new();
    'candidates: for spec in candidates {
        let mut preds = vec![0.0; n];
        for fold in 0..inner_k {
            let train = folds.out_of_fold(fold);
            let eval = folds.in_fold(fold);
            let mut sub_features = Vec::with_capacity(train.len() * d);
            let mut sub_targets = Vec::with_capacity(train.len());
            for &i in &train {
                sub_features.extend_from_slice(&features[i * d..(i + 1) * d]);
                sub_targets.push(targets[i]);
            }
            let model = match super::fit(spec, &sub_features, train.len(), d, &sub_targets, task) {
                Ok(m) => m,
                Err(e) => {
                    dropped.push(format!("cv_ensemble: dropped candidate {spec:?}: {e}"));
                    continue 'candidates;
                }
            };
            for &i in &eval {
                preds[i] = model.predict(&features[i * d..(i + 1) * d])?;
            }
        }
        survivors.push(spec);
        oof.push(preds);
    }
    if survivors.is_empty() {
        return Err(Error::estimation(
            "cv_ensemble: every candidate failed to fit",
        ));
    }

    let weights = solve_weights(&oof, targets);

    let mut models = Vec::with_capacity(survivors.len());
    for spec in &survivors {
        models.push(super::fit(spec, features, n, d, targets, task)?);
    }

    Ok(FittedModel::Ensemble(ConvexEnsemble {
        models,
        weights,
        dropped,
        d,
        probability: task == FitTask::Probability,
    }))
}
