//! Supervised learners used to fit nuisance functions.
//!
//! The set is deliberately small and self-contained: polynomial least
//! squares, IRLS logistic regression, k-nearest neighbours, gradient-boosted
//! depth-1 stumps, and a cross-validated convex ensemble over the first
//! three (a stand-in for a stacked super learner; see [`ensemble`]). An
//! `Oracle` spec is resolved by the nuisance layer against the simulation
//! oracle instead of being fitted from data.
//!
//! Every learner is deterministic given its inputs: there is no internal
//! randomness anywhere, and the ensemble's inner fold split is driven by a
//! seed carried in the spec. Probability outputs are clipped to
//! [`CLIP_LO`], [`CLIP_HI`].

pub mod ensemble;
pub mod knn;
pub mod least_squares;
pub mod logistic;
pub mod stumps;

use crate::error::{Error, Result};
use crate::simulation::dgp::ErMode;

/// Lower probability clip bound.
pub const CLIP_LO: f64 = 0.01;
/// Upper probability clip bound.
pub const CLIP_HI: f64 = 0.99;

pub(crate) fn clip_probability(p: f64) -> f64 {
    p.clamp(CLIP_LO, CLIP_HI)
}

/// Whether a fit targets a real-valued regression or a probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitTask {
    Regression,
    Probability,
}

/// Learner choice plus hyperparameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    LeastSquares {
        /// Polynomial expansion degree, 1 or 2 (2 includes cross terms).
        degree: u32,
    },
    Logistic,
    Knn {
        k: usize,
    },
    BoostedStumps {
        rounds: usize,
        learning_rate: f64,
    },
    CvEnsemble {
        candidates: Vec<LearnerSpec>,
        inner_k: usize,
        seed: u64,
    },
    /// True nuisance functions of the simulation DGP, evaluated by
    /// quadrature. Only valid on simulated data; resolved by the nuisance
    /// layer, so [`fit`] rejects it.
    Oracle { er: ErMode },
}

pub const DEFAULT_KNN_K: usize = 25;
pub const DEFAULT_STUMP_ROUNDS: usize = 200;
pub const DEFAULT_STUMP_LEARNING_RATE: f64 = 0.1;
pub const DEFAULT_INNER_K: usize = 5;

impl LearnerSpec {
    /// The default nuisance learner: a convex ensemble over degree-2 least
    /// squares, kNN, and boosted stumps.
    pub fn default_ensemble(seed: u64) -> Self {
        LearnerSpec::CvEnsemble {
            candidates: vec![
                LearnerSpec::LeastSquares { degree: 2 },
                LearnerSpec::Knn { k: DEFAULT_KNN_K },
                LearnerSpec::BoostedStumps {
                    rounds: DEFAULT_STUMP_ROUNDS,
                    learning_rate: DEFAULT_STUMP_LEARNING_RATE,
                },
            ],
            inner_k: DEFAULT_INNER_K,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LearnerSpec::LeastSquares { degree } => {
                if !(1..=2).contains(degree) {
                    return Err(Error::invalid("least_squares degree must be 1 or 2"));
                }
            }
            LearnerSpec::Logistic => {}
            LearnerSpec::Knn { k } => {
                if *k == 0 {
                    return Err(Error::invalid("knn k must be at least 1"));
                }
            }
            LearnerSpec::BoostedStumps {
                rounds,
                learning_rate,
            } => {
                if *rounds == 0 {
                    return Err(Error::invalid("boosted_stumps rounds must be at least 1"));
                }
                if !(*learning_rate > 0.0 && *learning_rate <= 1.0) {
                    return Err(Error::invalid(
                        "boosted_stumps learning_rate must lie in (0, 1]",
                    ));
                }
            }
            LearnerSpec::CvEnsemble {
                candidates,
                inner_k,
                ..
            } => {
                if candidates.is_empty() {
                    return Err(Error::invalid("cv_ensemble needs at least one candidate"));
                }
                if *inner_k < 2 {
                    return Err(Error::invalid("cv_ensemble inner_k must be at least 2"));
                }
                for c in candidates {
                    if matches!(c, LearnerSpec::CvEnsemble { .. } | LearnerSpec::Oracle { .. }) {
                        return Err(Error::invalid(
                            "cv_ensemble candidates must be base learners",
                        ));
                    }
                    c.validate()?;
                }
            }
            LearnerSpec::Oracle { .. } => {}
        }
        Ok(())
    }

    /// Replace the ensemble's inner-split seed (no-op for base learners).
    pub fn with_seed(mut self, new_seed: u64) -> Self {
        if let LearnerSpec::CvEnsemble { ref mut seed, .. } = self {
            *seed = new_seed;
        }
        self
    }
}

/// Parse a CLI learner string such as `ls`, `ls:1`, `logistic`, `knn:15`,
/// `stumps:300:0.05`, `ensemble`, `oracle`, `oracle:satisfied`.
impl std::str::FromStr for LearnerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let parse_num = |v: &str, what: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad {what} {v:?} in learner spec {s:?}")))
        };
        let spec = match parts[0] {
            "ls" | "least-squares" | "least_squares" => LearnerSpec::LeastSquares {
                degree: match parts.get(1) {
                    Some(v) => parse_num(v, "degree")? as u32,
                    None => 2,
                },
            },
            "logistic" => LearnerSpec::Logistic,
            "knn" => LearnerSpec::Knn {
                k: match parts.get(1) {
                    Some(v) => parse_num(v, "k")? as usize,
                    None => DEFAULT_KNN_K,
                },
            },
            "stumps" | "boosted-stumps" | "boosted_stumps" => LearnerSpec::BoostedStumps {
                rounds: match parts.get(1) {
                    Some(v) => parse_num(v, "rounds")? as usize,
                    None => DEFAULT_STUMP_ROUNDS,
                },
                learning_rate: match parts.get(2) {
                    Some(v) => parse_num(v, "learning_rate")?,
                    None => DEFAULT_STUMP_LEARNING_RATE,
                },
            },
            "ensemble" | "cv-ensemble" | "cv_ensemble" => LearnerSpec::default_ensemble(0),
            "oracle" => LearnerSpec::Oracle {
                er: match parts.get(1) {
                    Some(&"satisfied") => ErMode::Satisfied,
                    Some(&"violated") | None => ErMode::Violated,
                    Some(other) => {
                        return Err(Error::invalid(format!(
                            "unknown oracle mode {other:?} (expected violated|satisfied)"
                        )))
                    }
                },
            },
            other => {
                return Err(Error::invalid(format!(
                    "unknown learner kind {other:?} (expected ls|logistic|knn|stumps|ensemble|oracle)"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// A fitted learner. Immutable; safe to share across threads.
#[derive(Debug, Clone)]
pub enum FittedModel {
    LeastSquares(least_squares::PolyLeastSquares),
    Logistic(logistic::LogisticModel),
    Knn(knn::KnnModel),
    BoostedStumps(stumps::StumpEnsemble),
    Ensemble(ensemble::ConvexEnsemble),
}

impl FittedModel {
    pub fn dim(&self) -> usize {
        match self {
            FittedModel::LeastSquares(m) => m.dim(),
            FittedModel::Logistic(m) => m.dim(),
            FittedModel::Knn(m) => m.dim(),
            FittedModel::BoostedStumps(m) => m.dim(),
            FittedModel::Ensemble(m) => m.dim(),
        }
    }

    pub fn is_probability(&self) -> bool {
        match self {
            FittedModel::LeastSquares(m) => m.is_probability(),
            FittedModel::Logistic(_) => true,
            FittedModel::Knn(m) => m.is_probability(),
            FittedModel::BoostedStumps(m) => m.is_probability(),
            FittedModel::Ensemble(m) => m.is_probability(),
        }
    }

    /// Diagnostic flags accumulated during fitting (ridge fallback, IRLS
    /// non-convergence, dropped ensemble candidates).
    pub fn flags(&self) -> Vec<String> {
        match self {
            FittedModel::LeastSquares(m) => m.flags(),
            FittedModel::Logistic(m) => m.flags(),
            FittedModel::Knn(_) => Vec::new(),
            FittedModel::BoostedStumps(_) => Vec::new(),
            FittedModel::Ensemble(m) => m.flags(),
        }
    }

    /// Predict at a single feature vector. Probability models are clipped
    /// to `[CLIP_LO, CLIP_HI]`; regression models are unclipped.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "feature vector has dimension {}, model expects {}",
                x.len(),
                self.dim()
            )));
        }
        let raw = match self {
            FittedModel::LeastSquares(m) => m.predict_raw(x),
            FittedModel::Logistic(m) => m.predict_raw(x),
            FittedModel::Knn(m) => m.predict_raw(x),
            FittedModel::BoostedStumps(m) => m.predict_raw(x),
            FittedModel::Ensemble(m) => m.predict_raw(x)?,
        };
        Ok(if self.is_probability() {
            clip_probability(raw)
        } else {
            raw
        })
    }
}

/// Fit `spec` on `n` rows of `d` features stored row-major in `features`.
///
/// Deterministic in its arguments. Probability tasks require binary
/// targets.
pub fn fit(
    spec: &LearnerSpec,
    features: &[f64],
    n: usize,
    d: usize,
    targets: &[f64],
    task: FitTask,
) -> Result<FittedModel> {
    spec.validate()?;
    if features.len() != n * d {
        return Err(Error::invalid(format!(
            "feature buffer has {} entries, expected {}x{}",
            features.len(),
            n,
            d
        )));
    }
    if targets.len() != n {
        return Err(Error::invalid("targets length must match row count"));
    }
    if task == FitTask::Probability && targets.iter().any(|t| *t != 0.0 && *t != 1.0) {
        return Err(Error::invalid("probability fits require binary targets"));
    }
    match spec {
        LearnerSpec::LeastSquares { degree } => {
            if n < d + 1 {
                return Err(Error::invalid(format!(
                    "least_squares needs at least d+1 = {} rows, got {n}",
                    d + 1
                )));
            }
            Ok(FittedModel::LeastSquares(least_squares::fit(
                features, n, d, targets, *degree, task,
            )?))
        }
        LearnerSpec::Logistic => {
            if task != FitTask::Probability {
                return Err(Error::invalid("logistic requires a probability task"));
            }
            if n < d + 1 {
                return Err(Error::invalid(format!(
                    "logistic needs at least d+1 = {} rows, got {n}",
                    d + 1
                )));
            }
            Ok(FittedModel::Logistic(logistic::fit(features, n, d, targets)?))
        }
        LearnerSpec::Knn { k } => Ok(FittedModel::Knn(knn::fit(features, n, d, targets, *k, task)?)),
        LearnerSpec::BoostedStumps {
            rounds,
            learning_rate,
        } => Ok(FittedModel::BoostedStumps(stumps::fit(
            features,
            n,
            d,
            targets,
            *rounds,
            *learning_rate,
            task,
        )?)),
        LearnerSpec::CvEnsemble {
            candidates,
            inner_k,
            seed,
        } => ensemble::cv_ensemble_fit(candidates, features, n, d, targets, task, *inner_k, *seed),
        LearnerSpec::Oracle { .. } => Err(Error::invalid(
            "oracle learner spec is resolved by the nuisance layer, not fitted from data",
        )),
    }
}

/// Training-fold standardization statistics (mean 0, sd 1; constant
/// features keep sd 1 so they pass through unchanged).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    pub fn fit(features: &[f64], n: usize, d: usize) -> Self {
        let mut mean = vec![0.0; d];
        for row in 0..n {
            for j in 0..d {
                mean[j] += features[row * d + j];
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut sd = vec![0.0; d];
        for row in 0..n {
            for j in 0..d {
                let dev = features[row * d + j] - mean[j];
                sd[j] += dev * dev;
            }
        }
        for s in &mut sd {
            *s = (*s / n as f64).sqrt();
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        Standardizer { mean, sd }
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for j in 0..x.len() {
            out[j] = (x[j] - self.mean[j]) / self.sd[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parsing_round_trips() {
        assert_eq!(
            "ls".parse::<LearnerSpec>().unwrap(),
            LearnerSpec::LeastSquares { degree: 2 }
        );
        assert_eq!(
            "knn:7".parse::<LearnerSpec>().unwrap(),
            LearnerSpec::Knn { k: 7 }
        );
        assert_eq!(
            "stumps:300:0.05".parse::<LearnerSpec>().unwrap(),
            LearnerSpec::BoostedStumps {
                rounds: 300,
                learning_rate: 0.05
            }
        );
        assert!(matches!(
            "oracle:satisfied".parse::<LearnerSpec>().unwrap(),
            LearnerSpec::Oracle {
                er: ErMode::Satisfied
            }
        ));
        assert!("forest".parse::<LearnerSpec>().is_err());
        assert!("knn:0".parse::<LearnerSpec>().is_err());
    }

    #[test]
    fn nested_ensembles_rejected() {
        let inner = LearnerSpec::default_ensemble(0);
        let spec = LearnerSpec::CvEnsemble {
            candidates: vec![inner],
            inner_k: 2,
            seed: 0,
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn probability_fit_requires_binary_targets() {
        let features = vec![0.0, 1.0, 2.0, 3.0];
        let targets = vec![0.0, 0.5, 1.0, 1.0];
        let err = fit(
            &LearnerSpec::Knn { k: 1 },
            &features,
            4,
            1,
            &targets,
            FitTask::Probability,
        );
        assert!(err.is_err());
    }

    #[test]
    fn oracle_spec_not_fittable() {
        let err = fit(
            &LearnerSpec::Oracle {
                er: ErMode::Violated,
            },
            &[0.0],
            1,
            1,
            &[0.0],
            FitTask::Regression,
        );
        assert!(err.is_err());
    }

    #[test]
    fn standardizer_handles_constant_features() {
        let s = Standardizer::fit(&[1.0, 5.0, 1.0, 7.0, 1.0, 9.0], 3, 2);
        assert_eq!(s.sd[0], 1.0);
        let mut out = [0.0; 2];
        s.apply_into(&[1.0, 7.0], &mut out);
        assert_eq!(out[0], 0.0);
        assert_eq!(out[1], 0.0);
    }
}
