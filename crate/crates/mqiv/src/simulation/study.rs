//! Monte Carlo replication studies over the benchmark DGP.
//!
//! Each replication draws a fresh sample with seed `base_seed + r`, fits
//! nuisances by cross-fitting, runs the requested estimators, and records
//! point/SE/CI. Aggregates follow the usual summary table layout: bias
//! against the oracle ATT, mean reported SE (ASE), the standard deviation
//! of the points (ESE), and CI coverage. Replications are independent and
//! may run in parallel; results are identical (bit for bit) in either
//! execution mode because replication r owns its seed.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::data::split_folds;
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_direct_effect_treated, estimate_eif_mqiv, estimate_plugin_mqiv,
    estimate_plugin_single_arm, estimate_plugin_wald, EstimateResult,
};
use crate::exec::{map_indexed, ExecMode};
use crate::learners::LearnerSpec;
use crate::nuisance::{derive, fit_raw_nuisances};
use crate::simulation::dgp::{generate, DgpConfig, ErMode, Mechanism};
use crate::simulation::oracle;

/// The estimators a study can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EstimatorKind {
    W1,
    If1,
    W2,
    W3,
    Phi,
}

impl EstimatorKind {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::W1 => "W1",
            EstimatorKind::If1 => "IF1",
            EstimatorKind::W2 => "W2",
            EstimatorKind::W3 => "W3",
            EstimatorKind::Phi => "PHI",
        }
    }

    /// Whether the estimator needs the single-arm regressions `m0`, `m1`.
    pub fn needs_single_arm(self) -> bool {
        self == EstimatorKind::W3
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "w1" => Ok(EstimatorKind::W1),
            "if1" => Ok(EstimatorKind::If1),
            "w2" => Ok(EstimatorKind::W2),
            "w3" => Ok(EstimatorKind::W3),
            "phi" => Ok(EstimatorKind::Phi),
            other => Err(Error::invalid(format!(
                "unknown estimator '{other}' (expected w1, if1, w2, w3, or phi)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub estimators: Vec<EstimatorKind>,
    pub learner_spec: LearnerSpec,
    pub k_folds: usize,
    pub er_mode: ErMode,
    pub mechanism: Mechanism,
    pub base_seed: u64,
    pub ci_level: f64,
}

impl McConfig {
    /// The benchmark study: 1000 replications of W1/IF1/W2/W3 with oracle
    /// nuisances at N in {600, 2400, 7200}.
    pub fn benchmark_defaults() -> Self {
        McConfig {
            sample_sizes: vec![600, 2400, 7200],
            replications: 1000,
            estimators: vec![
                EstimatorKind::W1,
                EstimatorKind::If1,
                EstimatorKind::W2,
                EstimatorKind::W3,
            ],
            learner_spec: LearnerSpec::Oracle {
                er: ErMode::Violated,
            },
            k_folds: 5,
            er_mode: ErMode::Violated,
            mechanism: Mechanism::DirectMultiplicative,
            base_seed: 2024,
            ci_level: 0.95,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.sample_sizes.is_empty() {
            return Err(Error::invalid("study needs at least one sample size"));
        }
        if self.replications == 0 {
            return Err(Error::invalid("study needs at least one replication"));
        }
        if self.estimators.is_empty() {
            return Err(Error::invalid("study needs at least one estimator"));
        }
        if self.k_folds < 2 {
            return Err(Error::invalid("cross-fitting needs at least 2 folds"));
        }
        for &n in &self.sample_sizes {
            if n < self.k_folds {
                return Err(Error::invalid(format!(
                    "sample size {n} is smaller than k_folds = {}",
                    self.k_folds
                )));
            }
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::invalid(format!(
                "confidence level must lie in (0,1), got {}",
                self.ci_level
            )));
        }
        self.learner_spec.validate()
    }
}

/// Aggregate row for one (estimator, sample size) pair. Aggregates are
/// `None` when every replication failed; ASE and coverage are additionally
/// `None` for estimators that report no SE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub estimator: EstimatorKind,
    pub n: usize,
    pub bias: Option<f64>,
    pub ase: Option<f64>,
    pub ese: Option<f64>,
    pub coverage: Option<f64>,
    pub n_reps: usize,
    pub failures: usize,
    pub failure_reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub oracle_att: f64,
    pub config: McConfig,
    pub rows: Vec<McRow>,
}

impl McReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Text table in the summary layout: one block per sample size with
    /// Bias/ASE/ESE/Coverage rows and one column per estimator.
    pub fn to_table(&self) -> String {
        fn cell(v: Option<f64>) -> String {
            match v {
                Some(v) => format!("{v:>9.3}"),
                None => format!("{:>9}", "-"),
            }
        }
        let mut out = String::new();
        let _ = writeln!(out, "Oracle ATT: {:.4}", self.oracle_att);
        let mode = match self.config.er_mode {
            ErMode::Violated => "violated",
            ErMode::Satisfied => "satisfied",
        };
        let _ = writeln!(
            out,
            "Exclusion restriction {mode}; {} replications per cell",
            self.config.replications
        );
        for &n in &self.config.sample_sizes {
            let rows: Vec<&McRow> = self.rows.iter().filter(|r| r.n == n).collect();
            if rows.is_empty() {
                continue;
            }
            let _ = writeln!(out, "\nN = {n}");
            let mut header = format!("{:<10}", "");
            for r in &rows {
                let _ = write!(header, "{:>9}", r.estimator.label());
            }
            let _ = writeln!(out, "{header}");
            for (name, pick) in [
                ("Bias", 0usize),
                ("ASE", 1),
                ("ESE", 2),
                ("Coverage", 3),
            ] {
                let mut line = format!("{name:<10}");
                for r in &rows {
                    let v = match pick {
                        0 => r.bias,
                        1 => r.ase,
                        2 => r.ese,
                        _ => r.coverage,
                    };
                    line.push_str(&cell(v));
                }
                let _ = writeln!(out, "{line}");
            }
            let failed: usize = rows.iter().map(|r| r.failures).sum();
            if failed > 0 {
                let _ = writeln!(out, "(failed replications: {failed})");
            }
        }
        out
    }
}

/// Per-replication outcome for each requested estimator, in config order.
type RepResult = Vec<std::result::Result<EstimateResult, String>>;

fn run_replication(cfg: &McConfig, n: usize, rep: usize) -> RepResult {
    let seed = cfg.base_seed + rep as u64;
    let sample = generate(&DgpConfig {
        n,
        er_mode: cfg.er_mode,
        mechanism: cfg.mechanism,
        seed,
        keep_latents: false,
    });
    let need_single_arm = cfg.estimators.iter().any(|e| e.needs_single_arm());
    let spec = cfg.learner_spec.clone().with_seed(seed);

    let prepared = split_folds(n, cfg.k_folds, seed).and_then(|folds| {
        let raw = fit_raw_nuisances(&sample.ds, &folds, &spec, need_single_arm)?;
        let derived = derive(&raw);
        Ok((folds, raw, derived))
    });
    let (folds, raw, derived) = match prepared {
        Ok(v) => v,
        Err(e) => {
            let reason = e.to_string();
            return cfg.estimators.iter().map(|_| Err(reason.clone())).collect();
        }
    };

    cfg.estimators
        .iter()
        .map(|kind| {
            let result = match kind {
                EstimatorKind::W1 => estimate_plugin_mqiv(&sample.ds, &raw, &derived),
                EstimatorKind::If1 => {
                    estimate_eif_mqiv(&sample.ds, &folds, &raw, &derived, cfg.ci_level)
                }
                EstimatorKind::W2 => estimate_plugin_wald(&sample.ds, &raw),
                EstimatorKind::W3 => estimate_plugin_single_arm(&sample.ds, &raw),
                EstimatorKind::Phi => estimate_direct_effect_treated(&sample.ds, &raw),
            };
            result.map_err(|e| e.to_string())
        })
        .collect()
}

fn aggregate(
    kind: EstimatorKind,
    n: usize,
    reps: &[RepResult],
    slot: usize,
    oracle_att: f64,
) -> McRow {
    let mut points = Vec::new();
    let mut ses = Vec::new();
    let mut covered = 0usize;
    let mut with_ci = 0usize;
    let mut failures = 0usize;
    let mut failure_reasons: Vec<String> = Vec::new();
    for rep in reps {
        match &rep[slot] {
            Ok(est) => {
                points.push(est.point);
                if let Some(se) = est.se {
                    ses.push(se);
                }
                if let Some([lo, hi]) = est.ci {
                    with_ci += 1;
                    if (lo..=hi).contains(&oracle_att) {
                        covered += 1;
                    }
                }
            }
            Err(reason) => {
                failures += 1;
                if !failure_reasons.iter().any(|r| r == reason) {
                    failure_reasons.push(reason.clone());
                }
            }
        }
    }
    let m = points.len();
    let bias = (m > 0).then(|| points.iter().sum::<f64>() / m as f64 - oracle_att);
    let ese = (m > 0).then(|| {
        if m < 2 {
            0.0
        } else {
            let mean = points.iter().sum::<f64>() / m as f64;
            (points.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (m as f64 - 1.0)).sqrt()
        }
    });
    let ase = (!ses.is_empty()).then(|| ses.iter().sum::<f64>() / ses.len() as f64);
    let coverage = (with_ci > 0).then(|| covered as f64 / with_ci as f64);
    McRow {
        estimator: kind,
        n,
        bias,
        ase,
        ese,
        coverage,
        n_reps: reps.len(),
        failures,
        failure_reasons,
    }
}

/// Run a study with parallel replications.
pub fn run_study(cfg: &McConfig) -> Result<McReport> {
    run_study_with(cfg, ExecMode::Parallel, None)
}

/// Progress observer: called with (completed, total) after each replication.
pub type ProgressFn<'a> = &'a (dyn Fn(usize, usize) + Sync);

/// Run a study under an explicit execution mode. Reports are identical
/// across modes and parallelism degrees.
pub fn run_study_with(
    cfg: &McConfig,
    mode: ExecMode,
    progress: Option<ProgressFn>,
) -> Result<McReport> {
    cfg.validate()?;
    let oracle_att = oracle::att_quadrature();
    let total = cfg.sample_sizes.len() * cfg.replications;
    let done = AtomicUsize::new(0);

    let mut rows = Vec::new();
    for &n in &cfg.sample_sizes {
        let reps: Vec<RepResult> = map_indexed(mode, cfg.replications, |r| {
            let out = run_replication(cfg, n, r);
            if let Some(report) = progress {
                report(done.fetch_add(1, Ordering::Relaxed) + 1, total);
            }
            out
        });
        for (slot, &kind) in cfg.estimators.iter().enumerate() {
            rows.push(aggregate(kind, n, &reps, slot, oracle_att));
        }
    }
    Ok(McReport {
        oracle_att,
        config: cfg.clone(),
        rows,
    })
}
