//! The `estimate` subcommand: cross-fitted MQIV estimation on a CSV file.

use crate::config;
use crate::opts::{self, OutputFormat};
use crate::EstimateArgs;
use mqiv::data::{self, ColumnMapping};
use mqiv::estimators::{
    estimate_direct_effect_treated, estimate_eif_mqiv, estimate_plugin_mqiv,
    estimate_plugin_single_arm, estimate_plugin_wald, EstimateResult,
};
use mqiv::learners::LearnerSpec;
use mqiv::nuisance;
use mqiv::simulation::EstimatorKind;
use mqiv::{Error, Result};
use std::fmt::Write as _;

pub fn run(args: &EstimateArgs) -> Result<()> {
    let sec = config::load_section(args.config.as_deref(), "estimate")?;

    let input = args
        .input
        .clone()
        .or(sec.get("input")?)
        .ok_or_else(|| Error::invalid("missing --input (or `input` in the config file)"))?;
    let outcome = args
        .outcome
        .clone()
        .or(sec.get("outcome")?)
        .unwrap_or_else(|| "y".into());
    let treatment = args
        .treatment
        .clone()
        .or(sec.get("treatment")?)
        .unwrap_or_else(|| "a".into());
    let instrument = args
        .instrument
        .clone()
        .or(sec.get("instrument")?)
        .unwrap_or_else(|| "z".into());
    let covariates = opts::parse_covariates(
        args.covariates
            .as_deref()
            .or(sec.get_str("covariates"))
            .unwrap_or("x1,x2"),
    )?;
    let kinds = opts::parse_estimators(
        args.estimator
            .as_deref()
            .or(sec.get_str("estimator"))
            .unwrap_or("if1"),
    )?;
    let learner: LearnerSpec = args
        .learner
        .as_deref()
        .or(sec.get_str("learner"))
        .unwrap_or("ensemble")
        .parse()?;
    let k_folds = args.k_folds.or(sec.get("k-folds")?).unwrap_or(5);
    let seed = args.seed.or(sec.get("seed")?).unwrap_or(0);
    let level = args.level.or(sec.get("level")?).unwrap_or(0.95);
    let format = args
        .format
        .or(sec.get("format")?)
        .unwrap_or(OutputFormat::Json);

    let mapping = ColumnMapping::new(outcome, treatment, instrument, covariates)?;
    let ds = data::load_csv(&input, &mapping)?;
    for warning in data::validate(&ds).warnings {
        eprintln!("warning: {warning}");
    }

    let folds = data::split_folds(ds.n(), k_folds, seed)?;
    let spec = learner.with_seed(seed);
    let need_single_arm = kinds.iter().any(|k| k.needs_single_arm());
    let raw = nuisance::fit_raw_nuisances(&ds, &folds, &spec, need_single_arm)?;
    let derived = nuisance::derive(&raw);

    let mut results = Vec::with_capacity(kinds.len());
    for kind in &kinds {
        let result = match kind {
            EstimatorKind::W1 => estimate_plugin_mqiv(&ds, &raw, &derived)?,
            EstimatorKind::If1 => estimate_eif_mqiv(&ds, &folds, &raw, &derived, level)?,
            EstimatorKind::W2 => estimate_plugin_wald(&ds, &raw)?,
            EstimatorKind::W3 => estimate_plugin_single_arm(&ds, &raw)?,
            EstimatorKind::Phi => estimate_direct_effect_treated(&ds, &raw)?,
        };
        results.push(result);
    }

    let json = if results.len() == 1 {
        serde_json::to_string_pretty(&results[0])
    } else {
        serde_json::to_string_pretty(&results)
    }
    .map_err(|e| Error::estimation(format!("serializing results: {e}")))?;
    opts::emit(&json, &render_table(&results), format, args.output.as_deref())
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:>12.6}"),
        None => format!("{:>12}", "-"),
    }
}

fn render_table(results: &[EstimateResult]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10}{:>12}{:>12}{:>12}{:>12}",
        "estimator", "point", "se", "lower", "upper"
    );
    for r in results {
        let _ = writeln!(
            out,
            "{:<10}{}{}{}{}",
            r.estimator,
            cell(Some(r.point)),
            cell(r.se),
            cell(r.ci.map(|c| c[0])),
            cell(r.ci.map(|c| c[1])),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_prints_dashes_for_missing_uncertainty() {
        let r = EstimateResult {
            estimator: "W2".into(),
            point: 3.25,
            se: None,
            ci: None,
            level: None,
            fold_estimates: Vec::new(),
            diagnostics: Default::default(),
        };
        let table = render_table(&[r]);
        assert!(table.contains("W2"));
        assert!(table.contains("3.250000"));
        assert!(table.contains('-'));
    }
}
