//! The `mc-study` subcommand: Monte Carlo comparison of the estimators.

use crate::config;
use crate::opts::{self, OutputFormat};
use crate::McStudyArgs;
use mqiv::simulation::{run_study_with, McConfig};
use mqiv::{Error, ExecMode, Result};

fn preset(name: &str) -> Result<McConfig> {
    match name {
        // The benchmark study at desk scale: 200 replications instead of
        // 1000, oracle nuisances, all four headline estimators.
        "table2-desk" => Ok(McConfig {
            replications: 200,
            ..McConfig::benchmark_defaults()
        }),
        other => Err(Error::invalid(format!(
            "unknown preset {other:?} (expected table2-desk)"
        ))),
    }
}

pub fn run(args: &McStudyArgs) -> Result<()> {
    let sec = config::load_section(args.config.as_deref(), "mc-study")?;

    let mut cfg = match args.preset.as_deref().or(sec.get_str("preset")) {
        Some(name) => preset(name)?,
        None => McConfig::benchmark_defaults(),
    };
    if let Some(sizes) = args.sizes.as_deref().or(sec.get_str("sizes")) {
        cfg.sample_sizes = opts::parse_sizes(sizes)?;
    }
    if let Some(reps) = args.reps.or(sec.get("reps")?) {
        cfg.replications = reps;
    }
    if let Some(estimators) = args.estimator.as_deref().or(sec.get_str("estimator")) {
        cfg.estimators = opts::parse_estimators(estimators)?;
    }
    if let Some(learner) = args.learner.as_deref().or(sec.get_str("learner")) {
        cfg.learner_spec = learner.parse()?;
    }
    if let Some(k) = args.k_folds.or(sec.get("k-folds")?) {
        cfg.k_folds = k;
    }
    if let Some(er) = args.er.as_deref().or(sec.get_str("er")) {
        cfg.er_mode = opts::parse_er(er)?;
    }
    if let Some(mechanism) = args.mechanism.as_deref().or(sec.get_str("mechanism")) {
        cfg.mechanism = opts::parse_mechanism(mechanism)?;
    }
    if let Some(seed) = args.seed.or(sec.get("seed")?) {
        cfg.base_seed = seed;
    }
    if let Some(level) = args.level.or(sec.get("level")?) {
        cfg.ci_level = level;
    }
    let jobs = args.jobs.or(sec.get("jobs")?);
    let progress = args.progress || sec.get_bool("progress")?.unwrap_or(false);
    let fail_tolerance = args
        .fail_tolerance
        .or(sec.get("fail-tolerance")?)
        .unwrap_or(0.0);
    if !(0.0..=1.0).contains(&fail_tolerance) {
        return Err(Error::invalid(format!(
            "--fail-tolerance must lie in [0, 1], got {fail_tolerance}"
        )));
    }
    let format = args
        .format
        .or(sec.get("format")?)
        .unwrap_or(OutputFormat::Json);

    // Replications run on the global pool, capped by --jobs; one worker
    // means the fully sequential path.
    let mode = match jobs {
        Some(0) => return Err(Error::invalid("--jobs must be at least 1")),
        Some(1) => ExecMode::Sequential,
        Some(n) => {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            ExecMode::Parallel
        }
        None => ExecMode::Parallel,
    };

    let show = |done: usize, total: usize| {
        eprint!("\r{done}/{total} replications");
        if done == total {
            eprintln!();
        }
    };
    let report = run_study_with(&cfg, mode, progress.then_some(&show as _))?;

    opts::emit(
        &report.to_json(),
        &report.to_table(),
        format,
        args.output.as_deref(),
    )?;

    let worst = report
        .rows
        .iter()
        .filter(|r| r.n_reps > 0)
        .map(|r| r.failures as f64 / r.n_reps as f64)
        .fold(0.0_f64, f64::max);
    if worst > fail_tolerance {
        return Err(Error::estimation(format!(
            "replication failure rate {worst:.3} exceeds tolerance {fail_tolerance}"
        )));
    }
    Ok(())
}
