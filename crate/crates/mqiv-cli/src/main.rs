//! `mqiv`: estimate treatment effects on the treated with a multiplicative
//! quasi-instrumental variable.
//!
//! Subcommands:
//! - `estimate`: cross-fitted estimation on a CSV dataset
//! - `simulate`: draw samples from the benchmark data-generating process
//! - `mc-study`: Monte Carlo comparison of the estimators
//! - `probe-robustness`: moment check under deliberately wrong nuisances
//!
//! Every command is deterministic given its flags. Flags override values
//! from `--config` (INI sections named after the subcommand), which
//! override built-in defaults. Exit codes: 0 success, 1 usage error,
//! 2 data error, 3 estimation failure; failures print a JSON object
//! `{"error":{"kind":...,"message":...}}` on stderr.

mod config;
mod estimate;
mod opts;
mod probe;
mod simulate;
mod study;

use clap::{Args, Parser, Subcommand};
use mqiv::Error;
use opts::OutputFormat;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "mqiv", version, about, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the marginal treatment effect on the treated from a CSV file
    Estimate(EstimateArgs),
    /// Draw a sample from the benchmark data-generating process
    Simulate(SimulateArgs),
    /// Run a Monte Carlo study of the estimators
    #[command(name = "mc-study")]
    McStudy(McStudyArgs),
    /// Check the multiply robust moment condition under wrong nuisances
    #[command(name = "probe-robustness", visible_alias = "probe")]
    ProbeRobustness(ProbeArgs),
}

#[derive(Args)]
pub struct EstimateArgs {
    /// Input CSV path
    #[arg(long)]
    input: Option<PathBuf>,
    /// Outcome column [default: y]
    #[arg(long)]
    outcome: Option<String>,
    /// Treatment column, coded 0/1 [default: a]
    #[arg(long)]
    treatment: Option<String>,
    /// Instrument column, coded 0/1 [default: z]
    #[arg(long)]
    instrument: Option<String>,
    /// Comma-separated covariate columns [default: x1,x2]
    #[arg(long)]
    covariates: Option<String>,
    /// Comma-separated estimators from w1,if1,w2,w3,phi [default: if1]
    #[arg(long)]
    estimator: Option<String>,
    /// Learner: ls[:degree] | logistic | knn[:k] | stumps[:rounds[:rate]] |
    /// ensemble | oracle[:violated|satisfied]  [default: ensemble]
    #[arg(long)]
    learner: Option<String>,
    /// Cross-fitting folds [default: 5]
    #[arg(long)]
    k_folds: Option<usize>,
    /// Seed for fold splits and learner tie-breaks [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Confidence level for the IF1 interval [default: 0.95]
    #[arg(long)]
    level: Option<f64>,
    /// Write the JSON results to this file instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    /// Stdout rendering [default: json]
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// INI config file; flags override its [estimate] section
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Number of observations [default: 1000]
    #[arg(long)]
    n: Option<usize>,
    /// Generator seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Exclusion restriction: violated | satisfied [default: violated]
    #[arg(long)]
    er: Option<String>,
    /// Treatment uptake mechanism: direct | and-gate [default: direct]
    #[arg(long)]
    mechanism: Option<String>,
    /// Include latent columns (u, potential treatments, cell means, y_er)
    #[arg(long)]
    keep_latents: bool,
    /// Print the oracle marginal effect instead of streaming CSV
    #[arg(long)]
    oracle_att: bool,
    /// Write the CSV to this file instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    /// INI config file; flags override its [simulate] section
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
pub struct McStudyArgs {
    /// Comma-separated sample sizes [default: 600,2400,7200]
    #[arg(long)]
    sizes: Option<String>,
    /// Replications per sample size [default: 1000]
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated estimators from w1,if1,w2,w3,phi [default: w1,if1,w2,w3]
    #[arg(long)]
    estimator: Option<String>,
    /// Learner for nuisance fits [default: oracle]
    #[arg(long)]
    learner: Option<String>,
    /// Cross-fitting folds [default: 5]
    #[arg(long)]
    k_folds: Option<usize>,
    /// Exclusion restriction: violated | satisfied [default: violated]
    #[arg(long)]
    er: Option<String>,
    /// Treatment uptake mechanism: direct | and-gate [default: direct]
    #[arg(long)]
    mechanism: Option<String>,
    /// Base seed; replication r of a study uses base + r [default: 2024]
    #[arg(long)]
    seed: Option<u64>,
    /// Confidence level for coverage [default: 0.95]
    #[arg(long)]
    level: Option<f64>,
    /// Worker threads for replications; 1 means fully sequential
    /// [default: all cores]
    #[arg(long)]
    jobs: Option<usize>,
    /// Named preset: table2-desk (200 replications, oracle learner)
    #[arg(long)]
    preset: Option<String>,
    /// Report replication progress on stderr
    #[arg(long)]
    progress: bool,
    /// Largest tolerated fraction of failed replications per row [default: 0]
    #[arg(long)]
    fail_tolerance: Option<f64>,
    /// Write the JSON report to this file instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    /// Stdout rendering [default: json]
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// INI config file; flags override its [mc-study] section
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
pub struct ProbeArgs {
    /// Which nuisance block stays wrong: m1 | m2 | m3 | all-wrong
    #[arg(long)]
    mode: Option<String>,
    /// Number of observations [default: 200000]
    #[arg(long)]
    n: Option<usize>,
    /// Perturbation magnitude [default: 0.3]
    #[arg(long)]
    shift: Option<f64>,
    /// Generator seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Exclusion restriction: violated | satisfied [default: violated]
    #[arg(long)]
    er: Option<String>,
    /// Treatment uptake mechanism: direct | and-gate [default: direct]
    #[arg(long)]
    mechanism: Option<String>,
    /// Write the JSON summary to this file instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    /// Stdout rendering [default: table]
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// INI config file; flags override its [probe-robustness] section
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Map an error to its exit code and machine-readable kind.
fn classify(err: &Error) -> (&'static str, i32) {
    match err {
        Error::InvalidArgument(_) => ("usage", 1),
        Error::Io(_) | Error::Csv(_) | Error::MissingColumn { .. } | Error::Row { .. } => {
            ("data", 2)
        }
        Error::EmptyTrainingCell { .. } | Error::Estimation(_) => ("estimation", 3),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            std::process::exit(code);
        }
    };

    // Everything except mc-study runs single-threaded; mc-study sizes the
    // pool itself from --jobs.
    if !matches!(cli.command, Command::McStudy(_)) {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build_global();
    }

    let result = match &cli.command {
        Command::Estimate(args) => estimate::run(args),
        Command::Simulate(args) => simulate::run(args),
        Command::McStudy(args) => study::run(args),
        Command::ProbeRobustness(args) => probe::run(args),
    };
    if let Err(err) = result {
        let (kind, code) = classify(&err);
        eprintln!(
            "{}",
            serde_json::json!({ "error": { "kind": kind, "message": err.to_string() } })
        );
        std::process::exit(code);
    }
}
