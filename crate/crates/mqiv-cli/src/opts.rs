//! Parsing of flag values shared across subcommands, and the common
//! output-routing rule: `--output` always receives JSON, `--format`
//! controls what is printed on standard output.

use mqiv::simulation::{ErMode, EstimatorKind, Mechanism};
use mqiv::{Error, Result};
use std::path::Path;

/// Stdout rendering selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Json,
    Table,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(OutputFormat::Json),
            "table" => Ok(OutputFormat::Table),
            other => Err(Error::invalid(format!(
                "unknown format {other:?} (expected json or table)"
            ))),
        }
    }
}

pub fn parse_er(s: &str) -> Result<ErMode> {
    match s.to_ascii_lowercase().as_str() {
        "violated" => Ok(ErMode::Violated),
        "satisfied" => Ok(ErMode::Satisfied),
        other => Err(Error::invalid(format!(
            "unknown exclusion-restriction mode {other:?} (expected violated or satisfied)"
        ))),
    }
}

pub fn parse_mechanism(s: &str) -> Result<Mechanism> {
    match s.to_ascii_lowercase().replace('_', "-").as_str() {
        "direct" | "direct-multiplicative" => Ok(Mechanism::DirectMultiplicative),
        "and-gate" => Ok(Mechanism::AndGate),
        other => Err(Error::invalid(format!(
            "unknown mechanism {other:?} (expected direct or and-gate)"
        ))),
    }
}

/// Parse a comma-separated estimator list such as `w2,w3,phi`.
pub fn parse_estimators(s: &str) -> Result<Vec<EstimatorKind>> {
    let kinds: Vec<EstimatorKind> = s
        .split(',')
        .map(|part| part.trim().parse())
        .collect::<Result<_>>()?;
    if kinds.is_empty() {
        return Err(Error::invalid("estimator list is empty"));
    }
    Ok(kinds)
}

/// Parse a comma-separated list of sample sizes such as `600,2400,7200`.
pub fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|part| {
            let part = part.trim();
            part.parse::<usize>()
                .map_err(|_| Error::invalid(format!("bad sample size {part:?}")))
        })
        .collect()
}

/// Parse a comma-separated covariate column list, rejecting empties.
pub fn parse_covariates(s: &str) -> Result<Vec<String>> {
    let names: Vec<String> = s
        .split(',')
        .map(|part| part.trim().to_string())
        .collect();
    if names.iter().any(String::is_empty) {
        return Err(Error::invalid(format!("empty covariate name in {s:?}")));
    }
    Ok(names)
}

/// Route a command's results: the JSON artifact goes to `--output` when
/// given, otherwise to stdout when the format is JSON; a table rendering
/// always goes to stdout when the format is table.
pub fn emit(
    json: &str,
    table: &str,
    format: OutputFormat,
    output: Option<&Path>,
) -> Result<()> {
    if let Some(path) = output {
        std::fs::write(path, json)?;
    }
    match format {
        OutputFormat::Json => {
            if output.is_none() {
                println!("{}", json.trim_end());
            }
        }
        OutputFormat::Table => print!("{table}"),
    }
    Ok(())
}
