//! The `probe-robustness` subcommand: Monte Carlo check that the estimated
//! influence curve keeps mean zero when one nuisance block is wrong, and
//! detectably fails when all blocks are wrong.

use crate::config;
use crate::opts::{self, OutputFormat};
use crate::ProbeArgs;
use mqiv::estimators::{robustness_probe, PerturbationMode, ProbeWhich};
use mqiv::simulation::{generate, DgpConfig};
use mqiv::{Error, Result};
use std::fmt::Write as _;

/// A probe passes when the mean influence-curve value is within three
/// standard errors of zero.
const PASS_Z: f64 = 3.0;

pub fn run(args: &ProbeArgs) -> Result<()> {
    let sec = config::load_section(args.config.as_deref(), "probe-robustness")?;

    let which: ProbeWhich = args
        .mode
        .as_deref()
        .or(sec.get_str("mode"))
        .ok_or_else(|| Error::invalid("missing --mode (expected m1, m2, m3, or all-wrong)"))?
        .parse()?;
    let n = args.n.or(sec.get("n")?).unwrap_or(200_000);
    let shift = args.shift.or(sec.get("shift")?).unwrap_or(0.3);
    let seed = args.seed.or(sec.get("seed")?).unwrap_or(0);
    let er_mode = opts::parse_er(args.er.as_deref().or(sec.get_str("er")).unwrap_or("violated"))?;
    let mechanism = opts::parse_mechanism(
        args.mechanism
            .as_deref()
            .or(sec.get_str("mechanism"))
            .unwrap_or("direct"),
    )?;
    let format = args
        .format
        .or(sec.get("format")?)
        .unwrap_or(OutputFormat::Table);

    let sample = generate(&DgpConfig {
        n,
        er_mode,
        mechanism,
        seed,
        keep_latents: false,
    });
    let result = robustness_probe(&sample.ds, &PerturbationMode { which, shift }, er_mode)?;
    let z = result.z_ratio();
    let verdict = if z <= PASS_Z { "PASS" } else { "FAIL" };

    let json = serde_json::to_string_pretty(&serde_json::json!({
        "mode": result.which,
        "shift": result.shift,
        "n": result.n,
        "mean": result.mean,
        "se": result.se,
        "z_ratio": z,
        "verdict": verdict,
    }))
    .expect("probe summary serializes");

    let mut table = String::new();
    let _ = writeln!(table, "mode:     {}", mode_name(result.which));
    let _ = writeln!(table, "shift:    {}", result.shift);
    let _ = writeln!(table, "n:        {}", result.n);
    let _ = writeln!(table, "mean:     {:+.6e}", result.mean);
    let _ = writeln!(table, "se:       {:.6e}", result.se);
    let _ = writeln!(table, "|mean|/se: {z:.3}");
    let _ = writeln!(table, "verdict:  {verdict} (pass means |mean| <= {PASS_Z} se)");

    opts::emit(&json, &table, format, args.output.as_deref())
}

fn mode_name(which: ProbeWhich) -> &'static str {
    match which {
        ProbeWhich::M1 => "m1",
        ProbeWhich::M2 => "m2",
        ProbeWhich::M3 => "m3",
        ProbeWhich::AllWrong => "all_wrong",
    }
}
