//! The `simulate` subcommand: draw benchmark samples, optionally report
//! the oracle marginal ATT.

use crate::config;
use crate::opts;
use crate::SimulateArgs;
use mqiv::simulation::{self, oracle, DgpConfig};
use mqiv::Result;

pub fn run(args: &SimulateArgs) -> Result<()> {
    let sec = config::load_section(args.config.as_deref(), "simulate")?;

    let n = args.n.or(sec.get("n")?).unwrap_or(1000);
    let seed = args.seed.or(sec.get("seed")?).unwrap_or(0);
    let er_mode = opts::parse_er(args.er.as_deref().or(sec.get_str("er")).unwrap_or("violated"))?;
    let mechanism = opts::parse_mechanism(
        args.mechanism
            .as_deref()
            .or(sec.get_str("mechanism"))
            .unwrap_or("direct"),
    )?;
    let keep_latents = args.keep_latents || sec.get_bool("keep-latents")?.unwrap_or(false);
    let oracle_att = args.oracle_att || sec.get_bool("oracle-att")?.unwrap_or(false);

    if oracle_att {
        println!("{}", oracle::att_quadrature());
        if args.output.is_none() {
            return Ok(());
        }
    }

    let cfg = DgpConfig {
        n,
        er_mode,
        mechanism,
        seed,
        keep_latents,
    };
    let sample = simulation::generate(&cfg);
    match &args.output {
        Some(path) => simulation::save_sample_csv(&sample, path, keep_latents),
        None => {
            let stdout = std::io::stdout();
            let mut out = std::io::BufWriter::new(stdout.lock());
            simulation::write_sample_csv(&sample, &mut out, keep_latents)
        }
    }
}
