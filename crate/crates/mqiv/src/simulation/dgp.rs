//! The benchmark data-generating process.
//!
//! Covariates and the latent confounder are uniform on the unit interval;
//! the quasi-instrument follows a logistic propensity; treatment uptake is
//! multiplicative in separate instrument- and confounder-driven factors:
//!
//! ```text
//! X1, X2, U ~ Uniform(0,1)
//! Z  ~ Bernoulli(pi1(X)),  pi1(X) = logistic(-1 + X1 + X2)
//! alpha1 = Z (X1/2 + X2/2 + 1/2),  alpha2 = -X1/2 - X2/2 - U - 1/2
//! A  ~ Bernoulli(exp(alpha1 + alpha2))
//! Y  = beta_A A + beta_U + beta_Z Z + beta_X + eps,   eps ~ N(0, 0.5^2)
//!   beta_A = U X1 + U X2 + U^2      (treatment effect, confounded by U)
//!   beta_U = X1 + X2^2 + U          (confounder main effect)
//!   beta_Z = X1 + X2 + X1 X2        (direct instrument effect)
//!   beta_X = X1
//! Y_ER = Y - beta_Z Z               (the exclusion-restriction outcome)
//! ```
//!
//! `exp(alpha1 + alpha2)` is a valid probability by construction: it equals
//! `exp(-U) < 1` when `Z = 1` and `exp(alpha2) < 1` when `Z = 0`; the
//! generator still asserts the bound on every draw.
//!
//! Two uptake mechanisms induce the same treatment law. The direct form
//! draws `A` from the multiplicative probability; the AND-gate form draws
//! `A = 1{exp(alpha1) * g_U >= eps_z}` with `g_U = exp(alpha2)` and
//! `eps_z ~ Uniform(0,1)`, realizing a latent-index threshold in which
//! uptake requires the instrument-driven and confounder-driven factors
//! jointly.
//!
//! Draw order per observation is fixed and documented for reproducibility:
//! `X1, X2, U, Z-uniform, A-uniform (or eps_z), eps`. All uniforms are
//! drawn from the open interval so the probability bound is strict.

use crate::data::Dataset;
use crate::error::Result;
use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::io::Write;
use std::path::Path;

/// Whether the emitted outcome violates or satisfies the exclusion
/// restriction (`Satisfied` emits `Y_ER`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErMode {
    Violated,
    Satisfied,
}

/// Treatment uptake mechanism; both induce the same law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    DirectMultiplicative,
    AndGate,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DgpConfig {
    pub n: usize,
    pub er_mode: ErMode,
    pub mechanism: Mechanism,
    pub seed: u64,
    pub keep_latents: bool,
}

impl Default for DgpConfig {
    fn default() -> Self {
        DgpConfig {
            n: 1000,
            er_mode: ErMode::Violated,
            mechanism: Mechanism::DirectMultiplicative,
            seed: 0,
            keep_latents: false,
        }
    }
}

/// Latent quantities retained when `keep_latents` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct Latents {
    pub u: Vec<f64>,
    /// Potential treatment under Z=0 / Z=1 (shared uniform, so monotone).
    pub a_z0: Vec<u8>,
    pub a_z1: Vec<u8>,
    /// `E[Y | A=a, Z=z, U, X]` for the emitted outcome, keyed by `(a, z)`.
    mean_y: [Vec<f64>; 4],
    /// The exclusion-restriction outcome, regardless of `er_mode`.
    pub y_er: Vec<f64>,
}

impl Latents {
    pub fn mean_y(&self, a: u8, z: u8) -> &[f64] {
        &self.mean_y[(2 * a + z) as usize]
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedSample {
    pub ds: Dataset,
    pub latents: Option<Latents>,
}

pub(crate) fn alpha1(z: f64, x1: f64, x2: f64) -> f64 {
    z * (0.5 * x1 + 0.5 * x2 + 0.5)
}

pub(crate) fn alpha2(u: f64, x1: f64, x2: f64) -> f64 {
    -0.5 * x1 - 0.5 * x2 - u - 0.5
}

pub(crate) fn beta_a(u: f64, x1: f64, x2: f64) -> f64 {
    u * x1 + u * x2 + u * u
}

pub(crate) fn beta_u(u: f64, x1: f64, x2: f64) -> f64 {
    x1 + x2 * x2 + u
}

/// The direct instrument effect `beta_Z(x) = X1 + X2 + X1 X2`.
pub fn beta_z(x1: f64, x2: f64) -> f64 {
    x1 + x2 + x1 * x2
}

pub(crate) fn expit(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// `Pr(Z=1 | X)`.
pub fn pi1(x1: f64, x2: f64) -> f64 {
    expit(-1.0 + x1 + x2)
}

/// Generate a sample. Deterministic in the config.
pub fn generate(cfg: &DgpConfig) -> SimulatedSample {
    assert!(cfg.n >= 1, "sample size must be positive");
    let n = cfg.n;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut y = Vec::with_capacity(n);
    let mut a = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(2 * n);

    let keep = cfg.keep_latents;
    let mut u_keep = Vec::new();
    let mut a_z0 = Vec::new();
    let mut a_z1 = Vec::new();
    let mut mean_y: [Vec<f64>; 4] = Default::default();
    let mut y_er_keep = Vec::new();
    if keep {
        u_keep.reserve(n);
        a_z0.reserve(n);
        a_z1.reserve(n);
        for v in &mut mean_y {
            v.reserve(n);
        }
        y_er_keep.reserve(n);
    }

    for _ in 0..n {
        let x1: f64 = rng.sample(Open01);
        let x2: f64 = rng.sample(Open01);
        let u: f64 = rng.sample(Open01);

        let zu: f64 = rng.sample(Open01);
        let zi: u8 = if zu < pi1(x1, x2) { 1 } else { 0 };

        let a2 = alpha2(u, x1, x2);
        // Potential treatments share the uptake uniform, so A^{z=1} >= A^{z=0}.
        let q0 = (alpha1(0.0, x1, x2) + a2).exp();
        let q1 = (alpha1(1.0, x1, x2) + a2).exp();
        assert!(
            q0 > 0.0 && q0 < 1.0 && q1 > 0.0 && q1 < 1.0,
            "multiplicative propensity left (0,1): q0={q0}, q1={q1}"
        );
        let (az0, az1): (u8, u8) = match cfg.mechanism {
            Mechanism::DirectMultiplicative => {
                let ua: f64 = rng.sample(Open01);
                ((ua < q0) as u8, (ua < q1) as u8)
            }
            Mechanism::AndGate => {
                // Latent index: uptake when exp(alpha1) * g_U clears eps_z.
                let g_u = a2.exp();
                let eps_z: f64 = rng.sample(Open01);
                (
                    ((alpha1(0.0, x1, x2).exp() * g_u) >= eps_z) as u8,
                    ((alpha1(1.0, x1, x2).exp() * g_u) >= eps_z) as u8,
                )
            }
        };
        let ai = if zi == 1 { az1 } else { az0 };

        let noise: f64 = rng.sample::<f64, _>(StandardNormal) * 0.5;
        let af = ai as f64;
        let zf = zi as f64;
        let bz = beta_z(x1, x2);
        let y_er = beta_a(u, x1, x2) * af + beta_u(u, x1, x2) + x1 + noise;
        let y_full = y_er + bz * zf;

        y.push(match cfg.er_mode {
            ErMode::Violated => y_full,
            ErMode::Satisfied => y_er,
        });
        a.push(ai);
        z.push(zi);
        x.extend_from_slice(&[x1, x2]);

        if keep {
            u_keep.push(u);
            a_z0.push(az0);
            a_z1.push(az1);
            let bz_eff = match cfg.er_mode {
                ErMode::Violated => bz,
                ErMode::Satisfied => 0.0,
            };
            for (aa, zz) in [(0u8, 0u8), (0, 1), (1, 0), (1, 1)] {
                mean_y[(2 * aa + zz) as usize].push(
                    beta_a(u, x1, x2) * aa as f64 + beta_u(u, x1, x2) + bz_eff * zz as f64 + x1,
                );
            }
            y_er_keep.push(y_er);
        }
    }

    let ds = Dataset::new(y, a, z, x, 2).expect("generated dataset is valid by construction");
    SimulatedSample {
        ds,
        latents: keep.then_some(Latents {
            u: u_keep,
            a_z0,
            a_z1,
            mean_y,
            y_er: y_er_keep,
        }),
    }
}

/// Write a simulated sample as CSV in the ingestion format, optionally with
/// latent columns (`u, a_z0, a_z1, ey00, ey01, ey10, ey11, y_er`).
pub fn save_sample_csv(
    sample: &SimulatedSample,
    path: impl AsRef<Path>,
    include_latents: bool,
) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    write_sample_csv(sample, &mut out, include_latents)?;
    out.flush()?;
    Ok(())
}

/// Stream a simulated sample as CSV to any writer (same format as
/// [`save_sample_csv`]).
pub fn write_sample_csv<W: Write>(
    sample: &SimulatedSample,
    out: &mut W,
    include_latents: bool,
) -> Result<()> {
    use crate::data::format_f64 as fmt;
    let ds = &sample.ds;
    let mut header = String::from("y,a,z,x1,x2");
    let latents = if include_latents {
        let latents = sample.latents.as_ref().ok_or_else(|| {
            crate::Error::invalid("sample was generated without keep_latents; no latent columns")
        })?;
        header.push_str(",u,a_z0,a_z1,ey00,ey01,ey10,ey11,y_er");
        Some(latents)
    } else {
        None
    };
    writeln!(out, "{header}")?;
    for i in 0..ds.n() {
        let xr = ds.x_row(i);
        let mut line = format!(
            "{},{},{},{},{}",
            fmt(ds.y()[i]),
            ds.a()[i],
            ds.z()[i],
            fmt(xr[0]),
            fmt(xr[1])
        );
        if let Some(l) = latents {
            line.push_str(&format!(
                ",{},{},{},{},{},{},{},{}",
                fmt(l.u[i]),
                l.a_z0[i],
                l.a_z1[i],
                fmt(l.mean_y(0, 0)[i]),
                fmt(l.mean_y(0, 1)[i]),
                fmt(l.mean_y(1, 0)[i]),
                fmt(l.mean_y(1, 1)[i]),
                fmt(l.y_er[i]),
            ));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::validate;

    fn cfg(n: usize, seed: u64) -> DgpConfig {
        DgpConfig {
            n,
            seed,
            keep_latents: true,
            ..DgpConfig::default()
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let s1 = generate(&cfg(500, 42));
        let s2 = generate(&cfg(500, 42));
        assert_eq!(s1.ds, s2.ds);
        assert_eq!(s1.latents, s2.latents);
        let s3 = generate(&cfg(500, 43));
        assert_ne!(s1.ds, s3.ds);
    }

    #[test]
    fn outcome_difference_is_direct_effect_exactly() {
        // Same seed, both regimes: Y = Y_ER + beta_Z(X) * Z bit for bit.
        let violated = generate(&cfg(2000, 7));
        let satisfied = generate(&DgpConfig {
            er_mode: ErMode::Satisfied,
            ..cfg(2000, 7)
        });
        for i in 0..2000 {
            let xr = violated.ds.x_row(i);
            let reconstructed =
                satisfied.ds.y()[i] + beta_z(xr[0], xr[1]) * violated.ds.z()[i] as f64;
            assert_eq!(
                violated.ds.y()[i].to_bits(),
                reconstructed.to_bits(),
                "row {i}"
            );
            // The stored latent Y_ER matches the satisfied-mode outcome.
            assert_eq!(
                violated.latents.as_ref().unwrap().y_er[i].to_bits(),
                satisfied.ds.y()[i].to_bits()
            );
        }
    }

    #[test]
    fn realized_treatment_matches_potential() {
        let s = generate(&cfg(3000, 1));
        let l = s.latents.as_ref().unwrap();
        for i in 0..3000 {
            let expected = if s.ds.z()[i] == 1 { l.a_z1[i] } else { l.a_z0[i] };
            assert_eq!(s.ds.a()[i], expected);
            // Monotone uptake in the instrument.
            assert!(l.a_z1[i] >= l.a_z0[i]);
        }
    }

    #[test]
    fn and_gate_is_also_monotone_and_valid() {
        let s = generate(&DgpConfig {
            mechanism: Mechanism::AndGate,
            ..cfg(3000, 5)
        });
        let l = s.latents.as_ref().unwrap();
        for i in 0..3000 {
            assert!(l.a_z1[i] >= l.a_z0[i]);
        }
        let report = validate(&s.ds);
        assert!(report.n_treated > 0);
        assert!(report.marginal_relevance > 0.2);
    }

    #[test]
    fn latent_mean_centers_residuals() {
        let s = generate(&cfg(20000, 3));
        let l = s.latents.as_ref().unwrap();
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for i in 0..20000 {
            let resid = s.ds.y()[i] - l.mean_y(s.ds.a()[i], s.ds.z()[i])[i];
            sum += resid;
            sum2 += resid * resid;
        }
        let mean = sum / 20000.0;
        let sd = (sum2 / 20000.0 - mean * mean).sqrt();
        assert!(mean.abs() < 0.02, "residual mean {mean}");
        assert!((sd - 0.5).abs() < 0.02, "residual sd {sd}");
    }

    #[test]
    fn satisfied_mode_mean_y_is_z_free() {
        let s = generate(&DgpConfig {
            er_mode: ErMode::Satisfied,
            ..cfg(100, 9)
        });
        let l = s.latents.as_ref().unwrap();
        for i in 0..100 {
            assert_eq!(l.mean_y(1, 0)[i], l.mean_y(1, 1)[i]);
            assert_eq!(l.mean_y(0, 0)[i], l.mean_y(0, 1)[i]);
        }
    }

    #[test]
    fn csv_round_trip_with_latents() {
        let s = generate(&cfg(50, 21));
        let f = tempfile::NamedTempFile::new().unwrap();
        save_sample_csv(&s, f.path(), true).unwrap();
        let ds = crate::data::load_csv(f.path(), &crate::data::default_mapping(2)).unwrap();
        assert_eq!(ds.n(), 50);
        for i in 0..50 {
            assert_eq!(ds.y()[i].to_bits(), s.ds.y()[i].to_bits());
        }
        // Latent columns requested without keeping them is an error.
        let s2 = generate(&DgpConfig {
            keep_latents: false,
            ..cfg(10, 21)
        });
        assert!(save_sample_csv(&s2, f.path(), true).is_err());
    }
}
