//! Multiplicative quasi-instrumental-variable (MQIV) estimation of the
//! average treatment effect on the treated.
//!
//! A quasi-instrument is an instrument-like binary variable that is allowed
//! a direct effect on the outcome, so the classical exclusion restriction
//! may fail. Under a multiplicative treatment-uptake model the conditional
//! ATT is still identified by a modified Wald ratio
//!
//! ```text
//! delta*(x) = [e1(x) - e0(x) - phi(x)] / [p1(x) - p0(x)]
//! phi(x)    = e11(x) - e10(x)
//! ```
//!
//! where `e_z = E[Y | Z=z, X]`, `e_1z = E[Y | A=1, Z=z, X]` and
//! `p_z = Pr(A=1 | Z=z, X)`. The direct-effect contrast `phi` subtracts the
//! instrument's own outcome effect from the usual Wald numerator.
//!
//! The crate provides:
//!
//! * [`data`]: CSV ingestion with column mapping, validation, fold splits;
//! * [`learners`]: self-contained regression/probability learners and a
//!   cross-validated convex ensemble used to fit nuisance functions;
//! * [`nuisance`]: cross-fitted raw nuisance estimation and the derived
//!   per-point quantities (`phi`, `delta*`, `rho`, `w`);
//! * [`estimators`]: the plug-in and EIF-based debiased estimators of the
//!   marginal ATT, comparison estimators, Wald confidence intervals, and a
//!   multiple-robustness probe harness;
//! * [`simulation`]: a benchmark data-generating process with quadrature
//!   oracles for every nuisance and a Monte Carlo study runner;
//! * [`quad`]: Gauss-Legendre quadrature used by the oracles.
//!
//! All randomness flows through seeded ChaCha generators, so every result
//! in the crate is reproducible bit for bit, including under the optional
//! `parallel` feature (enabled by default) which distributes Monte Carlo
//! replications and fold fits over a rayon thread pool.

pub mod data;
pub mod error;
pub mod estimators;
pub mod learners;
pub mod nuisance;
pub mod quad;
pub mod simulation;

mod exec;

pub use error::{Error, Result};
pub use exec::ExecMode;
