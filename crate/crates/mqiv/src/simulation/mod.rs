//! Benchmark data-generating process, quadrature oracles, and the Monte
//! Carlo study runner.

pub mod dgp;
pub mod oracle;
pub mod study;

pub use dgp::{
    generate, save_sample_csv, write_sample_csv, DgpConfig, ErMode, Latents, Mechanism,
    SimulatedSample,
};
pub use study::{run_study, run_study_with, EstimatorKind, McConfig, McReport, McRow};
