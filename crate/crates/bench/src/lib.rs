//! Experiment harness: ground-truth generation, optimizer × schedule sweeps,
//! bound verification and plot-ready reports.

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiment;
pub mod report;
pub mod verify;

pub use config::{ExperimentConfig, SamplerChoice};
pub use experiment::{gen_dataset, gen_ground_truth, run_sweep, SweepResult};
pub use report::{summarize, write_report, Summary};
pub use verify::{verify_bounds, VerifyOptions, VerifyReport};
