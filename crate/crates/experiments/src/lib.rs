//! Experiment harness: synthetic instances, exhaustive optimum, batch runs
//! and result files.

pub mod batch;
pub mod config;
pub mod domain;
mod error;
pub mod io;
pub mod optimum;
pub mod report;

pub use batch::{run_batch, run_one, BatchOutput, ResultRow, RunOutput, TimingRow};
pub use config::{ExperimentConfig, SeedRange, TraceMode};
pub use domain::{generate_instance, Instance, SyntheticDomainSpec};
pub use error::{ExperimentError, Result};
pub use optimum::brute_force_optimum;
pub use report::{aggregate, Aggregate, Stat};
