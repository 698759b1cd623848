//! Experiment runner on top of `opuc-core`: configuration, trial-parallel
//! ensembles, CSV/JSON artifacts and run manifests.
//!
//! Outputs depend only on the configuration and seed. Trials are
//! evaluated in parallel but every reduction runs over results in trial
//! order, so the worker count never changes a byte of output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod runner;

pub use commands::{execute, run_and_write, Check, Command, Report};
pub use config::{LabConfig, Overrides};
pub use error::{LabError, LabResult};
