//! File formats, experiment runner and command-line front end for
//! `pfloc-core`.
//!
//! Scenarios are JSON documents ([`config::ScenarioConfig`]). Masks are
//! binary PGM, per-step metrics CSV, estimates and frame metadata
//! newline-delimited JSON.

pub mod config;
pub mod error;
pub mod ingest;
pub mod pgm;
pub mod records;
pub mod run;

pub use config::{Scenario, ScenarioConfig};
pub use error::HarnessError;
pub use run::{run_experiment, run_seed, Experiment, SeedRun, Session, StepRecord};
