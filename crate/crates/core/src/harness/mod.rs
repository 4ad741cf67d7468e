//! Experiment driver: configuration, the active-learning loop, replication,
//! reports and the command line.

pub mod cli;
pub mod config;
pub mod report;
pub mod run;
pub mod verify;

pub use config::{RunConfig, Strategy};
pub use run::{run_active_learning, run_replicated, Experiment, RunRecord, Summary};
