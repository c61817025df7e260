//! Orchestration for monitored-fermion experiments: configuration, sweeps
//! with checkpoint and resume, norm tables, analyses and oracle checks.

pub mod analyze;
pub mod cli;
pub mod config;
pub mod error;
pub mod norms;
pub mod oracle_check;
pub mod output;
pub mod run;

pub use error::CliError;
