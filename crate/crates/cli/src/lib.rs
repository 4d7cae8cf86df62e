//! Library half of the `nlpf` binary: configuration files, output writers,
//! and the subcommands, so that integration tests can drive them directly.

pub mod commands;
pub mod config;
pub mod output;

pub use config::{ConfigError, KeyValues, RunConfig, StudyConfig};
