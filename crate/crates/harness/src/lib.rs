//! File formats, experiment configuration and orchestration for SRAM PUF
//! temperature studies. The `pufkit` binary is a thin wrapper over
//! [`commands`].

pub mod commands;
pub mod config;
mod error;
pub mod readings_file;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
