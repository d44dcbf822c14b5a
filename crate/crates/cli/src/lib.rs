// SPDX-License-Identifier: Apache-2.0

//! Declarative experiment runner for the `gue-relax` library.

pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod run;

pub use config::{load_config, resolve, ExperimentConfig};
pub use error::{CliError, Result};
pub use output::RunManifest;
pub use run::{run, RunOutcome, Subcommand};
