//! Command-line front end for `simmoe`: synthetic data generation, fitting,
//! prediction and evaluation, with models persisted as versioned JSON.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod model_file;

pub use commands::{run, Cli};
pub use error::{CliError, Result};
pub use model_file::ModelFile;
