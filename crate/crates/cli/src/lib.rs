//! Command-line front end: file formats, configuration and the commands
//! that chain optimization, baselines, evaluation and resampling.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use error::{CliError, Result};
