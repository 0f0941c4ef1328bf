//! Standard-library companion to `sfde-core`: TOML run configurations, CSV
//! inputs and outputs, run manifests, a rayon-backed replicate runner and
//! the command implementations behind the `sfde` binary.

pub mod config;
pub mod io;
pub mod manifest;
pub mod run;
pub mod runner;

pub use config::{parse_config, parse_config_with, Command, ConfigError, Overrides, RunConfig};
pub use manifest::Manifest;
pub use run::{run, Artifacts, RunError};
pub use runner::Parallel;
