//! Experiment driver for `kelab-core`: TOML configs, the `ke-lab` command
//! line, run manifests with atomic outputs, and the acceptance suite.

pub mod acceptance;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod format;
pub mod manifest;

pub use config::{CommandKind, Config};
pub use error::{LabError, LabResult};
pub use manifest::RunManifest;
