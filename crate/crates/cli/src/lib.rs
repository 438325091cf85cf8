//! Manifest loading, pipeline drivers, and report rendering for the
//! `lightlike` command-line tool.

pub mod commands;
pub mod manifest;
pub mod report;

pub use commands::{
    cmd_build, cmd_prop1, cmd_validate, cmd_verify, CliError, CommandOutput, OutputFormat,
    RunOptions,
};
pub use manifest::{load_manifest, LoadedManifest, ManifestError};
