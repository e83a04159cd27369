//! Pipeline orchestration, tables and figures for the `chronoseme` command.

pub mod commands;
pub mod config;
pub mod figures;
pub mod pipeline;
pub mod report;
pub mod stages;
pub mod tables;

pub use config::RunConfig;
pub use pipeline::{run_pipeline, RunManifest, RunStatus};
