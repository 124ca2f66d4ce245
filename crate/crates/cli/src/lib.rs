//! Experiment harness: run specs, training, evaluation, comparisons,
//! oracle audits and traces.

use std::path::PathBuf;

pub mod commands;
pub mod render;
pub mod report;
pub mod spec;

pub use spec::{PolicySelector, RunSpec};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] aam_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("cannot read {0}: {1}")]
    Read(PathBuf, std::io::Error),
    #[error("bad run spec: {0}")]
    Spec(String),
    #[error("missing checkpoint: {0}")]
    MissingCheckpoint(String),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
