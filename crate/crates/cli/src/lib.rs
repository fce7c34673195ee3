//! Orchestration behind `expcli`: configuration, model tables, witness runs, sweeps,
//! tomography and result files.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod commands;
pub mod config;
pub mod plots;

pub use commands::*;
pub use config::{Model, RunConfig, Tolerances};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("model disagreement: {0}")]
    Disagreement(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Disagreement(_) => 3,
            CliError::Solver(_) => 4,
            CliError::Io { .. } | CliError::Other(_) => 1,
        }
    }
}
