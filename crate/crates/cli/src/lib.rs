//! Experiment runner: simulate counts, reconstruct, and write result files.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use reaptomo::TomoError;

pub use commands::{estimate, reproduce_fig3, simulate, EstimateSummary, Fig3Summary, SimulateOutput};
pub use config::{Mode, Overrides, RunConfig, Shots, StateConfig};

pub const EXIT_OTHER: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DANGEROUS: u8 = 3;
pub const EXIT_NOT_CONVERGED: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("reconstruction aborted: {0}")]
    Dangerous(TomoError),
    #[error(transparent)]
    Tomo(TomoError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Dangerous(_) => EXIT_DANGEROUS,
            CliError::Tomo(_) | CliError::Io { .. } => EXIT_OTHER,
        }
    }
}

impl From<TomoError> for CliError {
    fn from(e: TomoError) -> Self {
        match e {
            TomoError::CompatibleBasis | TomoError::BlockDiagonal { .. } => CliError::Dangerous(e),
            other => CliError::Tomo(other),
        }
    }
}
