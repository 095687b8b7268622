//! Experiment runner on top of `podsim`: config files, load sweeps over
//! policies and replications, CSV tables, charts, capacity reports and the
//! golden traces.

pub mod capacity;
pub mod config;
pub mod experiment;
pub mod goldens;
pub mod plot;

use std::path::PathBuf;

/// Overrides every output directory when set.
pub const OUT_DIR_ENV: &str = "PODSIM_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Sim(#[from] podsim::Error),

    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },

    #[error("golden mismatch: {0}")]
    Golden(String),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        Self::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    /// 2 config error, 3 LP size limit, 4 insufficient data, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use podsim::Error as E;
        match self {
            Self::Config(_) | Self::Sim(E::InvalidConfig(_) | E::InvalidArgument(_)) => 2,
            Self::Sim(E::LpTooLarge { .. }) => 3,
            Self::Sim(E::InsufficientData { .. }) => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/experiments.md")]
mod book {}
