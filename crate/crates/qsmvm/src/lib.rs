//! Configuration, file formats, experiment sweeps and reporting for the
//! `qsmvm-core` simulator.

// negated comparisons are how input checks reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

pub mod config;
pub mod formats;
pub mod output;
pub mod report;
pub mod stats;
pub mod sweep;

pub use config::{ConfigFile, Overrides, Scenario};
pub use formats::FormatError;
pub use sweep::{GridSpec, SweepTable};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },
    #[error("config: {0}")]
    Config(String),
    #[error("invalid config key `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("grid: {0}")]
    Grid(String),
    #[error("{path}: {reason}")]
    Data { path: PathBuf, reason: String },
    #[error(transparent)]
    Sim(#[from] qsmvm_core::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub(crate) fn write_file(path: &std::path::Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| Error::Io { path: parent.to_path_buf(), source })?;
    }
    std::fs::write(path, contents).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}
