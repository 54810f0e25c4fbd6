//! File formats and the command line for the `cellpower-core` simulator:
//! scenario files, CSV exports and learner dumps.

use std::path::PathBuf;

pub mod config;
pub mod export;
pub mod persist;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Config { path: PathBuf, source: config::ConfigError },
    #[error("{}: {source}", path.display())]
    Persist { path: PathBuf, source: persist::PersistError },
    #[error(transparent)]
    Sim(#[from] cellpower_core::Error),
}
