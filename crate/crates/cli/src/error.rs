use std::io;
use std::path::PathBuf;

use mree_core::{ConfigError, FormatError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{failed} of {total} sweep cells failed")]
    Cells { failed: usize, total: usize },
    #[error("{0} case-study check(s) failed")]
    CaseStudy(usize),
    #[error("{mismatched} replayed price(s) differ from the log (max deviation {max_deviation})")]
    PriceMismatch {
        mismatched: usize,
        max_deviation: f64,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Format { .. } => 2,
            CliError::Io { .. } => 3,
            CliError::Cells { .. } | CliError::CaseStudy(_) | CliError::PriceMismatch { .. } => 1,
        }
    }
}
