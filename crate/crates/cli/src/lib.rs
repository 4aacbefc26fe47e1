//! Experiment runner: reproducible configs in, JSON and CSV reports out.
//!
//! Each subcommand writes its files into the output directory. Every JSON
//! report carries the resolved config and seed, and nothing in a report
//! depends on wall-clock time or thread scheduling, so the same config and
//! seed give byte-identical files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

pub use config::RunConfig;

/// Exit status of a run that completed but found a violated invariant,
/// one per suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Warmness,
    Overlap,
    Spectral,
    EffectiveGap,
    Amplification,
    Reflector,
    Regret,
}

impl Suite {
    pub fn exit_code(self) -> i32 {
        match self {
            Suite::Warmness => 3,
            Suite::Overlap => 4,
            Suite::Spectral => 5,
            Suite::EffectiveGap => 6,
            Suite::Amplification => 7,
            Suite::Reflector => 8,
            Suite::Regret => 9,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] qanneal::Error),

    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("serializing report: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{suite:?} suite violated: {detail}")]
    Violation { suite: Suite, detail: String },
}

impl CliError {
    /// 1 for errors before or during the run, a suite code for violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Violation { suite, .. } => suite.exit_code(),
            _ => 1,
        }
    }
}

/// The envelope written for every JSON report.
#[derive(Serialize)]
pub struct Report<'a, T: Serialize> {
    pub command: &'a str,
    pub seed: Option<u64>,
    pub config: &'a RunConfig,
    pub result: T,
}

pub(crate) fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

pub(crate) fn write_report<T: Serialize>(
    dir: &Path,
    name: &str,
    command: &str,
    config: &RunConfig,
    result: T,
) -> Result<PathBuf, CliError> {
    let report = Report {
        command,
        seed: config.seed,
        config,
        result,
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    write_file(dir, name, &text)
}
