//! Experiment runner: reads an [`ExperimentConfig`], dispatches one command
//! to the `scalelab` suites, and writes the JSON report plus one CSV per
//! table.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod commands;
pub mod config;

use std::path::{Path, PathBuf};
use std::time::SystemTime;

use scalelab::Report;
use thiserror::Error;

pub use commands::{run, Command, Lemma};
pub use config::ExperimentConfig;

/// Exit status: every margin passed.
pub const EXIT_PASS: i32 = 0;
/// Exit status: the report was written but some margin failed.
pub const EXIT_FAIL: i32 = 1;
/// Exit status: the configuration could not be used.
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
}

/// Fills the report metadata, writes `<slug>.json` and `<slug>-<table>.csv`
/// into `out`, and records the emitted paths as artifacts.
pub fn emit(
    report: &mut Report,
    config: &ExperimentConfig,
    command: Command,
    out: &Path,
) -> Result<Vec<PathBuf>, ConfigError> {
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| ConfigError::Write { path, source }
    };
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    report.metadata.config_hash = config.hash();
    report.metadata.seed = config.seed;
    report.metadata.timestamp = humantime::format_rfc3339_seconds(SystemTime::now()).to_string();

    let slug = command.slug();
    let mut written = Vec::new();
    for table in &report.tables {
        let path = out.join(format!("{slug}-{}.csv", table.name));
        table.write_csv(&path).map_err(io_err(&path))?;
        written.push(path);
    }
    let json = out.join(format!("{slug}.json"));
    report
        .artifacts
        .extend(written.iter().map(|p| p.display().to_string()));
    report.artifacts.push(json.display().to_string());
    report.write_json(&json).map_err(io_err(&json))?;
    written.push(json);
    Ok(written)
}
