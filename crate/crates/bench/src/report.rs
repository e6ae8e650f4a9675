//! Result files: raw rows and group summaries as CSV, and a JSON echo of the
//! configuration and environment.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::runner::{SummaryRow, TrialRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub version: String,
    pub os: String,
    pub arch: String,
    /// Worker threads used for trials.
    pub threads: usize,
    pub available_parallelism: usize,
}

impl Environment {
    pub fn capture(cfg: &RunConfig) -> Self {
        let available = std::thread::available_parallelism().map_or(1, |n| n.get());
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            threads: cfg.worker_threads().unwrap_or(available),
            available_parallelism: available,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEcho {
    pub command: String,
    pub config: RunConfig,
    pub environment: Environment,
}

pub fn write_rows<W: Write>(w: W, rows: &[TrialRow]) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_rows<R: std::io::Read>(r: R) -> csv::Result<Vec<TrialRow>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

pub fn write_summary<W: Write>(w: W, rows: &[SummaryRow]) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFiles {
    pub rows: PathBuf,
    pub summary: PathBuf,
    pub config: PathBuf,
}

/// Writes `<stem>.csv`, `<stem>_summary.csv` and `<stem>_config.json` into `dir`.
pub fn write_outputs(
    dir: &Path,
    stem: &str,
    command: &str,
    cfg: &RunConfig,
    rows: &[TrialRow],
    summary: &[SummaryRow],
) -> anyhow::Result<OutputFiles> {
    fs::create_dir_all(dir)?;
    let files = OutputFiles {
        rows: dir.join(format!("{stem}.csv")),
        summary: dir.join(format!("{stem}_summary.csv")),
        config: dir.join(format!("{stem}_config.json")),
    };
    write_rows(fs::File::create(&files.rows)?, rows)?;
    write_summary(fs::File::create(&files.summary)?, summary)?;
    let echo = RunEcho {
        command: command.to_string(),
        config: cfg.clone(),
        environment: Environment::capture(cfg),
    };
    fs::write(&files.config, serde_json::to_string_pretty(&echo)?)?;
    Ok(files)
}
