//! Where every stage reads and writes, and small file helpers.
//!
//! ```text
//! <output>/
//!   data/trips.csv, weather.csv, manifest.json        generate
//!   k{K}/clusters.json, samples.csv, bins.json,
//!        encoder.json, imputer.json,
//!        prepare_log.json, prepare_log.csv            prepare
//!   k{K}/models/{learner}.json, grid/{learner}.{json,csv},
//!        cv/{learner}.json, timing/{learner}.json     train
//!   metrics.{csv,json}, baseline.{csv,json},
//!   timing.{csv,json}                                 evaluate
//!   k{K}/importance/{learner}.{csv,json},
//!   top_features.{csv,json}                           importance
//!   demand_by_day_of_week.{csv,json},
//!   demand_by_month.{csv,json}, report.md             report
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use skyport_core::LearnerKind;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn k_dir(&self, k: usize) -> PathBuf {
        self.root.join(format!("k{k}"))
    }

    pub fn k_file(&self, k: usize, name: &str) -> PathBuf {
        self.k_dir(k).join(name)
    }

    /// `k{K}/{section}/{learner}.{ext}`
    pub fn learner_file(&self, k: usize, section: &str, learner: LearnerKind, ext: &str) -> PathBuf {
        self.k_dir(k).join(section).join(format!("{learner}.{ext}"))
    }
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path, hint: &str) -> CliResult<T> {
    let text = read_text(path, hint)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_text(path: &Path, hint: &str) -> CliResult<String> {
    if !path.exists() {
        return Err(CliError::missing(path, hint));
    }
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn open(path: &Path, hint: &str) -> CliResult<fs::File> {
    if !path.exists() {
        return Err(CliError::missing(path, hint));
    }
    fs::File::open(path).map_err(|e| CliError::io(path, e))
}

pub fn create(path: &Path) -> CliResult<fs::File> {
    ensure_parent(path)?;
    fs::File::create(path).map_err(|e| CliError::io(path, e))
}

pub fn write_csv<S: AsRef<str>>(path: &Path, header: &[&str], rows: &[Vec<S>]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(AsRef::as_ref))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Fixed-precision rendering used in delimited reports.
pub fn fixed(value: f64, decimals: usize) -> String {
    format!("{value:.decimals$}")
}
