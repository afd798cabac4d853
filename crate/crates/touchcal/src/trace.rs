//! Per-run JSON-lines traces.
//!
//! Each run writes two files: `trace-<seed>.jsonl` with one
//! [`IterationRecord`] per iteration, and `observations-<seed>.jsonl` with
//! the [`ObservationRecord`] the filter consumed, which `replay` reads back.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use touchcal_core::action::ContactCandidate;
use touchcal_core::convergence::Criteria;
use touchcal_core::filter::Observation;
use touchcal_core::se3::Pose6;

use crate::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub estimate: Pose6,
    pub variance: [f64; 6],
    /// Effective sample size before resampling; absent when degenerate or skipped.
    pub ess: Option<f64>,
    /// Motion noise used this iteration.
    pub sigma: f64,
    /// Motion noise for the next iteration.
    pub sigma_next: f64,
    pub action: Option<ContactCandidate>,
    pub sparsity: Option<f64>,
    /// All events of the observation, descent included.
    pub events: usize,
    pub slide_events: usize,
    pub contacts: usize,
    pub weights_ms: f64,
    pub degenerate: bool,
    pub criteria: Criteria,
    pub pass_count: u32,
    pub terminated: bool,
    /// Harness-side error against the true pose; never seen by the filter.
    pub trans_error_cm: Option<f64>,
    pub rot_error_rad: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub t: usize,
    #[serde(flatten)]
    pub observation: Observation,
}

pub fn trace_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("trace-{seed}.jsonl"))
}

pub fn observations_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("observations-{seed}.jsonl"))
}

/// Appends JSON lines to a file.
pub struct JsonlWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl JsonlWriter {
    pub fn create(path: PathBuf) -> Result<Self, Error> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io(dir.to_path_buf(), e))?;
        }
        let file = File::create(&path).map_err(|e| Error::Io(path.clone(), e))?;
        Ok(Self { out: BufWriter::new(file), path })
    }

    pub fn write<T: Serialize>(&mut self, value: &T) -> Result<(), Error> {
        serde_json::to_writer(&mut self.out, value)?;
        self.out.write_all(b"\n").map_err(|e| Error::Io(self.path.clone(), e))
    }

    pub fn finish(mut self) -> Result<PathBuf, Error> {
        self.out.flush().map_err(|e| Error::Io(self.path.clone(), e))?;
        Ok(self.path)
    }
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, Error> {
    let file = File::open(path).map_err(|e| Error::Io(path.to_path_buf(), e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::Io(path.to_path_buf(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Format(path.to_path_buf(), format!("line {}: {e}", n + 1)))?,
        );
    }
    Ok(out)
}
