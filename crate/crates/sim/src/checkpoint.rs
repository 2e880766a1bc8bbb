//! Line-delimited record files, appended after every completed round so an
//! interrupted run can resume.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use dilemma_agents::AgentLogRecord;

use crate::error::SimError;
use crate::matchup::{RoundSink, SimRecord};

pub fn write_records(path: &Path, records: &[SimRecord]) -> Result<(), SimError> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a record file; a missing file is an empty run. A torn final line
/// (from a crash mid-write) is dropped.
pub fn read_records(path: &Path) -> Result<Vec<SimRecord>, SimError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let lines: Vec<String> = BufReader::new(file).lines().collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == lines.len() => break,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

/// Appends each completed round's records (and optionally the agents' log)
/// to files in a run directory.
pub struct FileCheckpoint {
    records: PathBuf,
    log: Option<PathBuf>,
}

impl FileCheckpoint {
    pub fn new(records: impl Into<PathBuf>, log: Option<PathBuf>) -> FileCheckpoint {
        FileCheckpoint { records: records.into(), log }
    }

    /// Rewrites the record file to exactly `records`, dropping any partial
    /// round left by an interrupted run.
    pub fn reset_to(&self, records: &[SimRecord]) -> Result<(), SimError> {
        if let Some(dir) = self.records.parent() {
            fs::create_dir_all(dir)?;
        }
        write_records(&self.records, records)
    }
}

fn append_lines<T: serde::Serialize>(path: &Path, items: &[T]) -> Result<(), SimError> {
    let mut w = BufWriter::new(OpenOptions::new().create(true).append(true).open(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

impl RoundSink for FileCheckpoint {
    fn round_completed(&mut self, records: &[SimRecord], log: &[AgentLogRecord]) -> Result<(), SimError> {
        append_lines(&self.records, records)?;
        if let Some(path) = &self.log {
            append_lines(path, log)?;
        }
        Ok(())
    }
}
