// SPDX-License-Identifier: Apache-2.0

//! Append-only JSON-lines session log.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::SessionResult;

#[derive(Debug, Error)]
#[error("writing session log {path}: {source}")]
pub struct LogError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub logged_at: DateTime<Utc>,
    #[serde(flatten)]
    pub result: SessionResult,
}

/// One file, many writers: each record is written as a single line under a
/// lock so concurrent sessions never interleave.
#[derive(Debug)]
pub struct ResultLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl ResultLog {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, LogError> {
        let path = path.into();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|source| LogError {
                path: path.clone(),
                source,
            })?;
        Ok(Self {
            path,
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, result: &SessionResult) -> Result<(), LogError> {
        let record = LogRecord {
            logged_at: Utc::now(),
            result: result.clone(),
        };
        let mut line = serde_json::to_vec(&record).expect("session result serializes");
        line.push(b'\n');
        let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
        file.write_all(&line)
            .and_then(|()| file.flush())
            .map_err(|source| LogError {
                path: self.path.clone(),
                source,
            })
    }

    /// Parses every record in a log file.
    pub fn read_all(path: &Path) -> io::Result<Vec<LogRecord>> {
        std::fs::read_to_string(path)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)))
            .collect()
    }
}

pub fn log_result(result: &SessionResult, sink: &ResultLog) -> Result<(), LogError> {
    sink.append(result)
}
