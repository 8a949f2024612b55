// SPDX-License-Identifier: Apache-2.0

//! Dataset files: RFC 4180 CSV or JSON lines.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{DatasetError, QuestionConfigPair, RequirementConfigPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    Requirement,
    Question,
}

impl Schema {
    pub fn header(self) -> [&'static str; 2] {
        match self {
            Schema::Requirement => ["requirement", "configuration"],
            Schema::Question => ["question", "configuration"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DatasetFormat {
    #[default]
    Csv,
    /// One JSON object per line, with provenance.
    Records,
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "records" | "jsonl" => Ok(Self::Records),
            other => Err(format!("unknown dataset format `{other}` (expected csv or records)")),
        }
    }
}

/// A two-column dataset row.
pub trait DatasetRow: Serialize + DeserializeOwned {
    const SCHEMA: Schema;
    fn columns(&self) -> [&str; 2];
    fn from_columns(intent: String, configuration: String) -> Self;
}

impl DatasetRow for RequirementConfigPair {
    const SCHEMA: Schema = Schema::Requirement;

    fn columns(&self) -> [&str; 2] {
        [&self.requirement, &self.configuration]
    }

    fn from_columns(requirement: String, configuration: String) -> Self {
        Self {
            requirement,
            configuration,
            provenance: None,
        }
    }
}

impl DatasetRow for QuestionConfigPair {
    const SCHEMA: Schema = Schema::Question;

    fn columns(&self) -> [&str; 2] {
        [&self.question, &self.configuration]
    }

    fn from_columns(question: String, configuration: String) -> Self {
        Self {
            question,
            configuration,
            provenance: None,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> DatasetError + '_ {
    move |e| DatasetError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Writes rows with a header (CSV) or as records. CSV drops provenance.
pub fn write_dataset<R: DatasetRow>(rows: &[R], path: &Path, format: DatasetFormat) -> Result<(), DatasetError> {
    match format {
        DatasetFormat::Csv => {
            let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
            w.write_record(R::SCHEMA.header()).map_err(csv_err(path))?;
            for row in rows {
                w.write_record(row.columns()).map_err(csv_err(path))?;
            }
            w.flush().map_err(io_err(path))
        }
        DatasetFormat::Records => write_records(rows, path),
    }
}

/// Reads a dataset written by [`write_dataset`]; the format is detected from
/// the content.
pub fn read_dataset<R: DatasetRow>(path: &Path) -> Result<Vec<R>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    if text.trim_start().starts_with('{') {
        return parse_records(&text, path);
    }
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_err(path))?.clone();
    let expected = R::SCHEMA.header();
    if header.len() != 2 || header[0] != *expected[0] || header[1] != *expected[1] {
        return Err(DatasetError::Format {
            path: path.to_path_buf(),
            message: format!("expected header `{}`", expected.join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        rows.push(R::from_columns(rec[0].to_string(), rec[1].to_string()));
    }
    Ok(rows)
}

/// Writes any serializable values as JSON lines.
pub fn write_records<T: Serialize>(items: &[T], path: &Path) -> Result<(), DatasetError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| DatasetError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut items = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(serde_json::from_str(&line).map_err(|e| DatasetError::Format {
            path: path.to_path_buf(),
            message: format!("line {}: {e}", i + 1),
        })?);
    }
    Ok(items)
}

fn parse_records<T: DeserializeOwned>(text: &str, path: &Path) -> Result<Vec<T>, DatasetError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| DatasetError::Format {
                path: path.to_path_buf(),
                message: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}
