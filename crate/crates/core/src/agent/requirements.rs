// SPDX-License-Identifier: Apache-2.0

//! JSON-lines requirement files: one `{id?, text, form, context?}` per line.

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::types::{Intent, IntentForm};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("reading requirements: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate id `{id}` (first seen on line {first})")]
    DuplicateId { line: usize, first: usize, id: String },
    #[error("requirements file has no records")]
    Empty,
}

#[derive(Deserialize)]
struct Record {
    #[serde(default)]
    id: Option<IdField>,
    text: String,
    form: IntentForm,
    #[serde(default)]
    context: Option<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum IdField {
    Text(String),
    Number(u64),
}

pub fn load_requirements(path: &Path) -> Result<Vec<Intent>, LoadError> {
    parse_requirements(&std::fs::read_to_string(path)?)
}

/// Records without an id get their 1-based line number as id. Blank lines are
/// skipped.
pub fn parse_requirements(text: &str) -> Result<Vec<Intent>, LoadError> {
    let mut intents = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(raw).map_err(|e| LoadError::Parse {
            line,
            message: e.to_string(),
        })?;
        let id = match record.id {
            Some(IdField::Text(s)) if s.trim().is_empty() => {
                return Err(LoadError::Parse {
                    line,
                    message: "id is empty".into(),
                })
            }
            Some(IdField::Text(s)) => s,
            Some(IdField::Number(n)) => n.to_string(),
            None => line.to_string(),
        };
        if let Some(&first) = seen.get(&id) {
            return Err(LoadError::DuplicateId { line, first, id });
        }
        seen.insert(id.clone(), line);
        let mut intent = Intent::new(id, record.text, record.form).map_err(|e| LoadError::Parse {
            line,
            message: e.to_string(),
        })?;
        if let Some(ctx) = record.context {
            intent = intent.with_context(ctx);
        }
        intents.push(intent);
    }
    if intents.is_empty() {
        return Err(LoadError::Empty);
    }
    Ok(intents)
}
