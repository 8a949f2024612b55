// SPDX-License-Identifier: Apache-2.0

//! Versioned store of approved configurations:
//! `<root>/<intent_id>/v<N>/{config.txt,meta.json}`.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{SessionResult, SessionStatus};
use crate::types::{GeneratedConfiguration, IntentKind};
use crate::verifier::{verify_config, CommandGrammar, Score};

const CONFIG_FILE: &str = "config.txt";
const META_FILE: &str = "meta.json";
const MAX_VERSION_ATTEMPTS: u32 = 64;

#[derive(Debug, Error)]
pub enum RepoError {
    #[error("intent {intent_id} is {status}, only approved configurations are stored")]
    NotApproved { intent_id: String, status: SessionStatus },
    #[error("intent {0} has no final configuration")]
    MissingConfig(String),
    #[error("configuration for intent {0} no longer verifies under the repository grammar")]
    ReverifyFailed(String),
    #[error("intent id `{0}` cannot be used as a directory name")]
    UnsafeId(String),
    #[error("no version {version} stored for intent {intent_id}")]
    NoSuchVersion { intent_id: String, version: u32 },
    #[error("could not allocate a new version for intent {0}")]
    VersionContention(String),
    #[error("repository I/O at {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("corrupt metadata at {path}: {message}")]
    Meta { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RepoError + '_ {
    move |source| RepoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepoMeta {
    pub intent_id: String,
    pub version: u32,
    pub stored_at: DateTime<Utc>,
    /// Hex SHA-256 of the verification report the config was stored with.
    pub report_digest: String,
    pub classification: Option<IntentKind>,
    pub iterations_used: u32,
    pub syntax_score: Score,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepoEntry {
    pub meta: RepoMeta,
    pub config_text: String,
    pub path: PathBuf,
}

/// Handle on a repository directory. Writes are atomic per version: files are
/// staged in a temporary directory that is renamed into place, so readers see
/// either nothing or a complete version.
#[derive(Debug, Clone)]
pub struct ConfigRepo {
    root: PathBuf,
}

impl ConfigRepo {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn intent_dir(&self, intent_id: &str) -> Result<PathBuf, RepoError> {
        let unsafe_id =
            intent_id.is_empty() || intent_id.starts_with('.') || intent_id.contains(['/', '\\', '\0', ':']);
        if unsafe_id {
            return Err(RepoError::UnsafeId(intent_id.to_string()));
        }
        Ok(self.root.join(intent_id))
    }

    /// Stored versions for an intent, ascending.
    pub fn versions(&self, intent_id: &str) -> Result<Vec<u32>, RepoError> {
        let dir = self.intent_dir(intent_id)?;
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io_err(&dir)(e)),
        };
        let mut versions = Vec::new();
        for entry in entries {
            let entry = entry.map_err(io_err(&dir))?;
            let name = entry.file_name();
            if let Some(n) = name
                .to_str()
                .and_then(|n| n.strip_prefix('v'))
                .and_then(|n| n.parse().ok())
            {
                versions.push(n);
            }
        }
        versions.sort_unstable();
        Ok(versions)
    }

    pub fn read(&self, intent_id: &str, version: u32) -> Result<RepoEntry, RepoError> {
        let path = self.intent_dir(intent_id)?.join(format!("v{version}"));
        if !path.is_dir() {
            return Err(RepoError::NoSuchVersion {
                intent_id: intent_id.to_string(),
                version,
            });
        }
        let config_path = path.join(CONFIG_FILE);
        let config_text = fs::read_to_string(&config_path).map_err(io_err(&config_path))?;
        let meta_path = path.join(META_FILE);
        let raw = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
        let meta = serde_json::from_str(&raw).map_err(|e| RepoError::Meta {
            path: meta_path.clone(),
            message: e.to_string(),
        })?;
        Ok(RepoEntry {
            meta,
            config_text,
            path,
        })
    }

    pub fn latest(&self, intent_id: &str) -> Result<Option<RepoEntry>, RepoError> {
        match self.versions(intent_id)?.last() {
            Some(&v) => self.read(intent_id, v).map(Some),
            None => Ok(None),
        }
    }

    /// Stores an approved result as a new version after re-verifying its text.
    pub fn store(&self, result: &SessionResult, grammar: &CommandGrammar) -> Result<RepoEntry, RepoError> {
        if result.status != SessionStatus::Approved {
            return Err(RepoError::NotApproved {
                intent_id: result.intent_id.clone(),
                status: result.status,
            });
        }
        let config = result
            .final_config
            .as_ref()
            .ok_or_else(|| RepoError::MissingConfig(result.intent_id.clone()))?;
        let dir = self.intent_dir(&result.intent_id)?;
        let config_text = config.command_text();

        // The stored text is what gets reused, so that is what must verify.
        let reparsed = GeneratedConfiguration::from_text(&result.intent_id, config_text.as_str());
        let report = verify_config(&reparsed, grammar)
            .ok()
            .filter(|r| r.approved)
            .ok_or_else(|| RepoError::ReverifyFailed(result.intent_id.clone()))?;

        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let mut version = self.versions(&result.intent_id)?.last().copied().unwrap_or(0) + 1;
        for _ in 0..MAX_VERSION_ATTEMPTS {
            let meta = RepoMeta {
                intent_id: result.intent_id.clone(),
                version,
                stored_at: Utc::now(),
                report_digest: report.digest(),
                classification: result.classification.clone(),
                iterations_used: result.iterations_used,
                syntax_score: report.syntax_score,
            };
            let staging = tempfile_dir(&dir)?;
            write_file(&staging.join(CONFIG_FILE), config_text.as_bytes())?;
            let meta_json = serde_json::to_vec_pretty(&meta).expect("meta serializes");
            write_file(&staging.join(META_FILE), &meta_json)?;

            let target = dir.join(format!("v{version}"));
            match fs::rename(&staging, &target) {
                Ok(()) => {
                    return Ok(RepoEntry {
                        meta,
                        config_text,
                        path: target,
                    })
                }
                // Another writer took this version number.
                Err(_) if target.exists() => {
                    let _ = fs::remove_dir_all(&staging);
                    version += 1;
                }
                Err(e) => {
                    let _ = fs::remove_dir_all(&staging);
                    return Err(io_err(&target)(e));
                }
            }
        }
        Err(RepoError::VersionContention(result.intent_id.clone()))
    }
}

fn tempfile_dir(parent: &Path) -> Result<PathBuf, RepoError> {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    loop {
        let n = COUNTER.fetch_add(1, Ordering::Relaxed);
        let path = parent.join(format!(".staging-{}-{n}", std::process::id()));
        match fs::create_dir(&path) {
            Ok(()) => return Ok(path),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(io_err(&path)(e)),
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), RepoError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))?;
    f.sync_all().map_err(io_err(path))
}

pub fn store_config(
    repo_root: &Path,
    result: &SessionResult,
    grammar: &CommandGrammar,
) -> Result<RepoEntry, RepoError> {
    ConfigRepo::new(repo_root).store(result, grammar)
}
