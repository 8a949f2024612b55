// SPDX-License-Identifier: Apache-2.0

//! Settings resolution: flag, then environment, then config file, then
//! built-in default.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;

use super::{CliError, GlobalArgs};
use crate::agent::{AgentConfig, DEFAULT_LABEL, DEFAULT_MAX_ITERATIONS, DEFAULT_MODEL};
use crate::backend::{Backend, HttpBackend, HttpBackendConfig, MockBackend};
use crate::dataset::{DatasetFormat, DatasetOptions};
use crate::prompts::{PromptTemplates, DEFAULT_LABELS};
use crate::text::ProseFilter;
use crate::verifier::CommandGrammar;

pub const GRAMMAR_ENV: &str = "NETCFG_GRAMMAR";
/// Backend URLs with this scheme load a scripted mock from the given path.
pub const MOCK_SCHEME: &str = "mock:";

/// Contents of a `--config` TOML file. Relative paths resolve against the
/// file's directory.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub backend_url: Option<String>,
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub timeout_secs: Option<f64>,
    pub retries: Option<u32>,
    pub grammar: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub max_iterations: Option<u32>,
    pub repo: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub format: Option<String>,
    pub labels: Option<Vec<String>>,
    pub default_label: Option<String>,
    pub prose_prefixes: Option<Vec<String>>,
    pub rejection_list: Option<Vec<String>>,
    pub max_len: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("config file {}: {e}", path.display())))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).map_err(|e| CliError::usage(format!("config file {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.grammar, &mut cfg.templates, &mut cfg.repo, &mut cfg.log]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(url) = cfg.backend_url.as_mut() {
            if let Some(rest) = url.strip_prefix(MOCK_SCHEME) {
                if Path::new(rest).is_relative() {
                    *url = format!("{MOCK_SCHEME}{}", base.join(rest).display());
                }
            }
        }
        Ok(cfg)
    }
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub backend_url: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout: Duration,
    pub retries: u32,
    pub grammar: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub max_iterations: u32,
    pub repo: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub jobs: usize,
    pub format: DatasetFormat,
    pub labels: Vec<String>,
    pub default_label: String,
    pub prose_prefixes: Option<Vec<String>>,
    pub rejection_list: Option<Vec<String>>,
    pub max_len: usize,
}

impl CliConfig {
    /// `args` already merge flags with their environment variables.
    pub fn resolve(args: &GlobalArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let format = match args.format.clone().or(file.format) {
            Some(f) => f.parse().map_err(CliError::usage)?,
            None => DatasetFormat::Csv,
        };
        let timeout_secs = file.timeout_secs.unwrap_or(120.0);
        if !(timeout_secs > 0.0 && timeout_secs.is_finite()) {
            return Err(CliError::usage("timeout_secs must be positive"));
        }
        let max_iterations = args.max_iter.or(file.max_iterations).unwrap_or(DEFAULT_MAX_ITERATIONS);
        if max_iterations == 0 {
            return Err(CliError::usage("max iterations must be at least 1"));
        }
        Ok(Self {
            backend_url: args.backend_url.clone().or(file.backend_url),
            model: args
                .model
                .clone()
                .or(file.model)
                .unwrap_or_else(|| DEFAULT_MODEL.into()),
            temperature: file.temperature.unwrap_or(0.0),
            max_tokens: file.max_tokens.unwrap_or(1024),
            timeout: Duration::from_secs_f64(timeout_secs),
            retries: file.retries.unwrap_or(2),
            grammar: args.grammar.clone().or(file.grammar),
            templates: args.templates.clone().or(file.templates),
            max_iterations,
            repo: args.repo.clone().or(file.repo),
            log: args.log.clone().or(file.log),
            jobs: args.jobs.or(file.jobs).unwrap_or(1).max(1),
            format,
            labels: file
                .labels
                .unwrap_or_else(|| DEFAULT_LABELS.iter().map(|s| s.to_string()).collect()),
            default_label: file.default_label.unwrap_or_else(|| DEFAULT_LABEL.into()),
            prose_prefixes: file.prose_prefixes,
            rejection_list: file.rejection_list,
            max_len: file.max_len.unwrap_or(crate::dataset::DEFAULT_MAX_LEN),
        })
    }

    pub fn grammar(&self) -> Result<CommandGrammar, CliError> {
        match &self.grammar {
            Some(path) => {
                CommandGrammar::load(path).map_err(|e| CliError::usage(format!("grammar {}: {e}", path.display())))
            }
            None => Ok(CommandGrammar::default()),
        }
    }

    pub fn templates(&self) -> Result<PromptTemplates, CliError> {
        match &self.templates {
            Some(path) => {
                PromptTemplates::load(path).map_err(|e| CliError::usage(format!("templates {}: {e}", path.display())))
            }
            None => Ok(PromptTemplates::default()),
        }
    }

    pub fn backend(&self) -> Result<Arc<dyn Backend>, CliError> {
        let url = self.backend_url.as_deref().ok_or_else(|| {
            CliError::usage(format!(
                "no backend configured; pass --backend-url or set {}",
                crate::backend::BACKEND_URL_ENV
            ))
        })?;
        if let Some(path) = url.strip_prefix(MOCK_SCHEME) {
            let mock = MockBackend::from_script_file(Path::new(path))
                .map_err(|e| CliError::usage(format!("mock script {path}: {e}")))?;
            return Ok(Arc::new(mock));
        }
        let mut cfg = HttpBackendConfig::new(url);
        cfg.timeout = self.timeout;
        cfg.retries = self.retries;
        let http = HttpBackend::new(cfg).map_err(|e| CliError::failure(e.to_string()))?;
        Ok(Arc::new(http))
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            model_name: self.model.clone(),
            labels: self.labels.clone(),
            default_label: self.default_label.clone(),
            max_iterations: self.max_iterations,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            prose_filter: self
                .prose_prefixes
                .as_ref()
                .map(|p| ProseFilter::new(p.iter().cloned()))
                .unwrap_or_default(),
        }
    }

    pub fn dataset_options(&self) -> DatasetOptions {
        let defaults = DatasetOptions::default();
        DatasetOptions {
            model_name: self.model.clone(),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            max_len: self.max_len,
            rejection_list: self.rejection_list.clone().unwrap_or(defaults.rejection_list),
            jobs: self.jobs,
            ..defaults
        }
    }
}
