// SPDX-License-Identifier: Apache-2.0

//! Scoring: goal accuracy against command checklists, length and duration
//! totals, min-max normalization and the combined complexity score.

mod batch;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{GeneratedConfiguration, Intent};
use crate::verifier::{Pattern, PatternError, Score};

pub use batch::{
    evaluate_batch, evaluate_batch_with, load_eval_cases, normalize_batch, parse_eval_cases, write_report, BatchReport,
    BatchSummary, CaseLoadError, CaseScorer, Distribution, LevelCounts, MetricsRecord, ReportPaths,
};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("pattern `{pattern}`: {source}")]
    Pattern {
        pattern: String,
        #[source]
        source: PatternError,
    },
    #[error("case {0} has no mandatory patterns")]
    EmptyChecklist(String),
    #[error("cannot normalize an empty list")]
    EmptyList,
    #[error("{name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("value {0} is negative or not finite")]
    InvalidValue(f64),
    #[error("batch has no cases")]
    EmptyBatch,
}

/// One benchmark requirement with its goal checklist.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCase {
    pub intent: Intent,
    /// Commands the configuration must contain to fully meet the goal.
    pub mandatory_patterns: Vec<String>,
    /// Commands that earn partial credit on their own.
    #[serde(default)]
    pub relevant_patterns: Vec<String>,
}

impl EvalCase {
    pub fn new(intent: Intent, mandatory: &[&str], relevant: &[&str]) -> Result<Self, MetricsError> {
        let case = Self {
            intent,
            mandatory_patterns: mandatory.iter().map(|s| s.to_string()).collect(),
            relevant_patterns: relevant.iter().map(|s| s.to_string()).collect(),
        };
        case.compile()?;
        Ok(case)
    }

    /// Parses both checklists.
    pub fn compile(&self) -> Result<(Vec<Pattern>, Vec<Pattern>), MetricsError> {
        if self.mandatory_patterns.is_empty() {
            return Err(MetricsError::EmptyChecklist(self.intent.id.clone()));
        }
        let parse = |list: &[String]| {
            list.iter()
                .map(|p| {
                    p.parse::<Pattern>().map_err(|source| MetricsError::Pattern {
                        pattern: p.clone(),
                        source,
                    })
                })
                .collect::<Result<Vec<_>, _>>()
        };
        Ok((parse(&self.mandatory_patterns)?, parse(&self.relevant_patterns)?))
    }
}

/// 1 when every mandatory pattern matches some line, 0 when at least one
/// pattern (mandatory or relevant) matches, -1 otherwise. Line and block order
/// do not matter.
pub fn goal_accuracy(config: &GeneratedConfiguration, case: &EvalCase) -> Result<Score, MetricsError> {
    let (mandatory, relevant) = case.compile()?;
    let lines: Vec<&str> = config.lines().map(|l| l.raw.as_str()).collect();
    let hit = |p: &Pattern| lines.iter().any(|l| p.matches_line(l));
    let mandatory_hits = mandatory.iter().filter(|p| hit(p)).count();
    Ok(if mandatory_hits == mandatory.len() {
        Score::Valid
    } else if mandatory_hits > 0 || relevant.iter().any(hit) {
        Score::Partial
    } else {
        Score::Invalid
    })
}

pub fn total_len(trans_len: usize, config_len: usize) -> usize {
    trans_len + config_len
}

/// Seconds in, minutes out.
pub fn total_dura_time(translation_secs: f64, configuration_secs: f64) -> f64 {
    (translation_secs + configuration_secs) / 60.0
}

/// Maps each value to `(v - min) / (max - min)`. When all values are equal
/// every output is 0.
pub fn min_max_normalize(values: &[f64]) -> Result<Vec<f64>, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptyList);
    }
    if let Some(&bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(MetricsError::InvalidValue(bad));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if range == 0.0 {
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values.iter().map(|v| ((v - min) / range).clamp(0.0, 1.0)).collect())
}

pub fn complexity_score(norm_len: f64, norm_time: f64) -> Result<f64, MetricsError> {
    for (name, value) in [("norm_len", norm_len), ("norm_time", norm_time)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(MetricsError::OutOfRange { name, value });
        }
    }
    Ok((norm_len + norm_time) / 2.0)
}
