// SPDX-License-Identifier: Apache-2.0

//! Batch evaluation: run one session per case, score it, normalize over the
//! batch and aggregate.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{complexity_score, goal_accuracy, min_max_normalize, total_dura_time, total_len, EvalCase, MetricsError};
use crate::agent::{SessionResult, SessionRunner, SessionStatus};
use crate::types::{Intent, IntentForm};
use crate::verifier::Score;

/// Extra per-case score computed alongside the built-in metrics.
pub trait CaseScorer: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, case: &EvalCase, result: &SessionResult) -> Option<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub intent_id: String,
    pub status: SessionStatus,
    /// Session failed; scores are forced to -1.
    pub failed: bool,
    pub iterations_used: u32,
    pub syntax_score: Score,
    pub goal_score: Score,
    /// Characters of intent text plus plan text.
    pub trans_len: usize,
    /// Characters of the final configuration text.
    pub config_len: usize,
    pub total_len: usize,
    pub translation_secs: f64,
    pub configuration_secs: f64,
    /// Minutes.
    pub total_dura_time: f64,
    pub norm_total_len: f64,
    pub norm_total_dura_time: f64,
    pub complexity_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

impl MetricsRecord {
    /// Per-case measurements before batch normalization.
    pub fn raw(case: &EvalCase, result: &SessionResult) -> Result<Self, MetricsError> {
        let failed = result.status == SessionStatus::Failed;
        let trans_len =
            case.intent.text.chars().count() + result.plan.as_ref().map_or(0, |p| p.numbered().chars().count());
        let config_len = result
            .final_config
            .as_ref()
            .map_or(0, |c| c.command_text().chars().count());
        let (syntax_score, goal_score) = match (&result.final_config, &result.final_report) {
            (Some(cfg), Some(report)) if !failed => (report.syntax_score, goal_accuracy(cfg, case)?),
            _ => (Score::Invalid, Score::Invalid),
        };
        let t = result.timings;
        Ok(Self {
            intent_id: case.intent.id.clone(),
            status: result.status,
            failed,
            iterations_used: result.iterations_used,
            syntax_score,
            goal_score,
            trans_len,
            config_len,
            total_len: total_len(trans_len, config_len),
            translation_secs: t.translation_secs,
            configuration_secs: t.configuration_secs,
            total_dura_time: total_dura_time(t.translation_secs, t.configuration_secs),
            norm_total_len: 0.0,
            norm_total_dura_time: 0.0,
            complexity_score: 0.0,
            error: result.error.clone(),
            extra: BTreeMap::new(),
        })
    }
}

/// Fills the normalized fields and complexity using the batch as population.
pub fn normalize_batch(records: &mut [MetricsRecord]) -> Result<(), MetricsError> {
    let lens: Vec<f64> = records.iter().map(|r| r.total_len as f64).collect();
    let times: Vec<f64> = records.iter().map(|r| r.total_dura_time).collect();
    let norm_len = min_max_normalize(&lens)?;
    let norm_time = min_max_normalize(&times)?;
    for ((r, l), t) in records.iter_mut().zip(norm_len).zip(norm_time) {
        r.norm_total_len = l;
        r.norm_total_dura_time = t;
        r.complexity_score = complexity_score(l, t)?;
    }
    Ok(())
}

/// Cases at each score level.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCounts {
    pub correct: usize,
    pub partial: usize,
    pub incorrect: usize,
}

impl LevelCounts {
    pub fn from_scores<I: IntoIterator<Item = Score>>(scores: I) -> Self {
        let mut c = Self::default();
        for s in scores {
            match s {
                Score::Valid => c.correct += 1,
                Score::Partial => c.partial += 1,
                Score::Invalid => c.incorrect += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.correct + self.partial + self.incorrect
    }

    /// Ordered correct, partially correct, incorrect.
    pub fn counts(&self) -> [usize; 3] {
        [self.correct, self.partial, self.incorrect]
    }

    pub fn fractions(&self) -> [f64; 3] {
        let n = self.total();
        if n == 0 {
            return [0.0; 3];
        }
        self.counts().map(|c| c as f64 / n as f64)
    }

    /// Whole percentages, truncated: 57 of 99 reads as 57%.
    pub fn percents(&self) -> [usize; 3] {
        let n = self.total();
        if n == 0 {
            return [0; 3];
        }
        self.counts().map(|c| c * 100 / n)
    }
}

impl fmt::Display for LevelCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.percents();
        write!(f, "{a}%/{b}%/{c}%")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
}

impl Distribution {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        Self {
            min: sorted[0],
            max: sorted[n - 1],
            mean: sorted.iter().sum::<f64>() / n as f64,
            median,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub cases: usize,
    pub approved: usize,
    pub failed: usize,
    pub syntax: LevelCounts,
    pub goal: LevelCounts,
    pub complexity: Distribution,
    /// Minutes.
    pub total_dura_time: Distribution,
    pub total_len: Distribution,
}

impl BatchSummary {
    pub fn from_records(records: &[MetricsRecord]) -> Self {
        let series = |f: fn(&MetricsRecord) -> f64| records.iter().map(f).collect::<Vec<_>>();
        Self {
            cases: records.len(),
            approved: records.iter().filter(|r| r.status == SessionStatus::Approved).count(),
            failed: records.iter().filter(|r| r.failed).count(),
            syntax: LevelCounts::from_scores(records.iter().map(|r| r.syntax_score)),
            goal: LevelCounts::from_scores(records.iter().map(|r| r.goal_score)),
            complexity: Distribution::of(&series(|r| r.complexity_score)),
            total_dura_time: Distribution::of(&series(|r| r.total_dura_time)),
            total_len: Distribution::of(&series(|r| r.total_len as f64)),
        }
    }

    /// Human-readable table for terminals.
    pub fn table(&self) -> String {
        let mut out = format!(
            "cases: {}  approved: {}  failed: {}\n{:<10}{:>10}{:>20}{:>12}\n",
            self.cases, self.approved, self.failed, "metric", "correct", "partially-correct", "incorrect"
        );
        for (name, lc) in [("syntax", &self.syntax), ("goal", &self.goal)] {
            let [a, b, c] = lc.counts();
            let [pa, pb, pc] = lc.percents();
            out.push_str(&format!(
                "{name:<10}{:>10}{:>20}{:>12}\n",
                format!("{a} ({pa}%)"),
                format!("{b} ({pb}%)"),
                format!("{c} ({pc}%)")
            ));
        }
        for (name, d) in [
            ("complexity", &self.complexity),
            ("time(min)", &self.total_dura_time),
            ("length", &self.total_len),
        ] {
            out.push_str(&format!(
                "{name:<10} min {:.4}  median {:.4}  mean {:.4}  max {:.4}\n",
                d.min, d.median, d.mean, d.max
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub records: Vec<MetricsRecord>,
    pub summary: BatchSummary,
}

pub fn evaluate_batch(
    cases: &[EvalCase],
    runner: &dyn SessionRunner,
    jobs: usize,
) -> Result<BatchReport, MetricsError> {
    evaluate_batch_with(cases, runner, jobs, &[])
}

/// Runs every case (up to `jobs` at a time), then normalizes and aggregates.
/// Session failures become flagged -1/-1 records; the batch never aborts on
/// them.
pub fn evaluate_batch_with(
    cases: &[EvalCase],
    runner: &dyn SessionRunner,
    jobs: usize,
    scorers: &[&dyn CaseScorer],
) -> Result<BatchReport, MetricsError> {
    if cases.is_empty() {
        return Err(MetricsError::EmptyBatch);
    }
    for case in cases {
        case.compile()?;
    }
    let run = |case: &EvalCase| runner.run(&case.intent);
    let results: Vec<SessionResult> = if jobs <= 1 {
        cases.iter().map(run).collect()
    } else {
        match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => pool.install(|| cases.par_iter().map(run).collect()),
            Err(e) => {
                log::warn!("thread pool unavailable ({e}); running sequentially");
                cases.iter().map(run).collect()
            }
        }
    };
    let mut records = cases
        .iter()
        .zip(&results)
        .map(|(case, result)| {
            let mut r = MetricsRecord::raw(case, result)?;
            for s in scorers {
                if let Some(v) = s.score(case, result) {
                    r.extra.insert(s.name().to_string(), v);
                }
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>, MetricsError>>()?;
    normalize_batch(&mut records)?;
    let summary = BatchSummary::from_records(&records);
    Ok(BatchReport { records, summary })
}

#[derive(Deserialize)]
struct CaseRecord {
    #[serde(default)]
    id: Option<serde_json::Value>,
    text: String,
    #[serde(default = "default_form")]
    form: IntentForm,
    #[serde(default)]
    context: Option<String>,
    mandatory_patterns: Vec<String>,
    #[serde(default)]
    relevant_patterns: Vec<String>,
}

fn default_form() -> IntentForm {
    IntentForm::Requirement
}

#[derive(Debug, thiserror::Error)]
pub enum CaseLoadError {
    #[error("reading eval cases: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("eval case file has no cases")]
    Empty,
}

pub fn load_eval_cases(path: &Path) -> Result<Vec<EvalCase>, CaseLoadError> {
    parse_eval_cases(&std::fs::read_to_string(path)?)
}

/// JSON lines of `{id?, text, form?, context?, mandatory_patterns,
/// relevant_patterns?}`.
pub fn parse_eval_cases(text: &str) -> Result<Vec<EvalCase>, CaseLoadError> {
    let mut cases = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let err = |message: String| CaseLoadError::Parse { line, message };
        let rec: CaseRecord = serde_json::from_str(raw).map_err(|e| err(e.to_string()))?;
        let id = match rec.id {
            None => line.to_string(),
            Some(serde_json::Value::String(s)) if !s.trim().is_empty() => s,
            Some(serde_json::Value::Number(n)) => n.to_string(),
            Some(other) => return Err(err(format!("invalid id {other}"))),
        };
        if let Some(first) = seen.insert(id.clone(), line) {
            return Err(err(format!("duplicate id `{id}` (first seen on line {first})")));
        }
        let mut intent = Intent::new(id, rec.text, rec.form).map_err(|e| err(e.to_string()))?;
        if let Some(c) = rec.context {
            intent = intent.with_context(c);
        }
        let case = EvalCase {
            intent,
            mandatory_patterns: rec.mandatory_patterns,
            relevant_patterns: rec.relevant_patterns,
        };
        case.compile().map_err(|e| err(e.to_string()))?;
        cases.push(case);
    }
    if cases.is_empty() {
        return Err(CaseLoadError::Empty);
    }
    Ok(cases)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportPaths {
    pub records: PathBuf,
    pub summary: PathBuf,
    pub cases: PathBuf,
}

#[derive(Serialize)]
struct CaseRow<'a> {
    intent_id: &'a str,
    status: SessionStatus,
    syntax_score: i8,
    goal_score: i8,
    total_len: usize,
    norm_total_len: f64,
    total_dura_time: f64,
    norm_total_dura_time: f64,
    complexity_score: f64,
}

/// Writes `records.jsonl`, `summary.csv` (one row per score level) and
/// `cases.csv` (per-case series) into `dir`.
pub fn write_report(report: &BatchReport, dir: &Path) -> std::io::Result<ReportPaths> {
    std::fs::create_dir_all(dir)?;
    let paths = ReportPaths {
        records: dir.join("records.jsonl"),
        summary: dir.join("summary.csv"),
        cases: dir.join("cases.csv"),
    };
    let mut jsonl = Vec::new();
    for r in &report.records {
        serde_json::to_writer(&mut jsonl, r).map_err(std::io::Error::other)?;
        jsonl.push(b'\n');
    }
    std::fs::write(&paths.records, jsonl)?;

    let mut w = csv::Writer::from_path(&paths.summary)?;
    w.write_record([
        "level",
        "syntax_count",
        "syntax_fraction",
        "syntax_percent",
        "goal_count",
        "goal_fraction",
        "goal_percent",
    ])?;
    let s = &report.summary;
    let (sc, sf, sp) = (s.syntax.counts(), s.syntax.fractions(), s.syntax.percents());
    let (gc, gf, gp) = (s.goal.counts(), s.goal.fractions(), s.goal.percents());
    for (i, level) in [Score::Valid, Score::Partial, Score::Invalid].into_iter().enumerate() {
        w.write_record([
            level.label().to_string(),
            sc[i].to_string(),
            sf[i].to_string(),
            sp[i].to_string(),
            gc[i].to_string(),
            gf[i].to_string(),
            gp[i].to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(&paths.cases)?;
    for r in &report.records {
        w.serialize(CaseRow {
            intent_id: &r.intent_id,
            status: r.status,
            syntax_score: r.syntax_score.as_i8(),
            goal_score: r.goal_score.as_i8(),
            total_len: r.total_len,
            norm_total_len: r.norm_total_len,
            total_dura_time: r.total_dura_time,
            norm_total_dura_time: r.norm_total_dura_time,
            complexity_score: r.complexity_score,
        })?;
    }
    w.flush()?;
    Ok(paths)
}
