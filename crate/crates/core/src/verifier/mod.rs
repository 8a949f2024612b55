// SPDX-License-Identifier: Apache-2.0

//! Grammar-driven validation of generated configurations.
//!
//! Each line receives a verdict in {1, 0, -1}: it matches a grammar entry of
//! the current mode, it is incomplete or carries an unusual placeholder value,
//! or it is invalid. Blocks are validated sequentially starting in exec mode,
//! threading the configuration mode from line to line. Semantic rules run over
//! the parsed blocks afterwards and every problem becomes a [`Finding`] with a
//! concrete suggestion for the refinement prompt.

mod grammar;
mod semantic;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::types::{ConfigLine, GeneratedConfiguration};

pub use grammar::{
    is_dotted_quad, out_of_range_octets, Binding, CommandGrammar, EntityRef, GrammarEntry, GrammarError, Mode, Pattern,
    PatternError, PatternMatch, Token, ValueClass, DEFAULT_GRAMMAR,
};
pub use semantic::run_semantic_rules;

/// Three-valued score used for line verdicts, syntax scores and goal scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Score {
    Invalid = -1,
    Partial = 0,
    Valid = 1,
}

impl Score {
    pub fn as_i8(self) -> i8 {
        self as i8
    }

    pub fn label(self) -> &'static str {
        match self {
            Score::Valid => "correct",
            Score::Partial => "partially-correct",
            Score::Invalid => "incorrect",
        }
    }
}

impl From<Score> for i8 {
    fn from(s: Score) -> i8 {
        s.as_i8()
    }
}

impl TryFrom<i8> for Score {
    type Error = String;

    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Score::Valid),
            0 => Ok(Score::Partial),
            -1 => Ok(Score::Invalid),
            other => Err(format!("score must be -1, 0 or 1, got {other}")),
        }
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_i8())
    }
}

/// Aggregates line verdicts: all valid gives 1, any invalid gives -1,
/// otherwise 0. An invalid line dominates an incomplete one.
pub fn syntax_score<I: IntoIterator<Item = Score>>(verdicts: I) -> Score {
    let mut score = Score::Valid;
    for v in verdicts {
        match v {
            Score::Invalid => return Score::Invalid,
            Score::Partial => score = Score::Partial,
            Score::Valid => {}
        }
    }
    score
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineVerdict {
    pub value: Score,
    /// Entry fully matched in the current mode chain; present iff value is 1
    /// for a command line.
    pub matched_entry: Option<usize>,
    /// Closest entry for incomplete, unusual, misplaced or invalid lines.
    pub candidate: Option<usize>,
    /// Mode the line would be valid in when it is misplaced.
    pub misplaced_in: Option<Mode>,
    /// Mode the line was evaluated in.
    pub mode: Mode,
    pub bindings: Vec<Binding>,
    pub detail: String,
}

/// Validates one line in `mode` and returns the verdict with the next mode.
pub fn validate_line(line: &ConfigLine, mode: Mode, grammar: &CommandGrammar) -> (LineVerdict, Mode) {
    let text = line.raw.trim();
    let verdict = |value, detail: String| LineVerdict {
        value,
        matched_entry: None,
        candidate: None,
        misplaced_in: None,
        mode,
        bindings: Vec::new(),
        detail,
    };
    if text.starts_with('!') {
        return (verdict(Score::Valid, "comment".into()), mode);
    }
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.is_empty() {
        return (verdict(Score::Invalid, "empty line".into()), mode);
    }

    let mut bad_value: Option<(usize, Binding)> = None;
    let mut prefix_of: Option<usize> = None;
    for m in mode.chain() {
        for &idx in grammar.entries_in(m) {
            let entry = grammar.entry(idx);
            match entry.pattern.match_tokens(&words) {
                PatternMatch::Full(bindings) => {
                    let mut v = verdict(Score::Valid, format!("matches `{}`", entry.pattern));
                    v.matched_entry = Some(idx);
                    v.bindings = bindings;
                    // Exec commands run from privileged mode without leaving it.
                    let next = match (entry.transition, entry.mode) {
                        (None, Mode::Exec) => mode,
                        _ => entry.next_mode(),
                    };
                    return (v, next);
                }
                PatternMatch::BadValue { binding } => {
                    bad_value.get_or_insert((idx, binding));
                }
                PatternMatch::Prefix => {
                    prefix_of.get_or_insert(idx);
                }
                PatternMatch::NoMatch => {}
            }
        }
    }

    if let Some((idx, binding)) = bad_value {
        let mut v = verdict(
            Score::Partial,
            format!(
                "value `{}` is not a valid {} for <{}> in `{}`",
                binding.value,
                binding.class,
                binding.name,
                grammar.entry(idx).pattern
            ),
        );
        v.candidate = Some(idx);
        return (v, mode);
    }
    if let Some(idx) = prefix_of {
        let mut v = verdict(
            Score::Partial,
            format!("incomplete command; expected `{}`", grammar.entry(idx).pattern),
        );
        v.candidate = Some(idx);
        return (v, mode);
    }

    let chain: Vec<Mode> = mode.chain().collect();
    for m in Mode::ALL.into_iter().filter(|m| !chain.contains(m)) {
        for &idx in grammar.entries_in(m) {
            let entry = grammar.entry(idx);
            if let PatternMatch::Full(bindings) = entry.pattern.match_tokens(&words) {
                let mut v = verdict(
                    Score::Invalid,
                    format!("`{}` is a {} command, not valid in {} mode", entry.pattern, m, mode),
                );
                v.candidate = Some(idx);
                v.misplaced_in = Some(m);
                v.bindings = bindings;
                return (v, entry.next_mode());
            }
        }
    }

    let mut v = verdict(Score::Invalid, format!("no {mode} command matches"));
    v.candidate = closest_entry(&words, mode, grammar);
    (v, mode)
}

/// Entry in the mode chain sharing the longest run of leading keywords.
fn closest_entry(words: &[&str], mode: Mode, grammar: &CommandGrammar) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None;
    for m in mode.chain() {
        for &idx in grammar.entries_in(m) {
            let tokens = grammar.entry(idx).pattern.tokens();
            let shared = tokens
                .iter()
                .zip(words)
                .take_while(|(t, w)| match t {
                    Token::Literal { word } => word.eq_ignore_ascii_case(w),
                    Token::Choice { options } => options.iter().any(|o| o.eq_ignore_ascii_case(w)),
                    Token::Placeholder { class, .. } => class.accepts(w),
                })
                .count();
            if shared > 0 && best.is_none_or(|(_, s)| shared > s) {
                best = Some((idx, shared));
            }
        }
    }
    best.map(|(idx, _)| idx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FindingKind {
    Syntax,
    Incomplete,
    SemanticDependency,
    SemanticConflict,
    ModeError,
    ValueSanity,
}

impl fmt::Display for FindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FindingKind::Syntax => "syntax",
            FindingKind::Incomplete => "incomplete",
            FindingKind::SemanticDependency => "semantic-dependency",
            FindingKind::SemanticConflict => "semantic-conflict",
            FindingKind::ModeError => "mode-error",
            FindingKind::ValueSanity => "value-sanity",
        };
        f.write_str(s)
    }
}

/// Ordered high before low.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    High,
    Low,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::High => "high",
            Severity::Low => "low",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub severity: Severity,
    pub block: usize,
    pub line: usize,
    pub message: String,
    pub suggestion: String,
}

/// A validated line together with the mode it was checked in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedLine {
    pub line: ConfigLine,
    pub verdict: LineVerdict,
    pub next_mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedBlock {
    pub device_ordinal: usize,
    pub lines: Vec<ParsedLine>,
}

/// Validates every line of a block, starting in exec mode.
pub fn parse_block(block: &crate::types::DeviceBlock, grammar: &CommandGrammar) -> ParsedBlock {
    let mut mode = Mode::Exec;
    let lines = block
        .lines
        .iter()
        .map(|line| {
            let (verdict, next_mode) = validate_line(line, mode, grammar);
            mode = next_mode;
            ParsedLine {
                line: line.clone(),
                verdict,
                next_mode,
            }
        })
        .collect();
    ParsedBlock {
        device_ordinal: block.device_ordinal,
        lines,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub approved: bool,
    pub syntax_score: Score,
    pub line_verdicts: Vec<Vec<LineVerdict>>,
    pub findings: Vec<Finding>,
}

impl VerificationReport {
    /// Rejection for model output that contained no configuration lines.
    pub fn empty_output() -> Self {
        Self {
            approved: false,
            syntax_score: Score::Invalid,
            line_verdicts: Vec::new(),
            findings: vec![Finding {
                kind: FindingKind::Syntax,
                severity: Severity::High,
                block: 0,
                line: 0,
                message: "the response contained no configuration commands".into(),
                suggestion: "Output only Cisco IOS configuration commands, one per line, \
                             starting with `enable` and `configure terminal`."
                    .into(),
            }],
        }
    }

    pub fn verdicts(&self) -> impl Iterator<Item = Score> + '_ {
        self.line_verdicts.iter().flatten().map(|v| v.value)
    }

    /// Hex SHA-256 of the report's JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("report serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VerifyError {
    #[error("configuration has no device blocks")]
    EmptyConfiguration,
}

pub fn verify_config(
    config: &GeneratedConfiguration,
    grammar: &CommandGrammar,
) -> Result<VerificationReport, VerifyError> {
    if config.blocks.is_empty() {
        return Err(VerifyError::EmptyConfiguration);
    }
    let parsed: Vec<ParsedBlock> = config.blocks.iter().map(|b| parse_block(b, grammar)).collect();

    let mut findings = Vec::new();
    for block in &parsed {
        for pl in &block.lines {
            let v = &pl.verdict;
            let quoted = pl.line.raw.trim();
            match v.value {
                Score::Partial => findings.push(Finding {
                    kind: FindingKind::Incomplete,
                    severity: Severity::Low,
                    block: block.device_ordinal,
                    line: pl.line.index,
                    message: format!("`{quoted}`: {}", v.detail),
                    suggestion: match v.candidate {
                        Some(idx) => format!(
                            "Complete the command to the form `{}` with valid values.",
                            grammar.entry(idx).pattern
                        ),
                        None => "Complete the command with all required arguments.".into(),
                    },
                }),
                Score::Invalid if v.misplaced_in.is_none() => findings.push(Finding {
                    kind: FindingKind::Syntax,
                    severity: Severity::High,
                    block: block.device_ordinal,
                    line: pl.line.index,
                    message: format!("`{quoted}` is not a valid IOS command in {} mode", v.mode),
                    suggestion: match v.candidate {
                        Some(idx) => format!(
                            "Replace it with a valid command; the closest known form is `{}`.",
                            grammar.entry(idx).pattern
                        ),
                        None => format!("Remove `{quoted}` or replace it with a valid {} command.", v.mode),
                    },
                }),
                _ => {}
            }
        }
    }
    findings.extend(run_semantic_rules(&parsed, grammar));
    findings.sort_by_key(|f| (f.block, f.line));

    let line_verdicts: Vec<Vec<LineVerdict>> = parsed
        .into_iter()
        .map(|b| b.lines.into_iter().map(|l| l.verdict).collect())
        .collect();
    let syntax_score = syntax_score(line_verdicts.iter().flatten().map(|v| v.value));
    Ok(VerificationReport {
        approved: findings.is_empty(),
        syntax_score,
        line_verdicts,
        findings,
    })
}
