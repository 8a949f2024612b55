// SPDX-License-Identifier: Apache-2.0

//! Model-driven pair extraction, placeholder cleaning and question rewriting.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{Chunk, DatasetOptions};
use crate::backend::{Backend, BackendError, CompletionRequest};
use crate::prompts::PromptTemplates;

pub const DEFAULT_REJECTION_LIST: &[&str] = &["None specified in this text", "N/A"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub page: usize,
    pub chunk: usize,
}

impl From<&Chunk> for Provenance {
    fn from(c: &Chunk) -> Self {
        Self {
            page: c.source_page,
            chunk: c.ordinal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequirementConfigPair {
    pub requirement: String,
    pub configuration: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl RequirementConfigPair {
    pub fn new(requirement: impl Into<String>, configuration: impl Into<String>) -> Self {
        Self {
            requirement: requirement.into(),
            configuration: configuration.into(),
            provenance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionConfigPair {
    pub question: String,
    pub configuration: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

fn label_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // Optional list marker or bold wrapping around the label.
    RE.get_or_init(|| {
        Regex::new(r"(?i)^(?:\d+[.)]\s*|[-*]\s+)?\**\s*(requirement|configuration)\s*\**\s*:\s*\**\s*(.*)$")
            .expect("valid regex")
    })
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Requirement,
    Configuration,
}

/// Parses `requirement:` / `configuration:` sections. A requirement label
/// opens a new pair; text before the first one is ignored. Requirement
/// continuation lines are joined with spaces, configuration lines with
/// newlines.
pub fn parse_enhancement_response(text: &str) -> Vec<RequirementConfigPair> {
    let mut pairs: Vec<RequirementConfigPair> = Vec::new();
    let mut section: Option<Section> = None;
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with("```") {
            continue;
        }
        if let Some(c) = label_re().captures(line) {
            let rest = c[2].trim();
            if c[1].eq_ignore_ascii_case("requirement") {
                pairs.push(RequirementConfigPair::new(rest, ""));
                section = Some(Section::Requirement);
            } else if let Some(pair) = pairs.last_mut() {
                if !pair.configuration.is_empty() {
                    // A second configuration label without a new requirement.
                    pair.configuration.push('\n');
                }
                pair.configuration.push_str(rest);
                section = Some(Section::Configuration);
            }
            continue;
        }
        let Some(pair) = pairs.last_mut() else { continue };
        match section {
            Some(Section::Requirement) => {
                if !pair.requirement.is_empty() {
                    pair.requirement.push(' ');
                }
                pair.requirement.push_str(line);
            }
            Some(Section::Configuration) => {
                if !pair.configuration.is_empty() {
                    pair.configuration.push('\n');
                }
                pair.configuration.push_str(line);
            }
            None => {}
        }
    }
    pairs
}

fn request(opts: &DatasetOptions, messages: Vec<crate::types::ChatMessage>) -> CompletionRequest {
    let mut req = CompletionRequest::new(opts.model_name.clone(), messages);
    req.temperature = opts.temperature;
    req.max_tokens = opts.max_tokens;
    req
}

/// Extracts pairs from one chunk. An unparseable response yields no pairs.
pub fn enhance_chunk<B: Backend + ?Sized>(
    chunk: &Chunk,
    backend: &B,
    templates: &PromptTemplates,
    opts: &DatasetOptions,
) -> Result<Vec<RequirementConfigPair>, BackendError> {
    let messages = templates
        .build_enhancement_prompt(&chunk.text)
        .map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
    let response = backend.complete(&request(opts, messages))?;
    let mut pairs = parse_enhancement_response(&response.text);
    if pairs.is_empty() {
        log::warn!(
            "page {} chunk {}: no labelled pairs in model response",
            chunk.source_page,
            chunk.ordinal
        );
    }
    for p in &mut pairs {
        p.provenance = Some(Provenance::from(chunk));
    }
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanOutcome {
    pub kept: Vec<RequirementConfigPair>,
    pub removed: usize,
}

fn is_placeholder(field: &str, rejection_list: &[String]) -> bool {
    let norm = |s: &str| s.trim().trim_end_matches('.').trim().to_lowercase();
    let value = norm(field);
    value.is_empty() || rejection_list.iter().any(|r| norm(r) == value)
}

/// Drops pairs with an empty field or a field equal to a rejection entry
/// (case-insensitive, ignoring a trailing period).
pub fn clean_pairs(pairs: Vec<RequirementConfigPair>, rejection_list: &[String]) -> CleanOutcome {
    let total = pairs.len();
    let kept: Vec<_> = pairs
        .into_iter()
        .filter(|p| {
            !is_placeholder(&p.requirement, rejection_list) && !is_placeholder(&p.configuration, rejection_list)
        })
        .collect();
    CleanOutcome {
        removed: total - kept.len(),
        kept,
    }
}

fn question_prefix_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\**\s*question\s*\**\s*:\s*").expect("valid regex"))
}

/// First non-empty line of a rephrasing response, without a `Question:` label
/// or wrapping quotes, ending in '?'. None when nothing usable remains.
pub fn parse_question_response(text: &str) -> Option<String> {
    let line = text.lines().map(str::trim).find(|l| !l.is_empty())?;
    let line = question_prefix_re().replace(line, "");
    let line = line.trim().trim_matches(|c| c == '"' || c == '\'' || c == '`').trim();
    if line.is_empty() || line == "?" {
        return None;
    }
    Some(if line.ends_with('?') {
        line.to_string()
    } else {
        format!("{}?", line.trim_end_matches(['.', '!', ':']))
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefineOutcome {
    pub questions: Vec<QuestionConfigPair>,
    /// Input positions whose rephrasing failed on every attempt.
    pub dropped: Vec<usize>,
}

fn rephrase<B: Backend + ?Sized>(
    pair: &RequirementConfigPair,
    backend: &B,
    templates: &PromptTemplates,
    opts: &DatasetOptions,
) -> Option<String> {
    let messages = templates.build_question_prompt(&pair.requirement).ok()?;
    let req = request(opts, messages);
    for attempt in 0..=opts.rephrase_retries {
        match backend.complete(&req) {
            Ok(r) => match parse_question_response(&r.text) {
                Some(q) => return Some(q),
                None => log::warn!("rephrase attempt {}: empty response", attempt + 1),
            },
            Err(e) => log::warn!("rephrase attempt {}: {e}", attempt + 1),
        }
    }
    None
}

/// Rewrites each requirement as a question, leaving configurations untouched.
/// Runs on the options' worker pool; output keeps input order.
pub fn refine_to_questions<B: Backend + ?Sized>(
    pairs: &[RequirementConfigPair],
    backend: &B,
    templates: &PromptTemplates,
    opts: &DatasetOptions,
) -> RefineOutcome {
    let results = opts.map_ordered(pairs, |p| rephrase(p, backend, templates, opts));
    let mut outcome = RefineOutcome {
        questions: Vec::with_capacity(pairs.len()),
        dropped: Vec::new(),
    };
    for (i, (pair, q)) in pairs.iter().zip(results).enumerate() {
        match q {
            Some(question) => outcome.questions.push(QuestionConfigPair {
                question,
                configuration: pair.configuration.clone(),
                provenance: pair.provenance,
            }),
            None => outcome.dropped.push(i),
        }
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{Matcher, MockBackend};

    const OSPF_REQ: &str = "Enable OSPF routing on all interfaces";
    const OSPF_CFG: &str = "router ospf 1\nnetwork 192.168.1.0 0.0.0.255 area 0";

    fn rejection() -> Vec<String> {
        DEFAULT_REJECTION_LIST.iter().map(|s| s.to_string()).collect()
    }

    fn chunk(text: &str) -> Chunk {
        Chunk {
            source_page: 3,
            ordinal: 1,
            offset: 0,
            text: text.into(),
        }
    }

    #[test]
    fn enhance_parses_the_ospf_pair() {
        let mock = MockBackend::new("nothing useful");
        mock.register(
            Matcher::user_contains("OSPF"),
            format!("requirement: {OSPF_REQ}\nconfiguration:\n{OSPF_CFG}"),
        )
        .unwrap();
        let pairs = enhance_chunk(
            &chunk("To enable OSPF on all interfaces use router ospf and a network statement."),
            &mock,
            &PromptTemplates::default(),
            &DatasetOptions::default(),
        )
        .unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].requirement, OSPF_REQ);
        assert_eq!(pairs[0].configuration, OSPF_CFG);
        assert_eq!(pairs[0].provenance, Some(Provenance { page: 3, chunk: 1 }));
    }

    #[test]
    fn unlabelled_response_gives_no_pairs() {
        let mock = MockBackend::new("I could not find anything.");
        let pairs = enhance_chunk(
            &chunk("x"),
            &mock,
            &PromptTemplates::default(),
            &DatasetOptions::default(),
        )
        .unwrap();
        assert!(pairs.is_empty());
    }

    #[test]
    fn two_pairs_in_order_with_variants() {
        let text = "Here you go\n1. **Requirement:** Enable OSPF\nrouting everywhere\n**Configuration:** router ospf 1\n\
                    network 10.0.0.0 0.0.0.255 area 0\n\n2. Requirement: Set the hostname\nConfiguration:\n```\nhostname R1\n```";
        let pairs = parse_enhancement_response(text);
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].requirement, "Enable OSPF routing everywhere");
        assert_eq!(
            pairs[0].configuration,
            "router ospf 1\nnetwork 10.0.0.0 0.0.0.255 area 0"
        );
        assert_eq!(pairs[1].requirement, "Set the hostname");
        assert_eq!(pairs[1].configuration, "hostname R1");
    }

    #[test]
    fn table_style_steps_are_kept_as_configuration() {
        let text = "requirement: Configure a port for Link Fault RFI Support.\n\
                    configuration: 1. Enable\n2. Configure terminal\n3. Interface type number";
        let pairs = parse_enhancement_response(text);
        assert_eq!(
            pairs[0].configuration,
            "1. Enable\n2. Configure terminal\n3. Interface type number"
        );
    }

    #[test]
    fn cleaning_drops_placeholders_and_empties() {
        let pairs = vec![
            RequirementConfigPair::new(OSPF_REQ, OSPF_CFG),
            RequirementConfigPair::new("Set the MTU", "N/A"),
            RequirementConfigPair::new("none specified in this text.", "mtu 1500"),
            RequirementConfigPair::new("  ", "mtu 1500"),
            RequirementConfigPair::new("Set the MTU", "mtu 9000"),
        ];
        let out = clean_pairs(pairs.clone(), &rejection());
        assert_eq!(out.removed, 3);
        assert_eq!(out.kept, vec![pairs[0].clone(), pairs[4].clone()]);
    }

    #[test]
    fn refine_appends_question_mark_and_keeps_config() {
        let mock = MockBackend::new("How do I enable OSPF routing on all interfaces");
        let pairs = vec![RequirementConfigPair::new(OSPF_REQ, OSPF_CFG)];
        let out = refine_to_questions(&pairs, &mock, &PromptTemplates::default(), &DatasetOptions::default());
        assert_eq!(out.questions.len(), 1);
        assert_eq!(
            out.questions[0].question,
            "How do I enable OSPF routing on all interfaces?"
        );
        assert_eq!(out.questions[0].configuration, OSPF_CFG);
    }

    #[test]
    fn refine_retries_once_then_drops() {
        let mock = MockBackend::new("Question: How do I set the MTU?");
        mock.register_failure(Matcher::user_contains("BROKEN"), "boom").unwrap();
        let pairs = vec![
            RequirementConfigPair::new("Set the MTU", "mtu 9000"),
            RequirementConfigPair::new("BROKEN requirement", "mtu 1500"),
        ];
        let out = refine_to_questions(&pairs, &mock, &PromptTemplates::default(), &DatasetOptions::default());
        assert_eq!(out.questions.len(), 1);
        assert_eq!(out.questions[0].question, "How do I set the MTU?");
        assert_eq!(out.dropped, vec![1]);
        assert_eq!(mock.call_count(), 3);
    }

    #[test]
    fn question_parsing() {
        assert_eq!(parse_question_response("\n\"How?\"").as_deref(), Some("How?"));
        assert_eq!(parse_question_response("Do it.").as_deref(), Some("Do it?"));
        assert_eq!(parse_question_response("   "), None);
    }
}
