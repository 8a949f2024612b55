// SPDX-License-Identifier: Apache-2.0

//! Prompt construction for the classifier, planner, generator and refinement
//! calls, plus parsers for the classifier and planner responses.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{ChatMessage, GeneratedConfiguration, Intent, IntentKind, Role};
use crate::verifier::{Finding, VerificationReport};

pub const DEFAULT_TEMPLATES: &str = include_str!("../../data/templates.toml");

pub const DEFAULT_LABELS: &[&str] = &[
    "device-setup",
    "routing",
    "acl",
    "monitoring",
    "tunneling",
    "admission-control",
];

/// Placeholder names a template may reference.
pub const PLACEHOLDERS: &[&str] = &[
    "intent",
    "context",
    "kind",
    "labels",
    "steps",
    "previous_config",
    "feedback",
    "chunk",
    "requirement",
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("label set is empty")]
    EmptyLabelSet,
    #[error("label `{0}` appears more than once")]
    DuplicateLabel(String),
    #[error("response does not start with a known label: `{line}`")]
    UnknownLabel { line: String },
    #[error("response contains no list of steps")]
    NoStepsFound,
    #[error("refusing to refine an approved configuration")]
    RefinementOfApproved,
    #[error("rendered {template} prompt has an empty {} message", role.as_str())]
    EmptyMessage { template: TemplateName, role: Role },
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("reading template file: {0}")]
    Io(#[from] std::io::Error),
    #[error("template file is not valid: {0}")]
    Parse(String),
    #[error("template `{0}` is not a known template name")]
    UnknownTemplate(String),
    #[error("template `{template}` uses unknown placeholder `{{{placeholder}}}`")]
    UnknownPlaceholder {
        template: TemplateName,
        placeholder: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateName {
    Classifier,
    Steps,
    ConfigGenerator,
    Refinement,
    Enhancement,
    Question,
}

impl TemplateName {
    pub const ALL: [TemplateName; 6] = [
        TemplateName::Classifier,
        TemplateName::Steps,
        TemplateName::ConfigGenerator,
        TemplateName::Refinement,
        TemplateName::Enhancement,
        TemplateName::Question,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateName::Classifier => "classifier",
            TemplateName::Steps => "steps",
            TemplateName::ConfigGenerator => "config_generator",
            TemplateName::Refinement => "refinement",
            TemplateName::Enhancement => "enhancement",
            TemplateName::Question => "question",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|n| n.as_str() == s)
    }
}

impl fmt::Display for TemplateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    #[serde(skip, default = "default_name")]
    pub name: TemplateName,
    #[serde(rename = "system")]
    pub system_text: String,
    #[serde(rename = "assistant")]
    pub assistant_text: String,
    #[serde(rename = "user")]
    pub user_template: String,
}

fn default_name() -> TemplateName {
    TemplateName::Classifier
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([A-Za-z_][A-Za-z0-9_]*)\}").expect("valid regex"))
}

fn blank_run_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\n[ \t]*(\n[ \t]*)+\n").expect("valid regex"))
}

impl PromptTemplate {
    /// Placeholder names referenced by any of the three texts.
    pub fn placeholders(&self) -> Vec<String> {
        let mut names: Vec<String> = [&self.system_text, &self.assistant_text, &self.user_template]
            .into_iter()
            .flat_map(|t| placeholder_re().captures_iter(t).map(|c| c[1].to_string()))
            .collect();
        names.sort();
        names.dedup();
        names
    }

    fn validate(&self) -> Result<(), TemplateError> {
        match self
            .placeholders()
            .into_iter()
            .find(|p| !PLACEHOLDERS.contains(&p.as_str()))
        {
            Some(placeholder) => Err(TemplateError::UnknownPlaceholder {
                template: self.name,
                placeholder,
            }),
            None => Ok(()),
        }
    }

    /// Renders the three messages. Placeholders without a value render empty;
    /// runs of blank lines left behind collapse to one.
    pub fn render(&self, values: &[(&str, &str)]) -> Result<Vec<ChatMessage>, PromptError> {
        let fill = |text: &str| {
            let replaced = placeholder_re().replace_all(text, |c: &regex::Captures<'_>| {
                values
                    .iter()
                    .find(|(k, _)| *k == &c[1])
                    .map(|(_, v)| v.to_string())
                    .unwrap_or_default()
            });
            blank_run_re().replace_all(&replaced, "\n\n").trim().to_string()
        };
        [
            (Role::System, &self.system_text),
            (Role::Assistant, &self.assistant_text),
            (Role::User, &self.user_template),
        ]
        .into_iter()
        .map(|(role, text)| {
            ChatMessage::new(role, fill(text)).map_err(|_| PromptError::EmptyMessage {
                template: self.name,
                role,
            })
        })
        .collect()
    }
}

/// The full template set. Files may override any subset of the defaults.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    templates: BTreeMap<TemplateName, PromptTemplate>,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self::parse_over(BTreeMap::new(), DEFAULT_TEMPLATES).expect("bundled templates are valid")
    }
}

impl PromptTemplates {
    pub fn parse(text: &str) -> Result<Self, TemplateError> {
        Self::parse_over(Self::default().templates, text)
    }

    pub fn load(path: &Path) -> Result<Self, TemplateError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn parse_over(mut base: BTreeMap<TemplateName, PromptTemplate>, text: &str) -> Result<Self, TemplateError> {
        let raw: BTreeMap<String, PromptTemplate> =
            toml::from_str(text).map_err(|e| TemplateError::Parse(e.to_string()))?;
        for (key, mut template) in raw {
            let name = TemplateName::parse(&key).ok_or(TemplateError::UnknownTemplate(key))?;
            template.name = name;
            template.validate()?;
            base.insert(name, template);
        }
        if let Some(missing) = TemplateName::ALL.into_iter().find(|n| !base.contains_key(n)) {
            return Err(TemplateError::Parse(format!("missing template `{missing}`")));
        }
        Ok(Self { templates: base })
    }

    pub fn get(&self, name: TemplateName) -> &PromptTemplate {
        &self.templates[&name]
    }

    pub fn build_classifier_prompt(&self, intent: &Intent, labels: &[String]) -> Result<Vec<ChatMessage>, PromptError> {
        check_labels(labels)?;
        self.get(TemplateName::Classifier).render(&[
            ("intent", &intent.text),
            ("context", &context_section(intent)),
            ("labels", &labels.join(", ")),
        ])
    }

    pub fn build_steps_prompt(&self, intent: &Intent, kind: &IntentKind) -> Result<Vec<ChatMessage>, PromptError> {
        self.get(TemplateName::Steps).render(&[
            ("intent", &intent.text),
            ("context", &context_section(intent)),
            ("kind", kind.as_str()),
        ])
    }

    pub fn build_config_prompt(&self, intent: &Intent, plan: &StepsPlan) -> Result<Vec<ChatMessage>, PromptError> {
        self.get(TemplateName::ConfigGenerator).render(&[
            ("intent", &intent.text),
            ("context", &context_section(intent)),
            ("steps", &plan.numbered()),
        ])
    }

    pub fn build_refinement_prompt(
        &self,
        intent: &Intent,
        previous: &GeneratedConfiguration,
        report: &VerificationReport,
    ) -> Result<Vec<ChatMessage>, PromptError> {
        if report.approved {
            return Err(PromptError::RefinementOfApproved);
        }
        let previous_text = match previous.command_text() {
            t if t.trim().is_empty() => "(no configuration commands)".to_string(),
            t => t,
        };
        self.get(TemplateName::Refinement).render(&[
            ("intent", &intent.text),
            ("context", &context_section(intent)),
            ("previous_config", &previous_text),
            ("feedback", &render_feedback(&report.findings)),
        ])
    }

    pub fn build_enhancement_prompt(&self, chunk: &str) -> Result<Vec<ChatMessage>, PromptError> {
        self.get(TemplateName::Enhancement).render(&[("chunk", chunk)])
    }

    pub fn build_question_prompt(&self, requirement: &str) -> Result<Vec<ChatMessage>, PromptError> {
        self.get(TemplateName::Question).render(&[("requirement", requirement)])
    }
}

fn check_labels(labels: &[String]) -> Result<(), PromptError> {
    if labels.is_empty() {
        return Err(PromptError::EmptyLabelSet);
    }
    let mut seen = HashSet::new();
    for label in labels {
        if !seen.insert(label.trim().to_ascii_lowercase()) {
            return Err(PromptError::DuplicateLabel(label.clone()));
        }
    }
    Ok(())
}

fn context_section(intent: &Intent) -> String {
    intent
        .context()
        .map(|c| format!("\nNetwork context:\n{}\n", c.trim()))
        .unwrap_or_default()
}

/// Findings ordered by severity, then block and line.
fn render_feedback(findings: &[Finding]) -> String {
    let mut sorted: Vec<&Finding> = findings.iter().collect();
    sorted.sort_by_key(|f| (f.severity, f.block, f.line));
    if sorted.is_empty() {
        return "(the verifier reported no details)".to_string();
    }
    sorted
        .iter()
        .enumerate()
        .map(|(i, f)| {
            format!(
                "{}. [{} {}] device {}, line {}: {}\n   Fix: {}",
                i + 1,
                f.severity,
                f.kind,
                f.block + 1,
                f.line + 1,
                f.message,
                f.suggestion
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Returns the label the response's first non-empty line names.
pub fn parse_classifier_response(text: &str, labels: &[String]) -> Result<IntentKind, PromptError> {
    let line = text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    labels
        .iter()
        .find(|l| l.trim().eq_ignore_ascii_case(line))
        .map(|l| IntentKind(l.trim().to_string()))
        .ok_or_else(|| PromptError::UnknownLabel { line: line.to_string() })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepsPlan {
    pub steps: Vec<String>,
}

impl StepsPlan {
    pub fn new<I, S>(steps: I) -> Result<Self, PromptError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let steps: Vec<String> = steps
            .into_iter()
            .map(|s| s.into().trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        if steps.is_empty() {
            return Err(PromptError::NoStepsFound);
        }
        Ok(Self { steps })
    }

    pub fn numbered(&self) -> String {
        self.steps
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{}. {s}", i + 1))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn step_marker_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(?:\d+[.)]|[-*\u{2022}])(?:\s+|$)").expect("valid regex"))
}

/// Lines starting with `1.`, `2)`, `-`, `*` or a bullet open a step; other
/// non-blank lines continue the previous step. Text before the first marker
/// is ignored.
pub fn parse_steps_response(text: &str) -> Result<StepsPlan, PromptError> {
    let mut steps: Vec<String> = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if let Some(m) = step_marker_re().find(line) {
            steps.push(line[m.end()..].trim().to_string());
        } else if let Some(last) = steps.last_mut() {
            if !last.is_empty() {
                last.push(' ');
            }
            last.push_str(line);
        }
    }
    StepsPlan::new(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::DEVICE_DELIMITER;
    use crate::types::IntentForm;
    use crate::verifier::{FindingKind, Score, Severity};
    use proptest::prelude::*;

    const LINK_FAULT: &str = "Configure a port for Link Fault RFI Support by putting it into a \
        blocking state when an OAM PDU control request packet is received with the Link Fault \
        Status flag set.";
    const SLA_QUESTION: &str = "How can we ensure a network with a broader reach and an accurate \
        representation of end-user experience while maintaining ease of deployment?";

    fn labels(ls: &[&str]) -> Vec<String> {
        ls.iter().map(|s| s.to_string()).collect()
    }

    fn roles(msgs: &[ChatMessage]) -> Vec<Role> {
        msgs.iter().map(|m| m.role).collect()
    }

    fn intent(text: &str) -> Intent {
        Intent::new("i1", text, IntentForm::Requirement).unwrap()
    }

    fn finding(kind: FindingKind, severity: Severity, line: usize, suggestion: &str) -> Finding {
        Finding {
            kind,
            severity,
            block: 0,
            line,
            message: format!("{kind} problem"),
            suggestion: suggestion.into(),
        }
    }

    fn rejected(findings: Vec<Finding>) -> VerificationReport {
        VerificationReport {
            approved: false,
            syntax_score: Score::Invalid,
            line_verdicts: Vec::new(),
            findings,
        }
    }

    #[test]
    fn classifier_prompt_shape() {
        let t = PromptTemplates::default();
        let msgs = t
            .build_classifier_prompt(
                &intent("Enable OSPF routing on all interfaces"),
                &labels(&["routing", "acl"]),
            )
            .unwrap();
        assert_eq!(roles(&msgs), vec![Role::System, Role::Assistant, Role::User]);
        assert!(msgs[2].content.contains("routing") && msgs[2].content.contains("acl"));
        assert!(msgs[1].content.contains("first line"));
    }

    #[test]
    fn classifier_rejects_bad_labels() {
        let t = PromptTemplates::default();
        let i = intent("x");
        assert_eq!(t.build_classifier_prompt(&i, &[]), Err(PromptError::EmptyLabelSet));
        assert!(matches!(
            t.build_classifier_prompt(&i, &labels(&["acl", "ACL"])),
            Err(PromptError::DuplicateLabel(_))
        ));
    }

    #[test]
    fn question_text_is_embedded_verbatim() {
        let q = Intent::new("q", SLA_QUESTION, IntentForm::Question).unwrap();
        let msgs = PromptTemplates::default()
            .build_classifier_prompt(&q, &labels(&["monitoring"]))
            .unwrap();
        assert!(msgs[2].content.contains(SLA_QUESTION));
    }

    #[test]
    fn parses_classifier_first_line() {
        let ls = labels(&["device-setup", "routing"]);
        assert_eq!(
            parse_classifier_response("device-setup\nbecause...", &ls)
                .unwrap()
                .as_str(),
            "device-setup"
        );
        assert_eq!(
            parse_classifier_response("\n  Routing \n", &labels(&["routing"]))
                .unwrap()
                .as_str(),
            "routing"
        );
        assert_eq!(
            parse_classifier_response("I think it's ACL", &labels(&["acl"])),
            Err(PromptError::UnknownLabel {
                line: "I think it's ACL".into()
            })
        );
    }

    #[test]
    fn steps_prompt_embeds_intent_and_elides_context() {
        let t = PromptTemplates::default();
        let kind = IntentKind("device-setup".into());
        let bare = t.build_steps_prompt(&intent(LINK_FAULT), &kind).unwrap();
        assert_eq!(roles(&bare), vec![Role::System, Role::Assistant, Role::User]);
        assert!(bare[2].content.contains("Link Fault RFI Support"));
        assert!(!bare[2].content.contains("context"));
        assert!(!bare[2].content.contains("\n\n\n"));

        let with = t
            .build_steps_prompt(&intent(LINK_FAULT).with_context("Gi0/1 faces the access ring"), &kind)
            .unwrap();
        assert!(with[2]
            .content
            .contains("Network context:\nGi0/1 faces the access ring"));
        assert!(with[1].content.contains("numbered list"));
    }

    #[test]
    fn parses_numbered_steps() {
        assert_eq!(
            parse_steps_response("1. Enable\n2. Configure terminal").unwrap().steps,
            vec!["Enable", "Configure terminal"]
        );
        assert_eq!(
            parse_steps_response("- interface type number").unwrap().steps,
            vec!["interface type number"]
        );
        assert_eq!(parse_steps_response("no list here"), Err(PromptError::NoStepsFound));
    }

    #[test]
    fn step_continuations_and_preamble() {
        let text = "Plan below\n1) Enter interface mode\n   for the uplink\n2) ethernet oam\n\n10.0.0.1 is the peer";
        assert_eq!(
            parse_steps_response(text).unwrap().steps,
            vec![
                "Enter interface mode for the uplink",
                "ethernet oam 10.0.0.1 is the peer"
            ]
        );
    }

    #[test]
    fn config_prompt_has_delimiter_and_ordered_plan() {
        let plan = StepsPlan::new(["Enable", "Configure terminal", "Interface type number"]).unwrap();
        let msgs = PromptTemplates::default()
            .build_config_prompt(&intent(LINK_FAULT), &plan)
            .unwrap();
        assert_eq!(roles(&msgs), vec![Role::System, Role::Assistant, Role::User]);
        assert!(msgs[1].content.contains(DEVICE_DELIMITER));
        let user = &msgs[2].content;
        let a = user.find("1. Enable").unwrap();
        let b = user.find("2. Configure terminal").unwrap();
        let c = user.find("3. Interface type number").unwrap();
        assert!(a < b && b < c);
    }

    #[test]
    fn refinement_embeds_findings_by_severity() {
        let t = PromptTemplates::default();
        let prev = GeneratedConfiguration::from_text("i1", "enable\nrouter ospf 1");
        let report = rejected(vec![
            finding(FindingKind::Incomplete, Severity::Low, 0, "complete the syntax line"),
            finding(
                FindingKind::SemanticDependency,
                Severity::High,
                3,
                "declare the sla first",
            ),
        ]);
        let msgs = t.build_refinement_prompt(&intent("x"), &prev, &report).unwrap();
        assert_eq!(roles(&msgs), vec![Role::System, Role::Assistant, Role::User]);
        let user = &msgs[2].content;
        assert!(user.contains("enable\nrouter ospf 1"));
        let sem = user.find("declare the sla first").unwrap();
        let syn = user.find("complete the syntax line").unwrap();
        assert!(sem < syn);

        let mut ok = rejected(Vec::new());
        ok.approved = true;
        assert_eq!(
            t.build_refinement_prompt(&intent("x"), &prev, &ok),
            Err(PromptError::RefinementOfApproved)
        );
    }

    #[test]
    fn template_file_overrides_and_validates() {
        let t =
            PromptTemplates::parse("[classifier]\nsystem = \"S\"\nassistant = \"A\"\nuser = \"{intent} | {labels}\"\n")
                .unwrap();
        let msgs = t.build_classifier_prompt(&intent("go"), &labels(&["acl"])).unwrap();
        assert_eq!(msgs[2].content, "go | acl");
        // untouched templates keep their defaults
        assert_eq!(
            t.get(TemplateName::Steps),
            PromptTemplates::default().get(TemplateName::Steps)
        );

        let err =
            PromptTemplates::parse("[steps]\nsystem = \"S\"\nassistant = \"A\"\nuser = \"{bogus}\"\n").unwrap_err();
        assert!(matches!(err, TemplateError::UnknownPlaceholder { ref placeholder, .. } if placeholder == "bogus"));
        assert!(matches!(
            PromptTemplates::parse("[nope]\nsystem = \"S\"\nassistant = \"A\"\nuser = \"u\"\n"),
            Err(TemplateError::UnknownTemplate(_))
        ));
    }

    #[test]
    fn default_templates_use_declared_placeholders() {
        let t = PromptTemplates::default();
        for name in TemplateName::ALL {
            assert_eq!(t.get(name).name, name);
            for p in t.get(name).placeholders() {
                assert!(PLACEHOLDERS.contains(&p.as_str()), "{name}: {p}");
            }
        }
    }

    proptest! {
        #[test]
        fn building_is_pure(text in "[A-Za-z0-9 ,.]{1,60}", ctx in proptest::option::of("[a-z ]{0,20}")) {
            let t = PromptTemplates::default();
            let mut i = Intent::new("p", format!("x{text}"), IntentForm::Requirement).unwrap();
            if let Some(c) = ctx {
                i = i.with_context(c);
            }
            let ls = labels(DEFAULT_LABELS);
            let a = t.build_classifier_prompt(&i, &ls).unwrap();
            let b = t.build_classifier_prompt(&i, &ls).unwrap();
            prop_assert_eq!(&a, &b);
            let kind = IntentKind("routing".into());
            prop_assert_eq!(
                roles(&t.build_steps_prompt(&i, &kind).unwrap()),
                vec![Role::System, Role::Assistant, Role::User]
            );
        }

        #[test]
        fn classifier_parse_is_total_over_labels(idx in 0usize..6, upper in any::<bool>(), tail in "[a-z .]{0,30}") {
            let ls = labels(DEFAULT_LABELS);
            let label = if upper { ls[idx].to_uppercase() } else { ls[idx].clone() };
            let got = parse_classifier_response(&format!("{label}\n{tail}"), &ls).unwrap();
            prop_assert_eq!(got.as_str(), ls[idx].as_str());
        }
    }
}
