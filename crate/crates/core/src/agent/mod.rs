// SPDX-License-Identifier: Apache-2.0

//! Orchestration: classify, plan, then generate and verify with refinement
//! until the verifier approves or the iteration cap is hit.

mod log;
mod repo;
mod requirements;

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::backend::{Backend, CompletionRequest};
use crate::prompts::{
    parse_classifier_response, parse_steps_response, PromptError, PromptTemplates, StepsPlan, DEFAULT_LABELS,
};
use crate::text::ProseFilter;
use crate::types::{ChatMessage, GeneratedConfiguration, Intent, IntentKind};
use crate::verifier::{verify_config, CommandGrammar, VerificationReport};

pub use log::{log_result, LogError, ResultLog};
pub use repo::{store_config, ConfigRepo, RepoEntry, RepoError, RepoMeta};
pub use requirements::{load_requirements, parse_requirements, LoadError};

pub const DEFAULT_MAX_ITERATIONS: u32 = 3;
pub const DEFAULT_LABEL: &str = "device-setup";
pub const DEFAULT_MODEL: &str = "netconfig";

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub model_name: String,
    pub labels: Vec<String>,
    /// Used when the classifier answers with something outside `labels`.
    pub default_label: String,
    pub max_iterations: u32,
    pub temperature: f64,
    pub max_tokens: u32,
    pub prose_filter: ProseFilter,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            model_name: DEFAULT_MODEL.to_string(),
            labels: DEFAULT_LABELS.iter().map(|s| s.to_string()).collect(),
            default_label: DEFAULT_LABEL.to_string(),
            max_iterations: DEFAULT_MAX_ITERATIONS,
            temperature: CompletionRequest::DEFAULT_TEMPERATURE,
            max_tokens: CompletionRequest::DEFAULT_MAX_TOKENS,
            prose_filter: ProseFilter::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Approved,
    Exhausted,
    Failed,
}

impl fmt::Display for SessionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SessionStatus::Approved => "approved",
            SessionStatus::Exhausted => "exhausted",
            SessionStatus::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Classify,
    Plan,
    Generate,
    Refine,
}

/// One model call made during a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub stage: Stage,
    /// Generation attempt number; 0 for classify and plan.
    pub iteration: u32,
    pub request_id: Option<String>,
    pub messages: Vec<ChatMessage>,
    pub response: Option<String>,
    pub error: Option<String>,
    pub report: Option<VerificationReport>,
    pub latency_secs: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    /// Classify and plan calls.
    pub translation_secs: f64,
    /// Generate and refine calls.
    pub configuration_secs: f64,
}

impl Timings {
    pub fn total_secs(&self) -> f64 {
        self.translation_secs + self.configuration_secs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub intent_id: String,
    pub status: SessionStatus,
    /// Generation attempts made; 0 only when the session failed before the
    /// first one.
    pub iterations_used: u32,
    pub final_config: Option<GeneratedConfiguration>,
    pub final_report: Option<VerificationReport>,
    pub classification: Option<IntentKind>,
    pub plan: Option<StepsPlan>,
    pub timings: Timings,
    pub started_at: DateTime<Utc>,
    pub error: Option<String>,
    pub warnings: Vec<String>,
    pub trace: Vec<TraceEntry>,
}

impl SessionResult {
    pub fn is_approved(&self) -> bool {
        self.status == SessionStatus::Approved
    }
}

/// Anything that turns an intent into a session result.
pub trait SessionRunner: Send + Sync {
    fn run(&self, intent: &Intent) -> SessionResult;
}

pub struct Agent<B> {
    backend: B,
    grammar: Arc<CommandGrammar>,
    templates: Arc<PromptTemplates>,
    config: AgentConfig,
}

impl<B: Backend> Agent<B> {
    pub fn new(backend: B, grammar: Arc<CommandGrammar>, templates: Arc<PromptTemplates>, config: AgentConfig) -> Self {
        Self {
            backend,
            grammar,
            templates,
            config,
        }
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn grammar(&self) -> &CommandGrammar {
        &self.grammar
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn run_session(&self, intent: &Intent) -> SessionResult {
        Session::new(self, intent).run()
    }
}

impl<B: Backend> SessionRunner for Agent<B> {
    fn run(&self, intent: &Intent) -> SessionResult {
        self.run_session(intent)
    }
}

struct Session<'a, B> {
    agent: &'a Agent<B>,
    intent: &'a Intent,
    result: SessionResult,
}

/// Outcome of a single model call: the response text, or the session is over.
type CallOutcome = Result<String, ()>;

impl<'a, B: Backend> Session<'a, B> {
    fn new(agent: &'a Agent<B>, intent: &'a Intent) -> Self {
        Self {
            agent,
            intent,
            result: SessionResult {
                intent_id: intent.id.clone(),
                status: SessionStatus::Failed,
                iterations_used: 0,
                final_config: None,
                final_report: None,
                classification: None,
                plan: None,
                timings: Timings::default(),
                started_at: Utc::now(),
                error: None,
                warnings: Vec::new(),
                trace: Vec::new(),
            },
        }
    }

    fn run(mut self) -> SessionResult {
        let _ = self.drive();
        self.result
    }

    fn fail(&mut self, message: String) {
        ::log::warn!("session {}: {message}", self.intent.id);
        self.result.status = SessionStatus::Failed;
        self.result.error = Some(message);
    }

    fn warn(&mut self, message: String) {
        ::log::warn!("session {}: {message}", self.intent.id);
        self.result.warnings.push(message);
    }

    fn prompt(&mut self, built: Result<Vec<ChatMessage>, PromptError>) -> Result<Vec<ChatMessage>, ()> {
        built.map_err(|e| self.fail(format!("building prompt: {e}")))
    }

    fn call(&mut self, stage: Stage, iteration: u32, messages: Vec<ChatMessage>) -> CallOutcome {
        let cfg = &self.agent.config;
        let request = CompletionRequest {
            model_name: cfg.model_name.clone(),
            messages: messages.clone(),
            temperature: cfg.temperature,
            max_tokens: cfg.max_tokens,
        };
        let outcome = self.agent.backend.complete(&request);
        let (latency, entry) = match &outcome {
            Ok(r) => (
                r.latency,
                TraceEntry {
                    stage,
                    iteration,
                    request_id: Some(r.request_id.clone()),
                    messages,
                    response: Some(r.text.clone()),
                    error: None,
                    report: None,
                    latency_secs: r.latency.as_secs_f64(),
                },
            ),
            Err(e) => (
                Duration::ZERO,
                TraceEntry {
                    stage,
                    iteration,
                    request_id: e.request_id().map(str::to_string),
                    messages,
                    response: None,
                    error: Some(e.to_string()),
                    report: None,
                    latency_secs: 0.0,
                },
            ),
        };
        match stage {
            Stage::Classify | Stage::Plan => self.result.timings.translation_secs += latency.as_secs_f64(),
            Stage::Generate | Stage::Refine => self.result.timings.configuration_secs += latency.as_secs_f64(),
        }
        self.result.trace.push(entry);
        match outcome {
            Ok(r) => Ok(r.text),
            Err(e) => {
                self.fail(format!("{stage:?} call failed: {e}").to_lowercase());
                Err(())
            }
        }
    }

    fn drive(&mut self) -> Result<(), ()> {
        let agent = self.agent;
        let templates = &agent.templates;
        let cfg = &agent.config;
        if cfg.max_iterations == 0 {
            self.fail("max_iterations must be at least 1".into());
            return Err(());
        }

        let messages = self.prompt(templates.build_classifier_prompt(self.intent, &cfg.labels))?;
        let response = self.call(Stage::Classify, 0, messages)?;
        let kind = match parse_classifier_response(&response, &cfg.labels) {
            Ok(kind) => kind,
            Err(e) => {
                self.warn(format!("{e}; using `{}`", cfg.default_label));
                IntentKind(cfg.default_label.clone())
            }
        };
        self.result.classification = Some(kind.clone());

        let messages = self.prompt(templates.build_steps_prompt(self.intent, &kind))?;
        let response = self.call(Stage::Plan, 0, messages)?;
        let plan = match parse_steps_response(&response) {
            Ok(plan) => plan,
            Err(e) => {
                self.warn(format!("{e}; planning with the intent text as a single step"));
                StepsPlan::new([self.intent.text.as_str()]).map_err(|_| ())?
            }
        };
        self.result.plan = Some(plan.clone());

        for iteration in 1..=cfg.max_iterations {
            let (stage, built) = match (&self.result.final_config, &self.result.final_report) {
                (Some(prev), Some(report)) => (
                    Stage::Refine,
                    templates.build_refinement_prompt(self.intent, prev, report),
                ),
                _ => (Stage::Generate, templates.build_config_prompt(self.intent, &plan)),
            };
            let messages = self.prompt(built)?;
            self.result.iterations_used = iteration;
            let response = self.call(stage, iteration, messages)?;

            let config = GeneratedConfiguration::from_model_output(&self.intent.id, response, &cfg.prose_filter);
            let report = verify_config(&config, &agent.grammar).unwrap_or_else(|_| VerificationReport::empty_output());
            if let Some(entry) = self.result.trace.last_mut() {
                entry.report = Some(report.clone());
            }
            let approved = report.approved;
            self.result.final_config = Some(config);
            self.result.final_report = Some(report);
            if approved {
                self.result.status = SessionStatus::Approved;
                return Ok(());
            }
        }
        self.result.status = SessionStatus::Exhausted;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{Matcher, MockBackend};
    use crate::types::{IntentForm, Role};

    pub(crate) const LINK_FAULT: &str = "Configure a port for Link Fault RFI Support by putting it \
        into a blocking state when an OAM PDU control request packet is received with the Link \
        Fault Status flag set.";
    pub(crate) const LINK_FAULT_CONFIG: &str = "enable\nconfigure terminal\ninterface GigabitEthernet0/1\n\
        ethernet oam remote-failure link-fault action error-block-interface";

    fn agent(mock: MockBackend, max_iterations: u32) -> Agent<MockBackend> {
        Agent::new(
            mock,
            Arc::new(CommandGrammar::default()),
            Arc::new(PromptTemplates::default()),
            AgentConfig {
                max_iterations,
                ..AgentConfig::default()
            },
        )
    }

    fn scripted(extra: &[(Matcher, &str)]) -> MockBackend {
        let mock = MockBackend::new("enable\nfrobnicate everything");
        mock.register(Matcher::Call(1), "device-setup").unwrap();
        mock.register(
            Matcher::Call(2),
            "1. Enable\n2. Configure terminal\n3. Interface type number",
        )
        .unwrap();
        for (m, r) in extra {
            mock.register(m.clone(), *r).unwrap();
        }
        mock
    }

    fn intent() -> Intent {
        Intent::new("r1", LINK_FAULT, IntentForm::Requirement).unwrap()
    }

    #[test]
    fn first_try_valid_is_approved_in_one_iteration() {
        let a = agent(scripted(&[(Matcher::Call(3), LINK_FAULT_CONFIG)]), 3);
        let r = a.run_session(&intent());
        assert_eq!(r.status, SessionStatus::Approved);
        assert_eq!(r.iterations_used, 1);
        assert!(r.final_report.as_ref().unwrap().approved);
        assert_eq!(r.classification.unwrap().as_str(), "device-setup");
        assert_eq!(r.plan.unwrap().steps.len(), 3);
        assert_eq!(a.backend().call_count(), 3);
        assert_eq!(r.trace.len(), 3);
    }

    #[test]
    fn refinement_embeds_previous_finding() {
        let a = agent(
            scripted(&[
                (Matcher::Call(3), "enable\nconfigure terminal\nfrobnicate the port"),
                (Matcher::Call(4), LINK_FAULT_CONFIG),
            ]),
            3,
        );
        let r = a.run_session(&intent());
        assert_eq!(r.status, SessionStatus::Approved);
        assert_eq!(r.iterations_used, 2);
        let first = r.trace[2].report.as_ref().unwrap();
        let refine = &a.backend().requests()[3];
        let user = refine.content_of(Role::User);
        assert!(!first.findings.is_empty());
        assert!(first.findings.iter().any(|f| user.contains(&f.suggestion)));
        assert_eq!(r.trace[3].stage, Stage::Refine);
    }

    #[test]
    fn always_invalid_exhausts_at_cap() {
        let a = agent(scripted(&[]), 3);
        let r = a.run_session(&intent());
        assert_eq!(r.status, SessionStatus::Exhausted);
        assert_eq!(r.iterations_used, 3);
        assert_eq!(a.backend().call_count(), 5);
        assert!(!r.final_report.unwrap().approved);
    }

    #[test]
    fn unknown_label_falls_back_with_warning() {
        let mock = MockBackend::new(LINK_FAULT_CONFIG);
        mock.register(Matcher::Call(1), "I think it's ACL").unwrap();
        mock.register(Matcher::Call(2), "1. Enable").unwrap();
        let r = agent(mock, 3).run_session(&intent());
        assert_eq!(r.classification.unwrap().as_str(), DEFAULT_LABEL);
        assert_eq!(r.warnings.len(), 1);
        assert_eq!(r.status, SessionStatus::Approved);
    }

    #[test]
    fn backend_failure_is_a_failed_status() {
        let mock = scripted(&[]);
        mock.register_failure(Matcher::Call(3), "connection reset").unwrap();
        let r = agent(mock, 3).run_session(&intent());
        assert_eq!(r.status, SessionStatus::Failed);
        assert_eq!(r.iterations_used, 1);
        assert!(r.error.unwrap().contains("connection reset"));
        assert!(r.final_config.is_none());
    }

    #[test]
    fn timings_split_by_stage() {
        let mock = scripted(&[(Matcher::Call(3), LINK_FAULT_CONFIG)]).with_latency(Duration::from_millis(250));
        let r = agent(mock, 3).run_session(&intent());
        assert!((r.timings.translation_secs - 0.5).abs() < 1e-9);
        assert!((r.timings.configuration_secs - 0.25).abs() < 1e-9);
    }

    #[test]
    fn empty_output_counts_as_rejection() {
        let a = agent(scripted(&[(Matcher::Call(3), "```\n```")]), 1);
        let r = a.run_session(&intent());
        assert_eq!(r.status, SessionStatus::Exhausted);
        assert_eq!(r.final_report.unwrap().syntax_score, crate::verifier::Score::Invalid);
    }
}
