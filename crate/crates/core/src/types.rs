// SPDX-License-Identifier: Apache-2.0

//! Domain types shared across the agent, verifier, dataset and metrics modules.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TypeError {
    #[error("intent text is empty")]
    EmptyIntentText,
    #[error("message content is empty")]
    EmptyContent,
    #[error("unknown intent form `{0}` (expected `requirement` or `question`)")]
    UnknownForm(String),
    #[error("unknown role `{0}`")]
    UnknownRole(String),
}

/// Whether an intent is phrased as a requirement or as a question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntentForm {
    Requirement,
    Question,
}

impl FromStr for IntentForm {
    type Err = TypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "requirement" => Ok(Self::Requirement),
            "question" => Ok(Self::Question),
            other => Err(TypeError::UnknownForm(other.to_string())),
        }
    }
}

/// A natural-language configuration request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intent {
    pub id: String,
    pub text: String,
    pub form: IntentForm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
}

impl Intent {
    pub fn new(id: impl Into<String>, text: impl Into<String>, form: IntentForm) -> Result<Self, TypeError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(TypeError::EmptyIntentText);
        }
        Ok(Self {
            id: id.into(),
            text,
            form,
            context: None,
        })
    }

    pub fn with_context(mut self, context: impl Into<String>) -> Self {
        let context = context.into();
        self.context = if context.trim().is_empty() { None } else { Some(context) };
        self
    }

    /// Context text if present and not blank.
    pub fn context(&self) -> Option<&str> {
        self.context.as_deref().filter(|c| !c.trim().is_empty())
    }
}

/// Classification label for an intent, drawn from the classifier's label set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntentKind(pub String);

impl IntentKind {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for IntentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    Assistant,
    User,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::Assistant => "assistant",
            Role::User => "user",
        }
    }
}

impl FromStr for Role {
    type Err = TypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "system" => Ok(Role::System),
            "assistant" => Ok(Role::Assistant),
            "user" => Ok(Role::User),
            other => Err(TypeError::UnknownRole(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Result<Self, TypeError> {
        let content = content.into();
        if content.trim().is_empty() {
            return Err(TypeError::EmptyContent);
        }
        Ok(Self { role, content })
    }
}

/// One line of device configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigLine {
    pub raw: String,
    pub index: usize,
}

impl ConfigLine {
    /// Builds a line, replacing any embedded line breaks with spaces.
    pub fn new(raw: &str, index: usize) -> Self {
        let raw = if raw.contains(['\n', '\r']) {
            raw.replace(['\n', '\r'], " ")
        } else {
            raw.to_string()
        };
        Self { raw, index }
    }
}

/// The configuration lines destined for one device.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceBlock {
    pub device_ordinal: usize,
    pub lines: Vec<ConfigLine>,
}

impl DeviceBlock {
    pub fn from_lines<I, S>(device_ordinal: usize, lines: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let lines = lines
            .into_iter()
            .enumerate()
            .map(|(i, l)| ConfigLine::new(l.as_ref(), i))
            .collect();
        Self { device_ordinal, lines }
    }

    pub fn text(&self) -> String {
        self.lines.iter().map(|l| l.raw.as_str()).collect::<Vec<_>>().join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedConfiguration {
    pub source_intent_id: String,
    pub raw_text: String,
    pub blocks: Vec<DeviceBlock>,
}

impl GeneratedConfiguration {
    /// Parses model output: non-command text is stripped, then the text is split
    /// into device blocks.
    pub fn from_model_output(
        source_intent_id: impl Into<String>,
        raw_text: impl Into<String>,
        prose: &crate::text::ProseFilter,
    ) -> Self {
        let raw_text = raw_text.into();
        let blocks = crate::text::split_device_blocks(&prose.strip(&raw_text));
        Self {
            source_intent_id: source_intent_id.into(),
            raw_text,
            blocks,
        }
    }

    /// Builds a configuration from already-clean command text.
    pub fn from_text(source_intent_id: impl Into<String>, raw_text: impl Into<String>) -> Self {
        let raw_text = raw_text.into();
        let blocks = crate::text::split_device_blocks(&raw_text);
        Self {
            source_intent_id: source_intent_id.into(),
            raw_text,
            blocks,
        }
    }

    pub fn lines(&self) -> impl Iterator<Item = &ConfigLine> {
        self.blocks.iter().flat_map(|b| b.lines.iter())
    }

    pub fn line_count(&self) -> usize {
        self.blocks.iter().map(|b| b.lines.len()).sum()
    }

    /// Normalized command text: blocks joined by the device delimiter.
    pub fn command_text(&self) -> String {
        crate::text::join_device_blocks(&self.blocks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intent_rejects_blank_text() {
        assert_eq!(
            Intent::new("a", "   \n", IntentForm::Requirement),
            Err(TypeError::EmptyIntentText)
        );
    }

    #[test]
    fn blank_context_is_dropped() {
        let intent = Intent::new("a", "x", IntentForm::Question).unwrap().with_context("  ");
        assert_eq!(intent.context(), None);
    }

    #[test]
    fn form_parses_case_insensitively() {
        assert_eq!("Question".parse::<IntentForm>(), Ok(IntentForm::Question));
        assert!("statement".parse::<IntentForm>().is_err());
    }

    #[test]
    fn config_line_never_holds_newlines() {
        let line = ConfigLine::new("a\nb\r\nc", 0);
        assert!(!line.raw.contains('\n'));
        assert!(!line.raw.contains('\r'));
    }

    #[test]
    fn message_requires_content() {
        assert!(ChatMessage::new(Role::User, "").is_err());
    }
}
