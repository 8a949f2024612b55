// SPDX-License-Identifier: Apache-2.0

//! Structural parsing of model output: device-block splitting and removal of
//! prose that leaks around the commands.

use serde::{Deserialize, Serialize};

use crate::types::DeviceBlock;

/// Line-anchored token separating per-device configuration blocks.
pub const DEVICE_DELIMITER: &str = "~~~";

/// Splits raw configuration text into device blocks.
///
/// A line consisting only of `~~~` (surrounding whitespace ignored) starts a new
/// block. Lines are trimmed, blank lines dropped, and blocks left empty are not
/// emitted. Device ordinals are assigned densely to the surviving blocks.
pub fn split_device_blocks(raw_text: &str) -> Vec<DeviceBlock> {
    let mut groups: Vec<Vec<&str>> = vec![Vec::new()];
    for line in raw_text.lines() {
        let trimmed = line.trim();
        if trimmed == DEVICE_DELIMITER {
            groups.push(Vec::new());
        } else if !trimmed.is_empty() {
            groups.last_mut().expect("non-empty").push(trimmed);
        }
    }
    groups
        .into_iter()
        .filter(|g| !g.is_empty())
        .enumerate()
        .map(|(ordinal, lines)| DeviceBlock::from_lines(ordinal, lines))
        .collect()
}

/// Inverse of [`split_device_blocks`] for already-normalized blocks.
pub fn join_device_blocks(blocks: &[DeviceBlock]) -> String {
    blocks
        .iter()
        .map(DeviceBlock::text)
        .collect::<Vec<_>>()
        .join(&format!("\n{DEVICE_DELIMITER}\n"))
}

/// Line filter that drops code fences and prose lines from model output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProseFilter {
    pub prefixes: Vec<String>,
}

impl Default for ProseFilter {
    fn default() -> Self {
        Self::new(DEFAULT_PROSE_PREFIXES.iter().copied())
    }
}

pub const DEFAULT_PROSE_PREFIXES: &[&str] = &[
    "Here",
    "Sure",
    "Certainly",
    "Okay",
    "This",
    "These",
    "The",
    "Note",
    "Explanation",
    "Below",
    "Above",
    "To",
    "First",
    "Then",
    "Next",
    "Finally",
    "In",
    "You",
    "I",
    "We",
    "Make",
    "Please",
    "#",
    "**",
];

impl ProseFilter {
    pub fn new<I, S>(prefixes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            prefixes: prefixes.into_iter().map(Into::into).collect(),
        }
    }

    /// True when the line is a code fence marker or looks like prose.
    pub fn is_noise(&self, line: &str) -> bool {
        let trimmed = line.trim();
        if trimmed.starts_with("```") {
            return true;
        }
        if trimmed.ends_with(':') {
            return true;
        }
        self.prefixes.iter().any(|p| starts_with_word(trimmed, p))
    }

    /// Removes noise and blank lines, keeping every other line verbatim.
    /// Idempotent.
    pub fn strip(&self, raw_text: &str) -> String {
        raw_text
            .lines()
            .filter(|l| !l.trim().is_empty() && !self.is_noise(l))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// `prefix` matches at the start of `line`; prefixes ending in an alphanumeric
/// character must be followed by a non-alphanumeric one (or end of line).
fn starts_with_word(line: &str, prefix: &str) -> bool {
    if prefix.is_empty() || !line.starts_with(prefix) {
        return false;
    }
    if !prefix.ends_with(|c: char| c.is_alphanumeric()) {
        return true;
    }
    match line[prefix.len()..].chars().next() {
        None => true,
        Some(c) => !c.is_alphanumeric() && c != '-' && c != '_',
    }
}

/// [`ProseFilter::strip`] with the default prefix list.
pub fn strip_non_command_text(raw_text: &str) -> String {
    ProseFilter::default().strip(raw_text)
}
