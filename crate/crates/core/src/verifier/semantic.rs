// SPDX-License-Identifier: Apache-2.0

//! Semantic rules over line-validated blocks: mode ordering, reference
//! integrity, address sanity and mutual exclusion.

use std::collections::{HashMap, HashSet};

use super::{
    out_of_range_octets, CommandGrammar, Finding, FindingKind, GrammarEntry, Mode, ParsedBlock, ParsedLine, Severity,
};

pub fn run_semantic_rules(blocks: &[ParsedBlock], grammar: &CommandGrammar) -> Vec<Finding> {
    let mut findings = Vec::new();
    for block in blocks {
        mode_ordering(block, &mut findings);
        reference_integrity(block, grammar, &mut findings);
        value_sanity(block, &mut findings);
        mutual_exclusion(block, grammar, &mut findings);
    }
    findings
}

/// Entry the line resolved to, whether valid in place or misplaced.
fn effective_entry<'g>(pl: &ParsedLine, grammar: &'g CommandGrammar) -> Option<(usize, &'g GrammarEntry)> {
    let idx = pl.verdict.matched_entry.or(match pl.verdict.misplaced_in {
        Some(_) => pl.verdict.candidate,
        None => None,
    })?;
    Some((idx, grammar.entry(idx)))
}

fn finding(block: &ParsedBlock, pl: &ParsedLine, kind: FindingKind, message: String, suggestion: String) -> Finding {
    Finding {
        kind,
        severity: Severity::High,
        block: block.device_ordinal,
        line: pl.line.index,
        message,
        suggestion,
    }
}

/// Commands that move from `from` towards `to`.
fn mode_path(from: Mode, to: Mode) -> Vec<&'static str> {
    fn depth(m: Mode) -> u8 {
        match m {
            Mode::Exec => 0,
            Mode::Privileged => 1,
            Mode::GlobalConfig => 2,
            Mode::InterfaceConfig | Mode::SubsystemConfig => 3,
        }
    }
    let mut path = Vec::new();
    let mut cur = from;
    if depth(cur) >= depth(to) && cur != to {
        // Climb out first: `end` returns to privileged from any config mode.
        if depth(cur) >= 2 {
            path.push("end");
            cur = Mode::Privileged;
        }
        if depth(to) == 0 && cur == Mode::Privileged {
            path.push("disable");
            cur = Mode::Exec;
        }
    }
    while cur != to {
        let (cmd, next) = match cur {
            Mode::Exec => ("enable", Mode::Privileged),
            Mode::Privileged => ("configure terminal", Mode::GlobalConfig),
            Mode::GlobalConfig if to == Mode::InterfaceConfig => ("interface <interface-id>", Mode::InterfaceConfig),
            Mode::GlobalConfig => (
                "the parent command (for example `router ospf <id>` or `ip sla <id>`)",
                Mode::SubsystemConfig,
            ),
            Mode::InterfaceConfig | Mode::SubsystemConfig => ("exit", Mode::GlobalConfig),
        };
        path.push(cmd);
        cur = next;
    }
    path
}

fn mode_ordering(block: &ParsedBlock, out: &mut Vec<Finding>) {
    for pl in &block.lines {
        let Some(target) = pl.verdict.misplaced_in else {
            continue;
        };
        let quoted = pl.line.raw.trim();
        let steps = mode_path(pl.verdict.mode, target)
            .into_iter()
            .map(|c| {
                if c.starts_with("the ") {
                    c.to_string()
                } else {
                    format!("`{c}`")
                }
            })
            .collect::<Vec<_>>()
            .join(", then ");
        out.push(finding(
            block,
            pl,
            FindingKind::ModeError,
            format!(
                "`{quoted}` is a {target} command but the block is in {} mode at this point",
                pl.verdict.mode
            ),
            format!("Enter {target} mode before this line with {steps}."),
        ));
    }
}

fn reference_integrity(block: &ParsedBlock, grammar: &CommandGrammar, out: &mut Vec<Finding>) {
    let mut declared: HashMap<&str, HashSet<String>> = HashMap::new();
    for pl in &block.lines {
        let Some((_, entry)) = effective_entry(pl, grammar) else {
            continue;
        };
        let value_of = |name: &str| {
            pl.verdict
                .bindings
                .iter()
                .find(|b| b.name == name)
                .map(|b| b.value.to_ascii_lowercase())
        };
        for req in &entry.requires {
            let Some(value) = value_of(&req.placeholder) else {
                continue;
            };
            if declared.get(req.kind.as_str()).is_some_and(|s| s.contains(&value)) {
                continue;
            }
            let example = grammar
                .declarer_of(&req.kind)
                .map(|d| {
                    let placeholder = d
                        .declares
                        .iter()
                        .find(|r| r.kind == req.kind)
                        .map(|r| r.placeholder.as_str())
                        .unwrap_or_default();
                    let values = HashMap::from([(placeholder, value.as_str())]);
                    format!(" (for example `{}`)", d.pattern.render_with(&values))
                })
                .unwrap_or_default();
            out.push(finding(
                block,
                pl,
                FindingKind::SemanticDependency,
                format!(
                    "`{}` references {} {value}, which is not declared earlier in this block",
                    pl.line.raw.trim(),
                    req.kind
                ),
                format!("Declare {} {value} before this line{example}.", req.kind),
            ));
        }
        for decl in &entry.declares {
            if let Some(value) = value_of(&decl.placeholder) {
                declared.entry(decl.kind.as_str()).or_default().insert(value);
            }
        }
    }
}

fn value_sanity(block: &ParsedBlock, out: &mut Vec<Finding>) {
    for pl in &block.lines {
        for b in pl.verdict.bindings.iter().filter(|b| b.class.is_address()) {
            let bad = out_of_range_octets(&b.value);
            if bad.is_empty() {
                continue;
            }
            let octets = bad.iter().map(u32::to_string).collect::<Vec<_>>().join(", ");
            out.push(finding(
                block,
                pl,
                FindingKind::ValueSanity,
                format!(
                    "address `{}` for <{}> has out-of-range octet {octets} (octets must be 0-255)",
                    b.value, b.name
                ),
                format!("Use a dotted-quad {} with every octet between 0 and 255.", b.class),
            ));
        }
    }
}

fn mutual_exclusion(block: &ParsedBlock, grammar: &CommandGrammar, out: &mut Vec<Finding>) {
    // Exclusions apply within one context: the lines after a mode-entering
    // command (e.g. one `interface`) until the context changes.
    let mut context: Option<&str> = None;
    let mut context_mode = Mode::Exec;
    let mut seen: Vec<(usize, &ParsedLine)> = Vec::new();
    for pl in &block.lines {
        let Some((idx, entry)) = effective_entry(pl, grammar) else {
            continue;
        };
        if entry.transition.is_some() {
            context = Some(pl.line.raw.trim());
            context_mode = entry.next_mode();
            seen.clear();
            continue;
        }
        if entry.mode != context_mode {
            context = None;
            context_mode = entry.mode;
            seen.clear();
        }
        if let Some((_, earlier)) = seen.iter().find(|(other, _)| grammar.excludes(idx, *other)) {
            let quoted = pl.line.raw.trim();
            let prior = earlier.line.raw.trim();
            let scope = context.map(|c| format!(" under `{c}`")).unwrap_or_default();
            out.push(finding(
                block,
                pl,
                FindingKind::SemanticConflict,
                format!(
                    "`{quoted}` conflicts with `{prior}` (line {}){scope}",
                    earlier.line.index + 1
                ),
                format!("Keep only one of `{prior}` and `{quoted}`{scope}."),
            ));
        }
        seen.push((idx, pl));
    }
}
