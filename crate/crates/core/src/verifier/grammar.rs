// SPDX-License-Identifier: Apache-2.0

//! Command grammar: token patterns grouped by configuration mode.
//!
//! Grammar files are line oriented:
//!
//! ```text
//! # comment
//! [global-config]
//! interface <if:interface-id>                      => interface-config
//! ip sla <id:integer-range(1-2147483647)>          => subsystem-config @declares(sla:id)
//! ip sla schedule <id:integer-range(1-2147483647)> start-time now @requires(sla:id)
//!
//! [interface-config]
//! shutdown     @id(shutdown) @excludes(no-shutdown)
//! no shutdown  @id(no-shutdown)
//! ```
//!
//! A bare word is a literal, `{a|b|c}` a choice and `<name:class>` a placeholder
//! whose value must belong to `class` (`interface-id`, `ipv4`, `ipv4-wildcard`,
//! `integer-range` optionally bounded as `integer-range(lo-hi)`, or `word`).

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The grammar shipped with the crate.
pub const DEFAULT_GRAMMAR: &str = include_str!("../../data/ios.grammar");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GrammarError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: duplicate entry `{pattern}` in {mode} mode (first defined on line {first_line})")]
    DuplicateEntry {
        line: usize,
        first_line: usize,
        mode: Mode,
        pattern: String,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Cisco IOS configuration modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Exec,
    Privileged,
    GlobalConfig,
    InterfaceConfig,
    SubsystemConfig,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Exec,
        Mode::Privileged,
        Mode::GlobalConfig,
        Mode::InterfaceConfig,
        Mode::SubsystemConfig,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Exec => "exec",
            Mode::Privileged => "privileged",
            Mode::GlobalConfig => "global-config",
            Mode::InterfaceConfig => "interface-config",
            Mode::SubsystemConfig => "subsystem-config",
        }
    }

    /// Mode whose commands are also accepted here. Sub-configuration modes fall
    /// back to global configuration, privileged mode inherits exec commands.
    pub fn parent(self) -> Option<Mode> {
        match self {
            Mode::Exec | Mode::GlobalConfig => None,
            Mode::Privileged => Some(Mode::Exec),
            Mode::InterfaceConfig | Mode::SubsystemConfig => Some(Mode::GlobalConfig),
        }
    }

    /// This mode followed by its ancestors.
    pub fn chain(self) -> impl Iterator<Item = Mode> {
        std::iter::successors(Some(self), |m| m.parent())
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueClass {
    InterfaceId,
    Ipv4,
    Ipv4Wildcard,
    IntegerRange { min: u64, max: u64 },
    Word,
}

static INTERFACE_ID: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[A-Za-z][A-Za-z-]*[0-9]+(/[0-9]+)*(\.[0-9]+)?$").expect("valid regex"));

impl ValueClass {
    pub fn name(&self) -> &'static str {
        match self {
            ValueClass::InterfaceId => "interface-id",
            ValueClass::Ipv4 => "ipv4",
            ValueClass::Ipv4Wildcard => "ipv4-wildcard",
            ValueClass::IntegerRange { .. } => "integer-range",
            ValueClass::Word => "word",
        }
    }

    /// Lexical membership. Dotted quads are checked for shape only; octet
    /// ranges are a semantic rule.
    pub fn accepts(&self, value: &str) -> bool {
        match self {
            ValueClass::InterfaceId => INTERFACE_ID.is_match(value),
            ValueClass::Ipv4 | ValueClass::Ipv4Wildcard => is_dotted_quad(value),
            ValueClass::IntegerRange { min, max } => value.parse::<u64>().is_ok_and(|v| (*min..=*max).contains(&v)),
            ValueClass::Word => !value.is_empty(),
        }
    }

    pub fn is_address(&self) -> bool {
        matches!(self, ValueClass::Ipv4 | ValueClass::Ipv4Wildcard)
    }

    fn parse(spec: &str) -> Result<Self, String> {
        let class = match spec {
            "interface-id" => ValueClass::InterfaceId,
            "ipv4" => ValueClass::Ipv4,
            "ipv4-wildcard" => ValueClass::Ipv4Wildcard,
            "word" => ValueClass::Word,
            "integer-range" => ValueClass::IntegerRange { min: 0, max: u64::MAX },
            other => {
                let bounds = other
                    .strip_prefix("integer-range(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| format!("unknown value class `{other}`"))?;
                let (lo, hi) = bounds
                    .split_once('-')
                    .ok_or_else(|| format!("integer range `{bounds}` must be `lo-hi`"))?;
                let min = lo
                    .trim()
                    .parse::<u64>()
                    .map_err(|_| format!("bad range bound `{lo}`"))?;
                let max = hi
                    .trim()
                    .parse::<u64>()
                    .map_err(|_| format!("bad range bound `{hi}`"))?;
                if min > max {
                    return Err(format!("empty integer range {min}-{max}"));
                }
                ValueClass::IntegerRange { min, max }
            }
        };
        Ok(class)
    }
}

impl fmt::Display for ValueClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueClass::IntegerRange { min: 0, max: u64::MAX } => f.write_str("integer-range"),
            ValueClass::IntegerRange { min, max } => write!(f, "integer-range({min}-{max})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Four dot-separated groups of one to three digits.
pub fn is_dotted_quad(value: &str) -> bool {
    let parts: Vec<&str> = value.split('.').collect();
    parts.len() == 4
        && parts
            .iter()
            .all(|p| (1..=3).contains(&p.len()) && p.bytes().all(|b| b.is_ascii_digit()))
}

/// Octets of a dotted quad that exceed 255.
pub fn out_of_range_octets(value: &str) -> Vec<u32> {
    value
        .split('.')
        .filter_map(|p| p.parse::<u32>().ok())
        .filter(|o| *o > 255)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum Token {
    Literal {
        word: String,
    },
    /// Alternatives, lowercased, sorted and deduplicated.
    Choice {
        options: Vec<String>,
    },
    Placeholder {
        name: String,
        class: ValueClass,
    },
}

impl Token {
    fn accepts(&self, value: &str) -> TokenFit {
        match self {
            Token::Literal { word } => {
                if word.eq_ignore_ascii_case(value) {
                    TokenFit::Exact
                } else {
                    TokenFit::Mismatch
                }
            }
            Token::Choice { options } => {
                if options.iter().any(|o| o.eq_ignore_ascii_case(value)) {
                    TokenFit::Exact
                } else {
                    TokenFit::Mismatch
                }
            }
            Token::Placeholder { class, .. } => {
                if class.accepts(value) {
                    TokenFit::Exact
                } else {
                    TokenFit::BadValue
                }
            }
        }
    }

    /// Comparison key for duplicate detection: placeholder names do not matter.
    fn shape(&self) -> String {
        match self {
            Token::Literal { word } => word.clone(),
            Token::Choice { options } => format!("{{{}}}", options.join("|")),
            Token::Placeholder { class, .. } => format!("<{class}>"),
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Literal { word } => f.write_str(word),
            Token::Choice { options } => write!(f, "{{{}}}", options.join("|")),
            Token::Placeholder { name, class } => write!(f, "<{name}:{class}>"),
        }
    }
}

enum TokenFit {
    Exact,
    BadValue,
    Mismatch,
}

/// Error locating a problem inside a pattern string (1-based column).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("column {column}: {message}")]
pub struct PatternError {
    pub column: usize,
    pub message: String,
}

/// Placeholder value captured while matching a line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub name: String,
    pub class: ValueClass,
    pub value: String,
}

/// Result of matching one line's tokens against one pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternMatch {
    Full(Vec<Binding>),
    /// Shape matches but a placeholder value is outside its class.
    BadValue {
        binding: Binding,
    },
    /// The line is a strict prefix of the pattern.
    Prefix,
    NoMatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pattern {
    tokens: Vec<Token>,
}

impl Pattern {
    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn shape_key(&self) -> String {
        self.tokens.iter().map(Token::shape).collect::<Vec<_>>().join(" ")
    }

    pub fn placeholder_names(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().filter_map(|t| match t {
            Token::Placeholder { name, .. } => Some(name.as_str()),
            _ => None,
        })
    }

    /// Matches whitespace-separated line tokens against this pattern.
    pub fn match_tokens(&self, words: &[&str]) -> PatternMatch {
        if words.is_empty() || words.len() > self.tokens.len() {
            return PatternMatch::NoMatch;
        }
        let mut bindings = Vec::new();
        let mut bad_value = None;
        for (token, word) in self.tokens.iter().zip(words) {
            match token.accepts(word) {
                TokenFit::Mismatch => return PatternMatch::NoMatch,
                TokenFit::BadValue if words.len() < self.tokens.len() => return PatternMatch::NoMatch,
                fit => {
                    if let Token::Placeholder { name, class } = token {
                        let binding = Binding {
                            name: name.clone(),
                            class: *class,
                            value: (*word).to_string(),
                        };
                        if matches!(fit, TokenFit::BadValue) && bad_value.is_none() {
                            bad_value = Some(binding.clone());
                        }
                        bindings.push(binding);
                    }
                }
            }
        }
        if words.len() < self.tokens.len() {
            PatternMatch::Prefix
        } else if let Some(binding) = bad_value {
            PatternMatch::BadValue { binding }
        } else {
            PatternMatch::Full(bindings)
        }
    }

    pub fn match_line(&self, line: &str) -> PatternMatch {
        let words: Vec<&str> = line.split_whitespace().collect();
        self.match_tokens(&words)
    }

    /// True when `line` fully matches with every placeholder in class.
    pub fn matches_line(&self, line: &str) -> bool {
        matches!(self.match_line(line), PatternMatch::Full(_))
    }

    /// Renders the pattern with some placeholders substituted by values.
    pub fn render_with(&self, values: &HashMap<&str, &str>) -> String {
        self.tokens
            .iter()
            .map(|t| match t {
                Token::Placeholder { name, .. } => values
                    .get(name.as_str())
                    .map(|v| (*v).to_string())
                    .unwrap_or_else(|| format!("<{name}>")),
                Token::Choice { options } => format!("{{{}}}", options.join("|")),
                Token::Literal { word } => word.clone(),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.tokens.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(" "))
    }
}

impl FromStr for Pattern {
    type Err = PatternError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let raw = lex(s)?;
        let tokens = raw
            .into_iter()
            .map(|(col, text)| parse_token(&text).map_err(|message| PatternError { column: col, message }))
            .collect::<Result<Vec<_>, _>>()?;
        if tokens.is_empty() {
            return Err(PatternError {
                column: 1,
                message: "empty pattern".into(),
            });
        }
        Ok(Pattern { tokens })
    }
}

/// Splits pattern text into raw tokens with their 1-based columns. Braces and
/// angle brackets group their content, so `{a | b}` is one token.
fn lex(s: &str) -> Result<Vec<(usize, String)>, PatternError> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let close = match chars[i] {
            '{' => Some('}'),
            '<' => Some('>'),
            _ => None,
        };
        match close {
            Some(close) => {
                let end = chars[i..]
                    .iter()
                    .position(|&c| c == close)
                    .map(|p| i + p)
                    .ok_or_else(|| PatternError {
                        column: start + 1,
                        message: format!("unterminated `{}`", chars[start]),
                    })?;
                i = end + 1;
                if i < chars.len() && !chars[i].is_whitespace() {
                    return Err(PatternError {
                        column: i + 1,
                        message: format!("unexpected `{}` after `{close}`", chars[i]),
                    });
                }
            }
            None => {
                while i < chars.len() && !chars[i].is_whitespace() {
                    i += 1;
                }
            }
        }
        out.push((start + 1, chars[start..i].iter().collect()));
    }
    Ok(out)
}

fn parse_token(text: &str) -> Result<Token, String> {
    if let Some(inner) = text.strip_prefix('{').and_then(|t| t.strip_suffix('}')) {
        let mut options: Vec<String> = inner.split('|').map(|o| o.trim().to_ascii_lowercase()).collect();
        if options.iter().any(|o| o.is_empty() || o.contains(char::is_whitespace)) {
            return Err(format!("choice `{text}` has an empty or multi-word option"));
        }
        options.sort();
        options.dedup();
        return Ok(Token::Choice { options });
    }
    if let Some(inner) = text.strip_prefix('<').and_then(|t| t.strip_suffix('>')) {
        let (name, class) = inner
            .split_once(':')
            .ok_or_else(|| format!("placeholder `{text}` must be `<name:class>`"))?;
        let name = name.trim();
        if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-') {
            return Err(format!("placeholder `{text}` has an invalid name"));
        }
        let class = ValueClass::parse(class.trim())?;
        return Ok(Token::Placeholder {
            name: name.to_string(),
            class,
        });
    }
    if text.contains(['{', '}', '<', '>', '|']) {
        return Err(format!("malformed token `{text}`"));
    }
    Ok(Token::Literal {
        word: text.to_ascii_lowercase(),
    })
}

/// Reference from an entry to a named entity through one of its placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRef {
    pub kind: String,
    pub placeholder: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrammarEntry {
    pub id: Option<String>,
    pub mode: Mode,
    pub pattern: Pattern,
    pub transition: Option<Mode>,
    pub excludes: Vec<String>,
    pub declares: Vec<EntityRef>,
    pub requires: Vec<EntityRef>,
    /// 1-based line in the grammar source.
    pub source_line: usize,
}

impl GrammarEntry {
    /// Mode after a line matching this entry.
    pub fn next_mode(&self) -> Mode {
        self.transition.unwrap_or(self.mode)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandGrammar {
    entries: Vec<GrammarEntry>,
    by_mode: HashMap<Mode, Vec<usize>>,
}

impl Default for CommandGrammar {
    fn default() -> Self {
        Self::parse(DEFAULT_GRAMMAR).expect("shipped grammar is valid")
    }
}

impl CommandGrammar {
    pub fn load(path: &Path) -> Result<Self, GrammarError> {
        let text = std::fs::read_to_string(path).map_err(|e| GrammarError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn parse(source: &str) -> Result<Self, GrammarError> {
        let mut entries: Vec<GrammarEntry> = Vec::new();
        let mut mode: Option<Mode> = None;
        let mut seen: HashMap<(Mode, String), usize> = HashMap::new();
        let mut ids: HashMap<String, usize> = HashMap::new();

        for (idx, raw_line) in source.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let indent = raw_line.len() - raw_line.trim_start().len();
            let err = |column: usize, message: String| GrammarError::Parse {
                line: line_no,
                column: indent + column,
                message,
            };
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                mode = Some(name.trim().parse().map_err(|m| err(2, m))?);
                continue;
            }
            let mode = mode.ok_or_else(|| err(1, "entry before any [mode] section".into()))?;
            let entry = parse_entry(line, mode, line_no).map_err(|(col, m)| err(col, m))?;

            let key = (mode, entry.pattern.shape_key());
            if let Some(&first_line) = seen.get(&key) {
                return Err(GrammarError::DuplicateEntry {
                    line: line_no,
                    first_line,
                    mode,
                    pattern: entry.pattern.to_string(),
                });
            }
            seen.insert(key, line_no);
            if let Some(id) = &entry.id {
                if let Some(first) = ids.insert(id.clone(), line_no) {
                    return Err(err(1, format!("id `{id}` already used on line {first}")));
                }
            }
            entries.push(entry);
        }

        for entry in &entries {
            for target in &entry.excludes {
                if !ids.contains_key(target) {
                    return Err(GrammarError::Parse {
                        line: entry.source_line,
                        column: 1,
                        message: format!("@excludes references unknown id `{target}`"),
                    });
                }
            }
        }

        let mut by_mode: HashMap<Mode, Vec<usize>> = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            by_mode.entry(e.mode).or_default().push(i);
        }
        Ok(Self { entries, by_mode })
    }

    pub fn entries(&self) -> &[GrammarEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, index: usize) -> &GrammarEntry {
        &self.entries[index]
    }

    /// Indices of the entries defined for `mode`, in file order.
    pub fn entries_in(&self, mode: Mode) -> &[usize] {
        self.by_mode.get(&mode).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn by_id(&self, id: &str) -> Option<&GrammarEntry> {
        self.entries.iter().find(|e| e.id.as_deref() == Some(id))
    }

    /// Whether two entries are declared mutually exclusive (either direction).
    pub fn excludes(&self, a: usize, b: usize) -> bool {
        let (ea, eb) = (&self.entries[a], &self.entries[b]);
        let names = |x: &GrammarEntry, y: &GrammarEntry| y.id.as_ref().is_some_and(|id| x.excludes.contains(id));
        names(ea, eb) || names(eb, ea)
    }

    /// First entry that declares an entity of `kind`.
    pub fn declarer_of(&self, kind: &str) -> Option<&GrammarEntry> {
        self.entries.iter().find(|e| e.declares.iter().any(|d| d.kind == kind))
    }

    pub fn modes(&self) -> HashSet<Mode> {
        self.by_mode.keys().copied().collect()
    }
}

type EntryError = (usize, String);

/// Whitespace-separated words of `text` with 1-based columns, offset by `base`.
fn words_with_columns(text: &str, base: usize) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push((base + s + 1, &text[s..i]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((base + s + 1, &text[s..]));
    }
    out
}

fn parse_entry(line: &str, mode: Mode, line_no: usize) -> Result<GrammarEntry, EntryError> {
    // Split the pattern from the trailing `=> mode` and `@attr(...)` parts, which
    // only ever appear outside brace and angle groups.
    let mut depth = 0i32;
    let mut split_at = line.len();
    for (i, c) in line.char_indices() {
        match c {
            '{' | '<' => depth += 1,
            '}' | '>' if depth > 0 => depth -= 1,
            '@' if depth == 0 => {
                split_at = i;
                break;
            }
            '=' if depth == 0 && line[i..].starts_with("=>") => {
                split_at = i;
                break;
            }
            _ => {}
        }
    }
    let (pattern_text, rest) = line.split_at(split_at);
    let pattern: Pattern = pattern_text.parse().map_err(|e: PatternError| (e.column, e.message))?;

    let mut entry = GrammarEntry {
        id: None,
        mode,
        pattern,
        transition: None,
        excludes: Vec::new(),
        declares: Vec::new(),
        requires: Vec::new(),
        source_line: line_no,
    };

    let mut words = words_with_columns(rest, split_at).into_iter();
    while let Some((column, word)) = words.next() {
        if word == "=>" {
            let (target_col, target) = words
                .next()
                .ok_or((column, "`=>` must be followed by a mode".to_string()))?;
            if entry.transition.is_some() {
                return Err((column, "more than one transition".into()));
            }
            entry.transition = Some(target.parse().map_err(|m| (target_col, m))?);
            continue;
        }
        let attr = word
            .strip_prefix('@')
            .ok_or((column, format!("unexpected `{word}` after pattern")))?;
        let (name, args) = attr
            .strip_suffix(')')
            .and_then(|a| a.split_once('('))
            .ok_or((column, format!("attribute `{word}` must be `@name(args)`")))?;
        let args: Vec<&str> = args.split(',').map(str::trim).filter(|a| !a.is_empty()).collect();
        if args.is_empty() {
            return Err((column, format!("attribute `@{name}` needs arguments")));
        }
        match name {
            "id" if args.len() == 1 => entry.id = Some(args[0].to_string()),
            "excludes" => entry.excludes.extend(args.iter().map(|a| a.to_string())),
            "declares" | "requires" => {
                for arg in args {
                    let (kind, placeholder) = arg
                        .split_once(':')
                        .ok_or((column, format!("`{arg}` must be `kind:placeholder`")))?;
                    if !entry.pattern.placeholder_names().any(|n| n == placeholder) {
                        return Err((column, format!("pattern has no placeholder `{placeholder}`")));
                    }
                    let r = EntityRef {
                        kind: kind.to_string(),
                        placeholder: placeholder.to_string(),
                    };
                    if name == "declares" {
                        entry.declares.push(r);
                    } else {
                        entry.requires.push(r);
                    }
                }
            }
            other => return Err((column, format!("unknown attribute `@{other}`"))),
        }
    }
    Ok(entry)
}
