// SPDX-License-Identifier: Apache-2.0

//! Page extraction and boundary-preferring chunking.

use serde::{Deserialize, Serialize};

use super::DatasetError;

pub const PAGE_BREAK: char = '\u{c}';
pub const DEFAULT_MAX_LEN: usize = 1000;
pub const MIN_MAX_LEN: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageText {
    /// 1-based.
    pub page_number: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub source_page: usize,
    /// Position within the page, 0-based.
    pub ordinal: usize,
    /// Offset of the first character within the page, in chars.
    pub offset: usize,
    pub text: String,
}

impl Chunk {
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

/// Splits a pre-extracted document on form feeds. Blank pages are kept so
/// numbering matches the source.
pub fn extract_pages(document: &str) -> Result<Vec<PageText>, DatasetError> {
    if document.trim().is_empty() {
        return Err(DatasetError::EmptyDocument);
    }
    Ok(document
        .split(PAGE_BREAK)
        .enumerate()
        .map(|(i, text)| PageText {
            page_number: i + 1,
            text: text.to_string(),
        })
        .collect())
}

fn is_sentence_end(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Length of the cut to take from `rest`, which is longer than `max_len`.
fn cut_len(rest: &[char], max_len: usize) -> usize {
    // A sentence ends after terminal punctuation followed by whitespace, or
    // right before a line break.
    let sentence = (1..=max_len).rev().find(|&k| {
        let next = rest[k];
        next == '\n' || (is_sentence_end(rest[k - 1]) && next.is_whitespace())
    });
    if let Some(k) = sentence {
        return k;
    }
    (1..=max_len)
        .rev()
        .find(|&k| rest[k].is_whitespace())
        .unwrap_or(max_len)
}

/// Greedy chunking within one page. Chunks carry no leading or trailing
/// whitespace; the whitespace at each cut is consumed.
///
/// Panics if `max_len` is below [`MIN_MAX_LEN`].
pub fn chunk_text(page: &PageText, max_len: usize) -> Vec<Chunk> {
    assert!(max_len >= MIN_MAX_LEN, "max_len must be at least {MIN_MAX_LEN}");
    let chars: Vec<char> = page.text.chars().collect();
    let mut chunks = Vec::new();
    let mut i = 0;
    loop {
        while i < chars.len() && chars[i].is_whitespace() {
            i += 1;
        }
        if i >= chars.len() {
            break;
        }
        let rest = &chars[i..];
        let take = if rest.len() <= max_len {
            rest.len()
        } else {
            cut_len(rest, max_len)
        };
        let mut end = take;
        while end > 0 && rest[end - 1].is_whitespace() {
            end -= 1;
        }
        chunks.push(Chunk {
            source_page: page.page_number,
            ordinal: chunks.len(),
            offset: i,
            text: rest[..end].iter().collect(),
        });
        i += take;
    }
    chunks
}
