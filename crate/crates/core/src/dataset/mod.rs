// SPDX-License-Identifier: Apache-2.0

//! Dataset construction from vendor guides: page extraction, chunking,
//! model-driven pair extraction, cleaning, and question rewriting.

mod chunk;
mod io;
mod pairs;

use std::path::PathBuf;

use rayon::prelude::*;
use thiserror::Error;

use crate::backend::Backend;
use crate::prompts::PromptTemplates;

pub use chunk::{chunk_text, extract_pages, Chunk, PageText, DEFAULT_MAX_LEN, MIN_MAX_LEN, PAGE_BREAK};
pub use io::{read_dataset, read_records, write_dataset, write_records, DatasetFormat, DatasetRow, Schema};
pub use pairs::{
    clean_pairs, enhance_chunk, parse_enhancement_response, parse_question_response, refine_to_questions, CleanOutcome,
    Provenance, QuestionConfigPair, RefineOutcome, RequirementConfigPair, DEFAULT_REJECTION_LIST,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("document contains no text")]
    EmptyDocument,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("max_len {0} is below the minimum of {MIN_MAX_LEN}")]
    MaxLenTooSmall(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetOptions {
    pub model_name: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub max_len: usize,
    pub rejection_list: Vec<String>,
    /// Extra attempts after a failed rephrasing.
    pub rephrase_retries: u32,
    /// Concurrent backend calls; 0 means one per available core.
    pub jobs: usize,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            model_name: crate::agent::DEFAULT_MODEL.to_string(),
            temperature: 0.0,
            max_tokens: 1024,
            max_len: DEFAULT_MAX_LEN,
            rejection_list: DEFAULT_REJECTION_LIST.iter().map(|s| s.to_string()).collect(),
            rephrase_retries: 1,
            jobs: 4,
        }
    }
}

impl DatasetOptions {
    /// Maps `f` over `items` on a pool of `jobs` threads, keeping input order.
    pub(crate) fn map_ordered<T, U, F>(&self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync,
    {
        if self.jobs == 1 || items.len() < 2 {
            return items.iter().map(f).collect();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(self.jobs).build() {
            Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
            Err(e) => {
                log::warn!("thread pool unavailable ({e}); running sequentially");
                items.iter().map(f).collect()
            }
        }
    }
}

pub fn chunk_pages(pages: &[PageText], max_len: usize) -> Result<Vec<Chunk>, DatasetError> {
    if max_len < MIN_MAX_LEN {
        return Err(DatasetError::MaxLenTooSmall(max_len));
    }
    Ok(pages.iter().flat_map(|p| chunk_text(p, max_len)).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnhanceOutcome {
    pub pairs: Vec<RequirementConfigPair>,
    /// (page, chunk ordinal, error) for chunks whose backend call failed.
    pub failures: Vec<(usize, usize, String)>,
}

/// Enhances chunks concurrently. Pairs come out in (page, ordinal) order; a
/// failed chunk is recorded and skipped.
pub fn enhance_chunks<B: Backend + ?Sized>(
    chunks: &[Chunk],
    backend: &B,
    templates: &PromptTemplates,
    opts: &DatasetOptions,
) -> EnhanceOutcome {
    let results = opts.map_ordered(chunks, |c| enhance_chunk(c, backend, templates, opts));
    let mut outcome = EnhanceOutcome {
        pairs: Vec::new(),
        failures: Vec::new(),
    };
    for (c, r) in chunks.iter().zip(results) {
        match r {
            Ok(pairs) => outcome.pairs.extend(pairs),
            Err(e) => {
                log::warn!("page {} chunk {}: {e}", c.source_page, c.ordinal);
                outcome.failures.push((c.source_page, c.ordinal, e.to_string()));
            }
        }
    }
    outcome
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineOutput {
    pub pages: usize,
    pub chunks: usize,
    pub enhance_failures: usize,
    pub extracted: usize,
    pub removed: usize,
    pub requirements: Vec<RequirementConfigPair>,
    pub questions: Vec<QuestionConfigPair>,
    pub dropped: usize,
}

/// All stages, in memory.
pub fn run_pipeline<B: Backend + ?Sized>(
    document: &str,
    backend: &B,
    templates: &PromptTemplates,
    opts: &DatasetOptions,
) -> Result<PipelineOutput, DatasetError> {
    let pages = extract_pages(document)?;
    let chunks = chunk_pages(&pages, opts.max_len)?;
    let enhanced = enhance_chunks(&chunks, backend, templates, opts);
    let extracted = enhanced.pairs.len();
    let cleaned = clean_pairs(enhanced.pairs, &opts.rejection_list);
    let refined = refine_to_questions(&cleaned.kept, backend, templates, opts);
    Ok(PipelineOutput {
        pages: pages.len(),
        chunks: chunks.len(),
        enhance_failures: enhanced.failures.len(),
        extracted,
        removed: cleaned.removed,
        requirements: cleaned.kept,
        dropped: refined.dropped.len(),
        questions: refined.questions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{Matcher, MockBackend};

    fn mock() -> MockBackend {
        let m = MockBackend::new("How do I do this?");
        m.register(
            Matcher::user_contains("OSPF"),
            "requirement: Enable OSPF routing on all interfaces\nconfiguration:\nrouter ospf 1\nnetwork 192.168.1.0 0.0.0.255 area 0",
        )
        .unwrap();
        m.register(
            Matcher::user_contains("Documentation text"),
            "requirement: Set a banner\nconfiguration: N/A",
        )
        .unwrap();
        m
    }

    #[test]
    fn pipeline_is_deterministic_and_ordered() {
        let mut doc = String::new();
        for p in 0..6 {
            doc.push_str(&format!("Page {p}. "));
            doc.push_str(&"Some filler sentence about switches. ".repeat(40));
            if p % 2 == 0 {
                doc.push_str("OSPF is enabled with router ospf.");
            }
            doc.push(PAGE_BREAK);
        }
        let t = PromptTemplates::default();
        let opts = DatasetOptions::default();
        let a = run_pipeline(&doc, &mock(), &t, &opts).unwrap();
        let b = run_pipeline(
            &doc,
            &mock(),
            &t,
            &DatasetOptions {
                jobs: 1,
                ..opts.clone()
            },
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.pages, 7);
        assert_eq!(a.extracted, a.chunks);
        assert_eq!(a.removed + a.requirements.len(), a.extracted);
        let provs: Vec<_> = a.requirements.iter().map(|p| p.provenance.unwrap()).collect();
        let mut sorted = provs.clone();
        sorted.sort_by_key(|p| (p.page, p.chunk));
        assert_eq!(provs, sorted);
        assert_eq!(a.questions.len(), a.requirements.len());
    }

    #[test]
    fn rejects_small_max_len() {
        let pages = extract_pages("x").unwrap();
        assert!(matches!(chunk_pages(&pages, 10), Err(DatasetError::MaxLenTooSmall(10))));
    }
}
