// SPDX-License-Identifier: Apache-2.0

//! `dataset` stages. Pages, chunks and raw pairs travel between stages as
//! JSON lines; cleaned and refined datasets use `--format`.

use std::io::Write;
use std::path::{Path, PathBuf};

use super::{write_io, CliConfig, CliError, DatasetStage, EXIT_OK};
use crate::dataset::{
    chunk_pages, clean_pairs, enhance_chunks, extract_pages, read_dataset, read_records, refine_to_questions,
    run_pipeline, write_dataset, write_records, Chunk, DatasetError, DatasetFormat, PageText, RequirementConfigPair,
};

fn input_err(e: DatasetError) -> CliError {
    CliError::usage(e.to_string())
}

fn output_err(e: DatasetError) -> CliError {
    CliError::failure(e.to_string())
}

fn stats(out: &mut dyn Write, pairs: &[(&str, usize)]) -> Result<(), CliError> {
    for (k, v) in pairs {
        writeln!(out, "{k}={v}").map_err(write_io)?;
    }
    Ok(())
}

fn extension(format: DatasetFormat) -> &'static str {
    match format {
        DatasetFormat::Csv => "csv",
        DatasetFormat::Records => "jsonl",
    }
}

/// Where `dataset all` writes its two datasets.
pub fn all_outputs(dir: &Path, format: DatasetFormat) -> (PathBuf, PathBuf) {
    let ext = extension(format);
    (
        dir.join(format!("requirements.{ext}")),
        dir.join(format!("questions.{ext}")),
    )
}

pub(super) fn run_stage(
    cfg: &CliConfig,
    stage: &DatasetStage,
    out: &mut dyn Write,
    _err: &mut dyn Write,
) -> Result<i32, CliError> {
    let mut opts = cfg.dataset_options();
    match stage {
        DatasetStage::Extract(io) => {
            let doc = std::fs::read_to_string(&io.input)
                .map_err(|e| CliError::usage(format!("{}: {e}", io.input.display())))?;
            let pages = extract_pages(&doc).map_err(input_err)?;
            write_records(&pages, &io.output).map_err(output_err)?;
            stats(out, &[("pages", pages.len())])?;
        }
        DatasetStage::Chunk { io, max_len } => {
            let pages: Vec<PageText> = read_records(&io.input).map_err(input_err)?;
            let chunks = chunk_pages(&pages, max_len.unwrap_or(opts.max_len)).map_err(input_err)?;
            write_records(&chunks, &io.output).map_err(output_err)?;
            stats(out, &[("pages", pages.len()), ("chunks", chunks.len())])?;
        }
        DatasetStage::Enhance(io) => {
            let chunks: Vec<Chunk> = read_records(&io.input).map_err(input_err)?;
            let backend = cfg.backend()?;
            let templates = cfg.templates()?;
            let outcome = enhance_chunks(&chunks, &backend, &templates, &opts);
            write_records(&outcome.pairs, &io.output).map_err(output_err)?;
            stats(
                out,
                &[
                    ("chunks", chunks.len()),
                    ("extracted", outcome.pairs.len()),
                    ("failed_chunks", outcome.failures.len()),
                ],
            )?;
        }
        DatasetStage::Clean(io) => {
            let pairs: Vec<RequirementConfigPair> = read_dataset(&io.input).map_err(input_err)?;
            let total = pairs.len();
            let outcome = clean_pairs(pairs, &opts.rejection_list);
            write_dataset(&outcome.kept, &io.output, cfg.format).map_err(output_err)?;
            stats(
                out,
                &[
                    ("input", total),
                    ("kept", outcome.kept.len()),
                    ("removed", outcome.removed),
                ],
            )?;
        }
        DatasetStage::Refine(io) => {
            let pairs: Vec<RequirementConfigPair> = read_dataset(&io.input).map_err(input_err)?;
            let backend = cfg.backend()?;
            let templates = cfg.templates()?;
            let outcome = refine_to_questions(&pairs, &backend, &templates, &opts);
            write_dataset(&outcome.questions, &io.output, cfg.format).map_err(output_err)?;
            stats(
                out,
                &[
                    ("input", pairs.len()),
                    ("questions", outcome.questions.len()),
                    ("dropped", outcome.dropped.len()),
                ],
            )?;
        }
        DatasetStage::All { io, max_len } => {
            if let Some(m) = max_len {
                opts.max_len = *m;
            }
            let doc = std::fs::read_to_string(&io.input)
                .map_err(|e| CliError::usage(format!("{}: {e}", io.input.display())))?;
            let backend = cfg.backend()?;
            let templates = cfg.templates()?;
            let result = run_pipeline(&doc, &backend, &templates, &opts).map_err(input_err)?;
            std::fs::create_dir_all(&io.output)
                .map_err(|e| CliError::failure(format!("{}: {e}", io.output.display())))?;
            let (req_path, q_path) = all_outputs(&io.output, cfg.format);
            write_dataset(&result.requirements, &req_path, cfg.format).map_err(output_err)?;
            write_dataset(&result.questions, &q_path, cfg.format).map_err(output_err)?;
            stats(
                out,
                &[
                    ("pages", result.pages),
                    ("chunks", result.chunks),
                    ("failed_chunks", result.enhance_failures),
                    ("extracted", result.extracted),
                    ("removed", result.removed),
                    ("kept", result.requirements.len()),
                    ("questions", result.questions.len()),
                    ("dropped", result.dropped),
                ],
            )?;
        }
    }
    Ok(EXIT_OK)
}
