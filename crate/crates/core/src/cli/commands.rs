// SPDX-License-Identifier: Apache-2.0

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use super::{write_io, CliConfig, CliError, TranslateArgs, EXIT_EXHAUSTED, EXIT_FAILURE, EXIT_OK};
use crate::agent::{Agent, ConfigRepo, ResultLog, SessionResult, SessionStatus};
use crate::backend::Backend;
use crate::metrics::{evaluate_batch, load_eval_cases, write_report};
use crate::types::{GeneratedConfiguration, Intent, IntentForm};
use crate::verifier::{verify_config, VerificationReport};

fn read_input(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn build_agent(cfg: &CliConfig) -> Result<Agent<Arc<dyn Backend>>, CliError> {
    Ok(Agent::new(
        cfg.backend()?,
        Arc::new(cfg.grammar()?),
        Arc::new(cfg.templates()?),
        cfg.agent_config(),
    ))
}

/// Findings, one per line: `severity kind block:line message` plus the fix.
fn write_findings(report: &VerificationReport, w: &mut dyn Write) -> std::io::Result<()> {
    for f in &report.findings {
        writeln!(w, "{} {} {}:{} {}", f.severity, f.kind, f.block, f.line, f.message)?;
        if !f.suggestion.is_empty() {
            writeln!(w, "  fix: {}", f.suggestion)?;
        }
    }
    Ok(())
}

fn write_session_summary(result: &SessionResult, w: &mut dyn Write) -> std::io::Result<()> {
    writeln!(
        w,
        "status={} iterations={} translation_secs={:.3} configuration_secs={:.3}",
        result.status, result.iterations_used, result.timings.translation_secs, result.timings.configuration_secs
    )?;
    if let Some(kind) = &result.classification {
        writeln!(w, "classification={}", kind.as_str())?;
    }
    for warning in &result.warnings {
        writeln!(w, "warning: {warning}")?;
    }
    if let Some(e) = &result.error {
        writeln!(w, "error: {e}")?;
    }
    if let Some(report) = &result.final_report {
        writeln!(
            w,
            "syntax_score={} approved={}",
            report.syntax_score.as_i8(),
            report.approved
        )?;
        write_findings(report, w)?;
    }
    Ok(())
}

/// Runs one session and handles output, repo storage and logging.
fn translate_intent(
    cfg: &CliConfig,
    agent: &Agent<Arc<dyn Backend>>,
    log: Option<&ResultLog>,
    intent: &Intent,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    let result = agent.run_session(intent);
    if let Some(config) = &result.final_config {
        let text = config.command_text();
        if !text.is_empty() {
            writeln!(out, "{text}").map_err(write_io)?;
        }
    }
    write_session_summary(&result, err).map_err(write_io)?;
    if let Some(log) = log {
        log.append(&result).map_err(|e| CliError::failure(e.to_string()))?;
    }
    let code = match result.status {
        SessionStatus::Approved => EXIT_OK,
        SessionStatus::Exhausted => EXIT_EXHAUSTED,
        SessionStatus::Failed => EXIT_FAILURE,
    };
    if code == EXIT_OK {
        if let Some(root) = &cfg.repo {
            let entry = ConfigRepo::new(root)
                .store(&result, agent.grammar())
                .map_err(|e| CliError::failure(e.to_string()))?;
            writeln!(err, "stored={} version={}", entry.path.display(), entry.meta.version).map_err(write_io)?;
        }
    }
    Ok(code)
}

fn open_log(cfg: &CliConfig) -> Result<Option<ResultLog>, CliError> {
    cfg.log
        .as_ref()
        .map(|p| ResultLog::open(p).map_err(|e| CliError::failure(e.to_string())))
        .transpose()
}

pub(super) fn translate(
    cfg: &CliConfig,
    args: &TranslateArgs,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    let text = match (&args.text, &args.file) {
        (Some(t), _) => t.clone(),
        (None, Some(path)) => read_input(path)?,
        (None, None) => return Err(CliError::usage("pass --text or --file")),
    };
    let form: IntentForm = args.form.parse().map_err(|e| CliError::usage(format!("{e}")))?;
    let mut intent = Intent::new(&args.id, text.trim(), form).map_err(|e| CliError::usage(e.to_string()))?;
    if let Some(c) = &args.context {
        intent = intent.with_context(c);
    }
    let agent = build_agent(cfg)?;
    let log = open_log(cfg)?;
    translate_intent(cfg, &agent, log.as_ref(), &intent, out, err)
}

pub(super) fn verify(cfg: &CliConfig, file: &Path, out: &mut dyn Write, _err: &mut dyn Write) -> Result<i32, CliError> {
    let text = read_input(file)?;
    let grammar = cfg.grammar()?;
    let config = GeneratedConfiguration::from_text(file.display().to_string(), text);
    let report = verify_config(&config, &grammar).map_err(|e| CliError::usage(format!("{}: {e}", file.display())))?;
    for (block, verdicts) in config.blocks.iter().zip(&report.line_verdicts) {
        for (line, v) in block.lines.iter().zip(verdicts) {
            writeln!(
                out,
                "{}:{}\t{:>2}\t{}\t{}",
                block.device_ordinal,
                line.index,
                v.value.as_i8(),
                v.mode.as_str(),
                line.raw.trim()
            )
            .map_err(write_io)?;
        }
    }
    write_findings(&report, out).map_err(write_io)?;
    writeln!(
        out,
        "syntax_score={} approved={}",
        report.syntax_score.as_i8(),
        report.approved
    )
    .map_err(write_io)?;
    Ok(if report.approved { EXIT_OK } else { EXIT_FAILURE })
}

pub(super) fn eval(
    cfg: &CliConfig,
    cases_path: &Path,
    dir: &Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    let cases = load_eval_cases(cases_path).map_err(|e| CliError::usage(format!("{}: {e}", cases_path.display())))?;
    let agent = build_agent(cfg)?;
    let report = evaluate_batch(&cases, &agent, cfg.jobs).map_err(|e| CliError::usage(e.to_string()))?;
    let paths = write_report(&report, dir).map_err(|e| CliError::failure(format!("{}: {e}", dir.display())))?;
    out.write_all(report.summary.table().as_bytes()).map_err(write_io)?;
    for r in report.records.iter().filter(|r| r.failed) {
        writeln!(
            err,
            "case {} failed: {}",
            r.intent_id,
            r.error.as_deref().unwrap_or("no configuration")
        )
        .map_err(write_io)?;
    }
    writeln!(err, "report={}", paths.records.parent().unwrap_or(dir).display()).map_err(write_io)?;
    Ok(EXIT_OK)
}

/// One intent per stdin line; blank lines are skipped and `quit` or `exit`
/// ends the loop. Exits with the code of the last session.
pub(super) fn repl(
    cfg: &CliConfig,
    stdin: &mut dyn BufRead,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    let agent = build_agent(cfg)?;
    let log = open_log(cfg)?;
    let mut code = EXIT_OK;
    let mut n = 0usize;
    let mut line = String::new();
    loop {
        line.clear();
        if stdin
            .read_line(&mut line)
            .map_err(|e| CliError::failure(e.to_string()))?
            == 0
        {
            break;
        }
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if text == "quit" || text == "exit" {
            break;
        }
        n += 1;
        let intent = Intent::new(format!("repl-{n}"), text, IntentForm::Requirement)
            .map_err(|e| CliError::usage(e.to_string()))?;
        code = translate_intent(cfg, &agent, log.as_ref(), &intent, out, err)?;
        out.flush().map_err(write_io)?;
    }
    Ok(code)
}
