// SPDX-License-Identifier: Apache-2.0

//! The `netcfg` command line.
//!
//! Exit codes: 0 success, 1 failure or rejected configuration, 2 refinement
//! budget exhausted, 64 usage error or missing input.

mod commands;
pub mod config;
mod dataset;

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{CliConfig, FileConfig, GRAMMAR_ENV, MOCK_SCHEME};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_EXHAUSTED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// An error carrying the exit code it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn failure(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_FAILURE,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Parser)]
#[command(name = "netcfg", version, about = "Intent-to-configuration agent for Cisco IOS")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Settings shared by every subcommand. Flags beat environment variables,
/// which beat the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML settings file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Completion endpoint, or `mock:<script.toml>` for a scripted backend.
    #[arg(long, global = true, env = "NETCFG_BACKEND_URL", value_name = "URL")]
    pub backend_url: Option<String>,
    /// Model name sent with each completion request.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Grammar file replacing the bundled IOS grammar.
    #[arg(long, global = true, env = "NETCFG_GRAMMAR", value_name = "PATH")]
    pub grammar: Option<PathBuf>,
    /// TOML file overriding the bundled prompt templates.
    #[arg(long, global = true, value_name = "PATH")]
    pub templates: Option<PathBuf>,
    /// Generate/verify attempts per intent (default 3).
    #[arg(long, global = true, value_name = "N")]
    pub max_iter: Option<u32>,
    /// Store approved configurations under this directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub repo: Option<PathBuf>,
    /// Worker threads for eval and dataset stages.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Dataset output format: csv or records.
    #[arg(long, global = true, value_name = "FORMAT")]
    pub format: Option<String>,
    /// Append session results to this JSON-lines file.
    #[arg(long, global = true, value_name = "PATH")]
    pub log: Option<PathBuf>,
    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Translate one intent into a verified configuration.
    Translate(TranslateArgs),
    /// Check a configuration file against the grammar.
    Verify { file: PathBuf },
    /// Run a batch of evaluation cases and write a metrics report.
    Eval {
        cases: PathBuf,
        #[arg(long, default_value = "eval-report", value_name = "DIR")]
        out: PathBuf,
    },
    /// Dataset construction stages.
    Dataset {
        #[command(subcommand)]
        stage: DatasetStage,
    },
    /// Read intents from stdin, one per line, and translate each.
    Repl,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["text", "file"])))]
pub struct TranslateArgs {
    #[arg(long)]
    pub text: Option<String>,
    /// File holding the intent text.
    #[arg(long, value_name = "PATH")]
    pub file: Option<PathBuf>,
    #[arg(long, default_value = "requirement")]
    pub form: String,
    /// Network context appended to the prompts.
    #[arg(long)]
    pub context: Option<String>,
    #[arg(long, default_value = "cli")]
    pub id: String,
}

#[derive(Debug, Clone, Args)]
pub struct StageIo {
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum DatasetStage {
    /// Split a text document into pages (JSON lines).
    Extract(StageIo),
    /// Split pages into bounded chunks (JSON lines).
    Chunk {
        #[command(flatten)]
        io: StageIo,
        #[arg(long)]
        max_len: Option<usize>,
    },
    /// Ask the model for requirement/configuration pairs per chunk.
    Enhance(StageIo),
    /// Drop placeholder pairs.
    Clean(StageIo),
    /// Rewrite requirements as questions.
    Refine(StageIo),
    /// Every stage; `--output` is a directory.
    All {
        #[command(flatten)]
        io: StageIo,
        #[arg(long)]
        max_len: Option<usize>,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdin: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(rendered.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(rendered.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(&cli, stdin, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code
        }
    }
}

fn dispatch(cli: &Cli, stdin: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = CliConfig::resolve(&cli.global)?;
    match &cli.command {
        Command::Translate(args) => commands::translate(&cfg, args, out, err),
        Command::Verify { file } => commands::verify(&cfg, file, out, err),
        Command::Eval { cases, out: dir } => commands::eval(&cfg, cases, dir, out, err),
        Command::Dataset { stage } => dataset::run_stage(&cfg, stage, out, err),
        Command::Repl => commands::repl(&cfg, stdin, out, err),
    }
}

/// Process entry point used by the binary.
pub fn main_entry() -> i32 {
    let verbosity = std::env::args().filter(|a| a == "-v" || a == "--verbose").count()
        + std::env::args()
            .filter(|a| a.starts_with("-vv"))
            .map(|a| a.len() - 2)
            .sum::<usize>();
    let level = match verbosity {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .try_init();
    let stdin = std::io::stdin();
    let mut input = stdin.lock();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut err = std::io::stderr();
    let code = run(std::env::args_os(), &mut input, &mut out, &mut err);
    let _ = out.flush();
    code
}

fn write_io(e: std::io::Error) -> CliError {
    CliError::failure(format!("write failed: {e}"))
}
