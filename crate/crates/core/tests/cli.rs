// SPDX-License-Identifier: Apache-2.0

mod common;

use std::path::Path;
use std::process::Command;

use common::{data, fixture};
use netcfg::agent::{ConfigRepo, ResultLog, SessionStatus};
use netcfg::cli::{self, EXIT_EXHAUSTED, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};
use netcfg::dataset::{read_dataset, QuestionConfigPair, RequirementConfigPair};
use netcfg::metrics::MetricsRecord;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

/// Runs the CLI in-process. Never reads process env for the backend because
/// every call passes `--backend-url` explicitly.
fn run(args: &[&str]) -> Run {
    run_with_stdin(args, "")
}

fn run_with_stdin(args: &[&str], stdin: &str) -> Run {
    let mut input = stdin.as_bytes();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("netcfg").chain(args.iter().copied());
    let code = cli::run(argv, &mut input, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn mock_url() -> String {
    format!("mock:{}", data("mock_script.toml").display())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn translate_prints_the_approved_config() {
    let url = mock_url();
    let r = run(&[
        "translate",
        "--backend-url",
        &url,
        "--text",
        "Enable OSPF routing on all interfaces",
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert_eq!(
        r.stdout,
        "enable\nconfigure terminal\nrouter ospf 1\nnetwork 192.168.1.0 0.0.0.255 area 0\n"
    );
    assert!(r.stderr.contains("status=approved iterations=1"));
}

#[test]
fn translate_reads_intent_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("intent.txt");
    std::fs::write(&f, "Set the device hostname to edge1\n").unwrap();
    let url = mock_url();
    let r = run(&[
        "translate",
        "--backend-url",
        &url,
        "--file",
        p(&f),
        "--form",
        "requirement",
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert!(r.stdout.contains("hostname edge1"));
}

#[test]
fn exhausted_and_failed_sessions_map_to_exit_codes() {
    let url = mock_url();
    let r = run(&["translate", "--backend-url", &url, "--text", "teleport packets"]);
    assert_eq!(r.code, EXIT_EXHAUSTED);
    assert!(r.stderr.contains("status=exhausted iterations=3"));
    assert!(r.stderr.contains("teleport packets now"));

    let r = run(&[
        "translate",
        "--backend-url",
        &url,
        "--max-iter",
        "1",
        "--text",
        "teleport packets",
    ]);
    assert_eq!(r.code, EXIT_EXHAUSTED);
    assert!(r.stderr.contains("iterations=1"));

    let r = run(&["translate", "--backend-url", &url, "--text", "Recover from the outage"]);
    assert_eq!(r.code, EXIT_FAILURE);
    assert!(r.stdout.is_empty());
    assert!(r.stderr.contains("connection reset by peer"));
}

#[test]
fn unreachable_backend_exits_1_with_transport_error() {
    let dead = common::dead_url();
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("netcfg.toml");
    std::fs::write(&cfg, "retries = 0\n").unwrap();
    let r = run(&[
        "translate",
        "--config",
        p(&cfg),
        "--backend-url",
        &dead,
        "--text",
        "Enable OSPF",
    ]);
    assert_eq!(r.code, EXIT_FAILURE);
    assert!(r.stderr.contains("transport error"), "{}", r.stderr);
}

#[test]
fn usage_errors_exit_64() {
    let url = mock_url();
    assert_eq!(
        run(&["translate", "--text", "x", "--backend-url", "mock:/no/such/script.toml"]).code,
        EXIT_USAGE
    );
    assert_eq!(run(&["translate", "--backend-url", &url]).code, EXIT_USAGE);
    assert_eq!(
        run(&["translate", "--backend-url", &url, "--text", "x", "--form", "poem"]).code,
        EXIT_USAGE
    );
    assert_eq!(
        run(&["translate", "--backend-url", &url, "--text", "x", "--max-iter", "0"]).code,
        EXIT_USAGE
    );
    assert_eq!(run(&["frobnicate"]).code, EXIT_USAGE);
    assert_eq!(
        run(&["dataset", "shred", "--input", "a", "--output", "b"]).code,
        EXIT_USAGE
    );
    assert_eq!(
        run(&["--format", "xml", "verify", p(&fixture("oam_rfi.cfg"))]).code,
        EXIT_USAGE
    );
    let help = run(&["--help"]);
    assert_eq!(help.code, EXIT_OK);
    assert!(help.stdout.contains("translate"));
}

#[test]
fn verify_exit_codes_and_listing() {
    let r = run(&["verify", p(&fixture("oam_rfi.cfg"))]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stdout);
    assert_eq!(r.stdout.lines().count(), 5);
    assert!(r.stdout.ends_with("syntax_score=1 approved=true\n"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "enable\nconfigure terminal\nfrobnicate all ports\n").unwrap();
    let r = run(&["verify", p(&bad)]);
    assert_eq!(r.code, EXIT_FAILURE);
    assert!(r.stdout.contains("high syntax 0:2"), "{}", r.stdout);

    let empty = dir.path().join("empty.cfg");
    std::fs::write(&empty, "\n\n").unwrap();
    assert_eq!(run(&["verify", p(&empty)]).code, EXIT_USAGE);
    assert_eq!(run(&["verify", p(&dir.path().join("missing.cfg"))]).code, EXIT_USAGE);
}

#[test]
fn eval_writes_report_and_flags_failed_cases() {
    let dir = tempfile::tempdir().unwrap();
    let cases = dir.path().join("cases.jsonl");
    std::fs::write(
        &cases,
        concat!(
            "{\"id\": \"a\", \"text\": \"Enable OSPF routing\", \"mandatory_patterns\": [\"router ospf <p:integer-range>\"]}\n",
            "{\"id\": \"b\", \"text\": \"Survive the outage\", \"mandatory_patterns\": [\"hostname <n:word>\"]}\n",
            "{\"id\": \"c\", \"text\": \"Set the hostname\", \"mandatory_patterns\": [\"hostname <n:word>\"]}\n",
        ),
    )
    .unwrap();
    let out = dir.path().join("report");
    let url = mock_url();
    let r = run(&[
        "eval",
        p(&cases),
        "--out",
        p(&out),
        "--backend-url",
        &url,
        "--jobs",
        "2",
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert!(r.stdout.contains("cases: 3  approved: 2  failed: 1"), "{}", r.stdout);
    assert!(r.stderr.contains("case b failed"));

    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("correct,2,"));
    assert!(rows[2].starts_with("incorrect,1,"));

    let records: Vec<MetricsRecord> = std::fs::read_to_string(out.join("records.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let b = records.iter().find(|r| r.intent_id == "b").unwrap();
    assert!(b.failed);
    assert_eq!((b.syntax_score.as_i8(), b.goal_score.as_i8()), (-1, -1));
    assert_eq!(b.status, SessionStatus::Failed);
    assert!(records.iter().filter(|r| r.intent_id != "b").all(|r| !r.failed));

    assert_eq!(
        run(&["eval", p(&dir.path().join("none.jsonl")), "--backend-url", &url]).code,
        EXIT_USAGE
    );
}

#[test]
fn dataset_clean_reports_removed_count() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("pairs.jsonl");
    std::fs::write(
        &input,
        concat!(
            "{\"requirement\": \"Enable OSPF routing on all interfaces\", \"configuration\": \"router ospf 1\"}\n",
            "{\"requirement\": \"Describe the chassis\", \"configuration\": \"N/A\"}\n",
        ),
    )
    .unwrap();
    let output = dir.path().join("clean.csv");
    let r = run(&["dataset", "clean", "--input", p(&input), "--output", p(&output)]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert_eq!(r.stdout, "input=2\nkept=1\nremoved=1\n");
    let kept: Vec<RequirementConfigPair> = read_dataset(&output).unwrap();
    assert_eq!(
        kept,
        vec![RequirementConfigPair::new(
            "Enable OSPF routing on all interfaces",
            "router ospf 1"
        )]
    );
}

#[test]
fn staged_dataset_run_matches_all() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    let guide = data("sample_guide.txt");
    let url = mock_url();
    let stage = |args: &[&str]| {
        let mut v = vec!["dataset"];
        v.extend_from_slice(args);
        v.extend_from_slice(&["--backend-url", &url]);
        let r = run(&v);
        assert_eq!(r.code, EXIT_OK, "{:?}: {}", args, r.stderr);
        r.stdout
    };
    assert_eq!(
        stage(&["extract", "--input", p(&guide), "--output", p(&d("pages.jsonl"))]),
        "pages=5\n"
    );
    stage(&[
        "chunk",
        "--input",
        p(&d("pages.jsonl")),
        "--output",
        p(&d("chunks.jsonl")),
    ]);
    stage(&[
        "enhance",
        "--input",
        p(&d("chunks.jsonl")),
        "--output",
        p(&d("pairs.jsonl")),
    ]);
    stage(&["clean", "--input", p(&d("pairs.jsonl")), "--output", p(&d("req.csv"))]);
    stage(&["refine", "--input", p(&d("req.csv")), "--output", p(&d("q.csv"))]);

    let all = stage(&["all", "--input", p(&guide), "--output", p(&d("all"))]);
    assert!(all.contains("pages=5\n"));
    assert!(all.contains("removed=2\n"));
    assert!(all.contains("kept=4\n"));

    let staged_req = std::fs::read(d("req.csv")).unwrap();
    let staged_q = std::fs::read(d("q.csv")).unwrap();
    assert_eq!(staged_req, std::fs::read(d("all/requirements.csv")).unwrap());
    assert_eq!(staged_q, std::fs::read(d("all/questions.csv")).unwrap());
    let questions: Vec<QuestionConfigPair> = read_dataset(&d("q.csv")).unwrap();
    assert_eq!(questions[0].question, "How do I enable OSPF routing on all interfaces?");
    assert!(questions.iter().all(|q| q.question.ends_with('?')));
}

#[test]
fn dataset_records_format() {
    let dir = tempfile::tempdir().unwrap();
    let url = mock_url();
    let guide = data("sample_guide.txt");
    let out = dir.path().join("all");
    let r = run(&[
        "dataset",
        "all",
        "--format",
        "records",
        "--input",
        p(&guide),
        "--output",
        p(&out),
        "--backend-url",
        &url,
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let reqs: Vec<RequirementConfigPair> = read_dataset(&out.join("requirements.jsonl")).unwrap();
    assert_eq!(reqs.len(), 4);
    assert!(reqs.iter().all(|p| p.provenance.is_some()));
}

#[test]
fn repo_and_log_options() {
    let dir = tempfile::tempdir().unwrap();
    let repo = dir.path().join("repo");
    let log = dir.path().join("sessions.jsonl");
    let url = mock_url();
    for _ in 0..2 {
        let r = run(&[
            "translate",
            "--backend-url",
            &url,
            "--repo",
            p(&repo),
            "--log",
            p(&log),
            "--id",
            "ospf",
            "--text",
            "Enable OSPF routing on all interfaces",
        ]);
        assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
        assert!(r.stderr.contains("stored="));
    }
    let r = run(&[
        "translate",
        "--backend-url",
        &url,
        "--repo",
        p(&repo),
        "--log",
        p(&log),
        "--id",
        "tp",
        "--text",
        "teleport",
    ]);
    assert_eq!(r.code, EXIT_EXHAUSTED);

    let repo = ConfigRepo::new(&repo);
    assert_eq!(repo.versions("ospf").unwrap(), vec![1, 2]);
    assert!(repo.versions("tp").unwrap().is_empty());
    let records = ResultLog::read_all(&log).unwrap();
    assert_eq!(records.len(), 3);
    assert_eq!(records[2].result.status, SessionStatus::Exhausted);
}

#[test]
fn repl_translates_each_line() {
    let url = mock_url();
    let r = run_with_stdin(
        &["repl", "--backend-url", &url],
        "Enable OSPF routing\n\nSet the hostname\nquit\nAllow SNMP polling\n",
    );
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert!(r.stdout.contains("router ospf 1"));
    assert!(r.stdout.contains("hostname edge1"));
    assert!(!r.stdout.contains("snmp-server"));
    assert_eq!(r.stderr.matches("status=approved").count(), 2);
}

fn bin(args: &[&str], envs: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_netcfg"));
    cmd.args(args)
        .env_remove("NETCFG_BACKEND_URL")
        .env_remove("NETCFG_GRAMMAR");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().unwrap();
    Run {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

#[test]
fn settings_precedence_flag_over_env_over_file() {
    let dir = tempfile::tempdir().unwrap();
    // A grammar without the OAM entries rejects the OAM remote-failure config.
    let full = std::fs::read_to_string(data("ios.grammar")).unwrap();
    let no_oam: String = full
        .lines()
        .filter(|l| !l.starts_with("ethernet oam"))
        .collect::<Vec<_>>()
        .join("\n");
    let small = dir.path().join("no_oam.grammar");
    std::fs::write(&small, no_oam).unwrap();
    std::fs::copy(data("mock_script.toml"), dir.path().join("script.toml")).unwrap();

    // File: relative paths resolve against the file's directory.
    let cfg = dir.path().join("netcfg.toml");
    std::fs::write(
        &cfg,
        "backend_url = \"mock:script.toml\"\ngrammar = \"no_oam.grammar\"\nmax_iterations = 1\n",
    )
    .unwrap();
    let table = fixture("oam_rfi.cfg");

    // File alone.
    assert_eq!(bin(&["verify", p(&table), "--config", p(&cfg)], &[]).code, EXIT_FAILURE);
    // Env beats file.
    let full_path = data("ios.grammar");
    let envs = [("NETCFG_GRAMMAR", p(&full_path))];
    assert_eq!(bin(&["verify", p(&table), "--config", p(&cfg)], &envs).code, EXIT_OK);
    // Flag beats env.
    assert_eq!(
        bin(
            &["verify", p(&table), "--config", p(&cfg), "--grammar", p(&small)],
            &envs
        )
        .code,
        EXIT_FAILURE
    );

    // Backend: file gives a working mock with one iteration.
    let r = bin(&["translate", "--config", p(&cfg), "--text", "teleport"], &[]);
    assert_eq!(r.code, EXIT_EXHAUSTED, "{}", r.stderr);
    assert!(r.stderr.contains("iterations=1"));
    // Env beats file: a broken mock path is a usage error.
    let broken = [("NETCFG_BACKEND_URL", "mock:/no/such/script.toml")];
    assert_eq!(
        bin(&["translate", "--config", p(&cfg), "--text", "Enable OSPF"], &broken).code,
        EXIT_USAGE
    );
    // Flag beats env.
    let url = mock_url();
    let r = bin(
        &[
            "translate",
            "--config",
            p(&cfg),
            "--backend-url",
            &url,
            "--text",
            "Enable OSPF",
        ],
        &broken,
    );
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    // --max-iter beats the file's max_iterations.
    let r = bin(
        &[
            "translate",
            "--config",
            p(&cfg),
            "--max-iter",
            "2",
            "--text",
            "teleport",
        ],
        &[],
    );
    assert!(r.stderr.contains("iterations=2"), "{}", r.stderr);

    // No backend anywhere.
    assert_eq!(bin(&["translate", "--text", "Enable OSPF"], &[]).code, EXIT_USAGE);
    // Unknown keys in the file are rejected.
    let typo = dir.path().join("typo.toml");
    std::fs::write(&typo, "max_iteration = 2\n").unwrap();
    assert_eq!(bin(&["verify", p(&table), "--config", p(&typo)], &[]).code, EXIT_USAGE);
}
