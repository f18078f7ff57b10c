//! The `energetics` binary: subcommands, files written and exit codes.

mod support;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use support::{data_path, repo_path};

fn energetics(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_energetics"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_to(scenario: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    energetics(&args)
}

fn fuzz_toml() -> std::path::PathBuf {
    data_path("fuzz.toml")
}

#[test]
fn validate_prints_the_scenario_digest() {
    let o = energetics(&["validate", "--scenario", fuzz_toml().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = energetics::load_scenario(&fuzz_toml()).unwrap();
    assert_eq!(stdout(&o).trim(), format!("ok {}", s.digest()));
}

#[test]
fn canonical_output_parses_to_the_same_scenario() {
    let o = energetics(&["validate", "--scenario", fuzz_toml().to_str().unwrap(), "--canonical"]);
    assert_eq!(code(&o), 0);
    let again = energetics::parse_scenario(&stdout(&o)).unwrap();
    assert_eq!(again, energetics::load_scenario(&fuzz_toml()).unwrap());
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&energetics(&[])), 1);
    assert_eq!(code(&energetics(&["frobnicate"])), 1);
    assert_eq!(code(&energetics(&["run", "--scenario", "x.toml"])), 1);
    let o = energetics(&["validate", "--scenario", "/nonexistent/scenario.toml"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("/nonexistent/scenario.toml"));
}

#[test]
fn help_exits_0() {
    let o = energetics(&["--help"]);
    assert_eq!(code(&o), 0);
    for sub in ["run", "validate", "compare", "audit"] {
        assert!(stdout(&o).contains(sub));
    }
}

#[test]
fn invalid_scenarios_exit_2_with_a_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "schema = \"energetics-scenario/1\"\nseed = \"seven\"\n").unwrap();
    let o = energetics(&["validate", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let text = fs::read_to_string(fuzz_toml())
        .unwrap()
        .replace("blueprint = \"lab\"", "blueprint = \"nursery\"");
    fs::write(&bad, text).unwrap();
    let o = energetics(&["validate", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("nursery"), "{}", stderr(&o));

    let out = dir.path().join("out");
    assert_eq!(code(&run_to(&bad, &out, &[])), 2);
    assert!(!out.join("metrics.csv").exists());
}

#[test]
fn run_writes_a_full_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run_to(&fuzz_toml(), &out, &["--weeks", "4", "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).starts_with("ran 4 weeks, seed 3, digest "));
    for f in [
        "metrics.csv",
        "summary.toml",
        "trades.jsonl",
        "journal.jsonl",
        "audit.jsonl",
        "stock.jsonl",
        "scenario.toml",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 5);
    let summary = energetics::report::read_summary(&out.join("summary.toml")).unwrap();
    assert_eq!((summary.seed, summary.weeks), (3, 4));
    assert_eq!(summary.final_drift, "0");
    // The scenario copy carries the overrides.
    let copy = energetics::load_scenario(&out.join("scenario.toml")).unwrap();
    assert_eq!((copy.seed, copy.weeks), (3, 4));
}

#[test]
fn zero_weeks_writes_header_only_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_eq!(code(&run_to(&fuzz_toml(), &out, &["--weeks", "0"])), 0);
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1);
    assert!(metrics.starts_with("week,"));
    let summary = energetics::report::read_summary(&out.join("summary.toml")).unwrap();
    assert_eq!(summary.initial_digest, summary.final_digest);
}

#[test]
fn comparing_a_run_with_itself_gives_zero_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, cmp) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("cmp"));
    assert_eq!(code(&run_to(&fuzz_toml(), &a, &["--weeks", "3"])), 0);
    assert_eq!(code(&run_to(&fuzz_toml(), &b, &["--weeks", "3"])), 0);
    let o = energetics(&[
        "compare",
        "--base",
        a.to_str().unwrap(),
        "--variant",
        b.to_str().unwrap(),
        "--out",
        cmp.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("no policy difference"));
    let deltas = fs::read_to_string(cmp.join("deltas.csv")).unwrap();
    assert_eq!(deltas.lines().count(), 4);
    for line in deltas.lines().skip(1) {
        assert!(line.split(',').skip(1).all(|c| c == "0.0000"), "{line}");
    }
    assert!(cmp.join("comparison.toml").exists());
}

#[test]
fn compare_refuses_different_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, cmp) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("cmp"));
    assert_eq!(code(&run_to(&fuzz_toml(), &a, &["--weeks", "2", "--seed", "1"])), 0);
    assert_eq!(code(&run_to(&fuzz_toml(), &b, &["--weeks", "2", "--seed", "2"])), 0);
    let o = energetics(&[
        "compare",
        "--base",
        a.to_str().unwrap(),
        "--variant",
        b.to_str().unwrap(),
        "--out",
        cmp.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("seeds differ"));
}

#[test]
fn compare_refuses_different_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let other = dir.path().join("other.toml");
    let text = fs::read_to_string(fuzz_toml())
        .unwrap()
        .replace("money = 80000", "money = 80001");
    fs::write(&other, text).unwrap();
    let (a, b, cmp) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("cmp"));
    assert_eq!(code(&run_to(&fuzz_toml(), &a, &["--weeks", "1"])), 0);
    assert_eq!(code(&run_to(&other, &b, &["--weeks", "1"])), 0);
    let o = energetics(&[
        "compare",
        "--base",
        a.to_str().unwrap(),
        "--variant",
        b.to_str().unwrap(),
        "--out",
        cmp.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("80001"), "{}", stderr(&o));
}

#[test]
fn compare_finds_the_event_week() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, cmp) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("cmp"));
    let base = repo_path("scenarios/reference.toml");
    let variant = repo_path("scenarios/reference_tax_x2.toml");
    assert_eq!(code(&run_to(&base, &a, &["--weeks", "28"])), 0);
    assert_eq!(code(&run_to(&variant, &b, &["--weeks", "28"])), 0);
    let o = energetics(&[
        "compare",
        "--base",
        a.to_str().unwrap(),
        "--variant",
        b.to_str().unwrap(),
        "--out",
        cmp.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "compared 28 weeks, event at week 26");
}

#[test]
fn audit_accepts_a_clean_journal_and_flags_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_eq!(code(&run_to(&fuzz_toml(), &out, &["--weeks", "2"])), 0);
    let journal = out.join("journal.jsonl");
    let stock = out.join("stock.jsonl");
    let o = energetics(&[
        "audit",
        "--journal",
        journal.to_str().unwrap(),
        "--stock",
        stock.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("drift 0"));

    // Drop one entry: the stock no longer reconciles.
    let text = fs::read_to_string(&journal).unwrap();
    let tampered = dir.path().join("tampered.jsonl");
    fs::write(
        &tampered,
        text.lines().skip(1).map(|l| format!("{l}\n")).collect::<String>(),
    )
    .unwrap();
    let o = energetics(&[
        "audit",
        "--journal",
        tampered.to_str().unwrap(),
        "--stock",
        stock.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);

    let o = energetics(&["audit", "--journal", "/nonexistent/journal.jsonl"]);
    assert_eq!(code(&o), 1);
}
