//! End-to-end runs of the `lgs` binary: report contents, exit codes,
//! machine-readable errors, and artifact determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn lgs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lgs"))
        .args(args)
        .output()
        .expect("the binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is text")
}

/// Parse the stderr of a failing run as the error object every failure
/// prints, returning its kind and message.
fn error_object(out: &Output) -> (String, String) {
    let text = String::from_utf8(out.stderr.clone()).expect("stderr is text");
    let value: serde_json::Value = serde_json::from_str(text.trim()).expect("stderr is JSON");
    let error = &value["error"];
    (
        error["kind"].as_str().expect("kind").to_string(),
        error["message"].as_str().expect("message").to_string(),
    )
}

/// The `rate estimate: X nats` line of a text report.
fn quoted_rate(report: &str) -> f64 {
    let line = report
        .lines()
        .find(|l| l.starts_with("rate estimate:"))
        .expect("report quotes a rate");
    line.split_whitespace()
        .nth(2)
        .expect("rate value")
        .parse()
        .expect("rate is a number")
}

fn repo_example(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../examples")
        .join(file)
}

#[test]
fn bracket_example_reports_the_quoted_growth() {
    let out = lgs(&["example", "dyck2", "--levels", "10", "--report", "csv"]);
    assert!(out.status.success(), "{out:?}");
    let csv = stdout(&out);
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("level,vertex_count,path_count,increment_estimate")
    );
    // 2^{n+1} - 1 vertices per level, so the rate settles on ln 2.
    for (n, expected) in [(1, 3u64), (2, 7), (5, 63), (10, 2047)] {
        assert!(
            csv.lines().any(|l| l.starts_with(&format!("{n},{expected},"))),
            "level {n} should have {expected} vertices:\n{csv}"
        );
    }
    let last = csv.lines().last().unwrap();
    let rate: f64 = last.rsplit(',').next().unwrap().parse().unwrap();
    assert!((rate - 0.6931).abs() < 0.01, "rate {rate} should be near ln 2");
}

#[test]
fn closers_coding_separates_faster_than_openers_coding() {
    let minus = lgs(&["example", "yminus", "--levels", "8"]);
    let plus = lgs(&["example", "yplus", "--levels", "8"]);
    assert!(minus.status.success(), "{minus:?}");
    assert!(plus.status.success(), "{plus:?}");
    let minus_report = stdout(&minus);
    let plus_report = stdout(&plus);
    // Exact level-8 sizes of the two relative presentations.
    assert!(minus_report.contains("1048832"), "{minus_report}");
    assert!(plus_report.contains("4097"), "{plus_report}");
    let fast = quoted_rate(&minus_report);
    let slow = quoted_rate(&plus_report);
    // Both converge from above (toward ln 4 and ln 2); the ordering is
    // already strict at this depth.
    assert!(
        fast > slow && slow > 0.0,
        "closers coding should separate faster: {fast} vs {slow}"
    );
    assert!(fast > 1.38, "closers-coded rate {fast} should exceed ln 4");
    assert!(slow < 1.0, "openers-coded rate {slow} should be below 1");
}

#[test]
fn two_block_certificate_verifies_from_a_document() {
    let path = repo_example("gm.json");
    let out = lgs(&["sse-split", path.to_str().unwrap(), "--levels", "5"]);
    assert!(out.status.success(), "{out:?}");
    let report = stdout(&out);
    assert!(report.contains("identities checked"), "{report}");
    assert!(report.contains("all hold"), "{report}");
}

#[test]
fn monoid_documents_load_and_match_the_builtin() {
    let path = repo_example("dyck2.json");
    let out = lgs(&[
        "canonical",
        path.to_str().unwrap(),
        "--levels",
        "5",
        "--report",
        "csv",
    ]);
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).contains("5,63,"), "{}", stdout(&out));
}

#[test]
fn malformed_documents_name_the_offending_cell() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"kind":"monoid","openers":["a"],"closers":["b"],"rules":[["maybe"]]}"#,
    )
    .unwrap();
    let out = lgs(&["canonical", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let (kind, message) = error_object(&out);
    assert_eq!(kind, "validation");
    assert!(message.contains("rules[0][0]"), "{message}");
}

#[test]
fn unknown_names_are_refused_with_the_builtin_list() {
    let out = lgs(&["canonical", "nosuch"]);
    assert_eq!(out.status.code(), Some(2));
    let (kind, message) = error_object(&out);
    assert_eq!(kind, "validation");
    assert!(message.contains("gm") && message.contains("dyck2"), "{message}");
}

#[test]
fn oversized_builds_are_refused_not_attempted() {
    // Far past any feasible depth: the builder's own ceiling refuses it.
    let out = lgs(&["canonical", "dyck2", "--levels", "40"]);
    assert_eq!(out.status.code(), Some(4), "{out:?}");
    let (kind, _) = error_object(&out);
    assert_eq!(kind, "resource");

    // A tight explicit budget refuses even a feasible depth up front.
    let out = lgs(&["canonical", "dyck2", "--levels", "10", "--budget", "100"]);
    assert_eq!(out.status.code(), Some(4), "{out:?}");
    let (kind, message) = error_object(&out);
    assert_eq!(kind, "resource");
    assert!(message.contains("budget of 100"), "{message}");
}

#[test]
fn artifacts_are_byte_identical_across_runs() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    for dir in [&first, &second] {
        let out = lgs(&[
            "example",
            "gm",
            "--levels",
            "6",
            "--report",
            "csv",
            "--out",
            dir.path().to_str().unwrap(),
            "--export",
            "json",
        ]);
        assert!(out.status.success(), "{out:?}");
    }
    for file in ["gm-report.csv", "gm.json"] {
        let a = std::fs::read(first.path().join(file)).unwrap();
        let b = std::fs::read(second.path().join(file)).unwrap();
        assert_eq!(a, b, "{file} should not vary between runs");
    }
}

#[test]
fn single_argument_pair_uses_the_builtin_ambient() {
    let out = lgs(&["pair", "yminus", "--levels", "4", "--report", "csv"]);
    assert!(out.status.success(), "{out:?}");
    let csv = stdout(&out);
    for (n, expected) in [(1, 10u64), (2, 68), (3, 392), (4, 2064)] {
        assert!(
            csv.lines().any(|l| l.starts_with(&format!("{n},{expected},"))),
            "level {n} should have {expected} pair vertices:\n{csv}"
        );
    }
}

#[test]
fn word_class_refinement_counts_label_paths() {
    let out = lgs(&["pairword", "gm", "--levels", "10", "--report", "csv"]);
    assert!(out.status.success(), "{out:?}");
    // Fibonacci growth: 233 refined vertices at depth 10, one per path.
    assert!(stdout(&out).contains("10,233,233,"), "{}", stdout(&out));
}

#[test]
fn wildcard_extensions_parse_their_count() {
    let out = lgs(&["separation", "gammaK=1", "--levels", "3"]);
    assert!(out.status.success(), "{out:?}");
    let out = lgs(&["separation", "gammaK=0", "--levels", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn approximate_mode_flags_its_reports() {
    let out = lgs(&["canonical", "gm", "--levels", "4", "--mode", "approx"]);
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).contains("[approximate build"), "{}", stdout(&out));
}

#[test]
fn graph_export_requires_an_output_directory() {
    let out = lgs(&["canonical", "gm", "--levels", "4", "--export", "dot"]);
    assert_eq!(out.status.code(), Some(2));
    let (_, message) = error_object(&out);
    assert!(message.contains("--out"), "{message}");
}

#[test]
fn splitting_a_monoid_shift_is_refused() {
    let out = lgs(&["sse-split", "dyck2", "--levels", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let (kind, message) = error_object(&out);
    assert_eq!(kind, "validation");
    assert!(message.contains("finite-state"), "{message}");
}
