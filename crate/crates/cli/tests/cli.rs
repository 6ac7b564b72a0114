use std::path::PathBuf;
use std::process::{Command, Output};

fn consent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_consent"))
        .args(args)
        .env_remove("CONSENT_STEP_DURATION")
        .output()
        .unwrap()
}

fn fixture(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(rel)
        .to_string_lossy()
        .into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn monitor_args(access: &str) -> Vec<String> {
    vec![
        "monitor".into(),
        fixture("monitor/manifest.consent"),
        fixture("monitor/consents.jsonl"),
        fixture(&format!("monitor/{access}")),
    ]
}

#[test]
fn run_passing_script() {
    let out = consent(&["run", &fixture("multiclass.consent")]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(
        text.lines().filter(|l| l.starts_with("PASS line")).count(),
        2,
        "{text}"
    );
    assert!(text.contains(
        "PASS line 12: assume true access BluetoothLocation datasubject1 Advertiser T1 T3"
    ));
}

#[test]
fn run_inverted_assume_fails() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("flipped.consent");
    let text = std::fs::read_to_string(fixture("legacy.consent"))
        .unwrap()
        .replace(
            "assume false collect TechnicalData",
            "assume true collect TechnicalData",
        );
    std::fs::write(&script, text).unwrap();
    let json = dir.path().join("report.json");
    let out = consent(&[
        "run",
        script.to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("FAIL line 12"), "{}", stdout(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
    assert_eq!(report["summary"]["assumes"], 3);
    assert_eq!(report["summary"]["assumes_failed"], 1);
    assert!(stdout(&out).contains("2/3 assumes passed"));
}

#[test]
fn run_errors_exit_two() {
    let out = consent(&["run", "/nonexistent/script.consent"]);
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.consent");
    std::fs::write(&bad, "new data A\nassume maybe collect A s R\n").unwrap();
    let out = consent(&["run", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    std::fs::write(&bad, "new data A\nwithdraw :nothing\n").unwrap();
    assert_eq!(
        consent(&["run", bad.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn monitor_clean_and_injected() {
    let args = monitor_args("access-clean.jsonl");
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = consent(&args);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("0 violations (clean)"));

    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("violations.json");
    let mut args = monitor_args("access-injected.jsonl");
    args.extend(["--json".into(), json.to_string_lossy().into_owned()]);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = consent(&args);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert_eq!(
        text.lines().filter(|l| l.starts_with("VIOLATION")).count(),
        3
    );
    assert_eq!(
        text.lines()
            .filter(|l| l.ends_with("-> WithdrawnRetro"))
            .count(),
        1
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(report["clean"], false);
    assert_eq!(report["summary"]["violations"], 3);
    assert_eq!(report["violations"].as_array().unwrap().len(), 3);
    assert_eq!(report["summary"]["by_reason"]["WithdrawnRetro"], 1);
}

#[test]
fn monitor_step_duration_and_epoch() {
    let mut args = monitor_args("access-injected.jsonl");
    args.extend([
        "--epoch".into(),
        "2024-03-01T00:00:00Z".into(),
        "--step-duration".into(),
        "1week".into(),
    ]);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let weekly = consent(&args);
    assert!(matches!(weekly.status.code(), Some(0 | 1)));
    assert!(stdout(&weekly).contains("54 events scanned"));

    let args = monitor_args("access-clean.jsonl");
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = Command::new(env!("CARGO_BIN_EXE_consent"))
        .args(&args)
        .env("CONSENT_STEP_DURATION", "soon")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn monitor_rejects_unordered_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("access.jsonl");
    let clean = std::fs::read_to_string(fixture("monitor/access-clean.jsonl")).unwrap();
    let mut lines: Vec<&str> = clean.lines().collect();
    lines.swap(0, 5);
    std::fs::write(&log, lines.join("\n")).unwrap();
    let out = consent(&[
        "monitor",
        &fixture("monitor/manifest.consent"),
        &fixture("monitor/consents.jsonl"),
        log.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("access log line"));
}

#[test]
fn simulate_writes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("steps.csv");
    let out = consent(&[
        "simulate",
        "--scenario",
        "steps",
        "--steps",
        "10",
        "--seed",
        "1",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("scenario,step,rep,micros"));
    assert_eq!(lines.count(), 50);

    let out = consent(&["simulate", "--scenario", "realistic", "--steps", "365"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).lines().count(), 1 + 365 * 5);
}

#[test]
fn simulate_usage_errors() {
    assert_eq!(
        consent(&["simulate", "--scenario", "steps", "--steps", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        consent(&["simulate", "--scenario", "yearly", "--steps", "3"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(consent(&["simulate"]).status.code(), Some(2));
}

fn grid(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter(|l| l.trim_start().starts_with('T'))
        .map(|l| {
            let mut parts = l.split_whitespace();
            let step = parts.next().unwrap().to_owned();
            (step, parts.collect())
        })
        .collect()
}

#[test]
fn explain_retroactively_withdrawn_consent() {
    let out = consent(&[
        "explain",
        &fixture("overlapping.consent"),
        "--consent",
        "consent2",
        "--horizon",
        "6",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let rows = grid(&stdout(&out));
    assert_eq!(rows.len(), 6);
    for (step, cells) in &rows[4..] {
        assert!(!cells.contains('#'), "{step}: {cells}");
    }
    assert_eq!(rows[3].1, ".###--");
}

#[test]
fn explain_retroactive_grant() {
    let out = consent(&[
        "explain",
        &fixture("multiclass.consent"),
        "--consent",
        ":consent2",
        "--horizon",
        "5",
    ]);
    let rows = grid(&stdout(&out));
    assert_eq!(rows[1].1, "..---");
    for (i, (_, cells)) in rows.iter().enumerate().skip(2) {
        assert_eq!(cells.matches('#').count(), i + 1);
    }
}

#[test]
fn explain_single_cell_and_unknown_label() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("one.consent");
    std::fs::write(&script, "new data A\ngrant A s R :c\n").unwrap();
    let out = consent(&[
        "explain",
        script.to_str().unwrap(),
        "--consent",
        "c",
        "--horizon",
        "1",
    ]);
    assert_eq!(grid(&stdout(&out)), vec![("T1".to_owned(), "#".to_owned())]);

    let out = consent(&[
        "explain",
        script.to_str().unwrap(),
        "--consent",
        "missing",
        "--horizon",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
