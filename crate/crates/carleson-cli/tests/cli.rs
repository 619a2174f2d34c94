use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_carleson"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should run")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("carleson-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).expect("scratch dir");
    dir.join(name)
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn generate_then_analyze_round_trips() {
    let seq = scratch("radial.json");
    let out = run(&[
        "generate",
        "radial",
        "--ratio",
        "0.5",
        "--count",
        "12",
        "--out",
        seq.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));

    let report = scratch("report.json");
    let csv = scratch("windows.csv");
    let out = run(&[
        "analyze",
        seq.to_str().unwrap(),
        "--partition",
        "good",
        "--report",
        report.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("verdict: PASS"), "{stdout}");
    assert!(stdout.contains("PASS carleson_bound"), "{stdout}");

    let report_json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(report_json["all_pass"], serde_json::Value::Bool(true));
    assert_eq!(report_json["point_count"], serde_json::json!(12));

    let csv_text = fs::read_to_string(&csv).unwrap();
    let mut lines = csv_text.lines();
    assert_eq!(
        lines.next(),
        Some("direction_angle,height,e_w_count,f_w_count,e_w_mass,e_w_bound,f_w_lhs,f_w_rhs")
    );
    assert_eq!(lines.count(), 12, "one row per swept window");
}

#[test]
fn failing_sequence_exits_one_and_names_the_clause() {
    let seq = scratch("stacked.json");
    let out = run(&[
        "generate",
        "noncarleson",
        "--count",
        "150",
        "--out",
        seq.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));

    let out = run(&["analyze", seq.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = text(&out.stderr);
    assert!(stderr.contains("carleson_norm_cap"), "{stderr}");
    assert!(text(&out.stdout).contains("verdict: FAIL"));
}

#[test]
fn missing_input_exits_two() {
    let out = run(&["analyze", "/definitely/not/here.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("cannot read"));
}

#[test]
fn invalid_gamma_exits_two() {
    let seq = scratch("radial-for-gamma.json");
    run(&[
        "generate",
        "radial",
        "--count",
        "6",
        "--out",
        seq.to_str().unwrap(),
    ]);
    let out = run(&["analyze", seq.to_str().unwrap(), "--gamma", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("gamma"));
}

#[test]
fn unknown_subcommand_exits_two() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generate_alias_matches_primary_name() {
    let a = run(&["generate", "noncarleson", "--count", "7"]);
    let b = run(&["generate", "nonquarleson", "--count", "7"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn generate_random_is_deterministic() {
    let args = ["generate", "random", "--count", "15", "--delta", "0.2", "--seed", "42"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0), "{}", text(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let seq = carleson::PointSequence::from_json_str(&text(&a.stdout)).unwrap();
    assert_eq!(seq.points().len(), 15);
}

#[test]
fn sweep_emits_one_row_per_window() {
    let seq = scratch("radial-sweep.json");
    run(&[
        "generate",
        "radial",
        "--count",
        "12",
        "--out",
        seq.to_str().unwrap(),
    ]);
    let out = run(&["sweep", seq.to_str().unwrap(), "--levels", "8"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    let mut lines = stdout.lines();
    assert_eq!(
        lines.next(),
        Some("direction_angle,height,e_w_count,f_w_count,e_w_mass,e_w_bound,f_w_mass")
    );
    // The radial family sits on one boundary direction, so eight heights
    // give eight rows.
    assert_eq!(lines.count(), 8);
    let csv = scratch("sweep.csv");
    let out = run(&[
        "sweep",
        seq.to_str().unwrap(),
        "--levels",
        "8",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read_to_string(&csv).unwrap(), stdout);
}
