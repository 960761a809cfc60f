use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_circle-lab"));
    c.env_remove("CIRCLE_LAB_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn lines(out: &Output) -> Vec<serde_json::Value> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).expect("each line is JSON"))
        .collect()
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("circle-lab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn params_example() {
    let out = run(&["params", "--k", "2", "--X", "1e6", "--theta", "0.85", "--delta", "0.005"]);
    assert_eq!(out.status.code(), Some(0));
    let v = lines(&out);
    assert_eq!(v[0], serde_json::json!({"schema": 1}));
    assert_eq!(v[1]["t_k"], 3);
    assert_eq!(v[1]["K"], 36);
    assert_eq!(v[1]["R"], 24);
}

#[test]
fn rho_example() {
    let out = run(&["count", "rho", "--k", "2", "--s", "5", "--X", "13", "--Y", "4", "--n", "845"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(lines(&out)[1]["raw"], 1);
}

#[test]
fn classify_half_is_a_major_centre() {
    let out = run(&["classify", "--alpha", "0.5", "--k", "2", "--X", "1e5", "--theta", "0.85"]);
    let v = lines(&out);
    assert_eq!(v[1]["label"], "major");
    assert_eq!(v[1]["q"], 2);
}

#[test]
fn floats_carry_seventeen_significant_digits() {
    let out = run(&["params"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let y = text.split("\"Y\":").nth(1).unwrap().split(',').next().unwrap();
    let mantissa = y.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17, "{y}");
}

#[test]
fn unknown_flag_prints_usage_and_exits_one() {
    let out = run(&["params", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn input_errors_exit_one() {
    assert_eq!(run(&["classify", "--alpha", "0.1", "--X", "10", "--theta", "0.3"]).status.code(), Some(1));
    assert_eq!(run(&["series", "--k", "1", "--n", "10"]).status.code(), Some(1));
    assert_eq!(run(&["bounds", "check", "--name", "nope"]).status.code(), Some(1));
}

#[test]
fn budget_errors_exit_two() {
    let out = run(&["vinogradov", "--t", "7", "--X", "1000"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn every_subcommand_has_a_dry_run() {
    let cases: &[&[&str]] = &[
        &["params"],
        &["sieve"],
        &["expsum", "--alpha", "0.1"],
        &["classify", "--alpha", "0.1"],
        &["series", "--n", "29"],
        &["integral", "--n", "500000000"],
        &["count", "rho", "--n", "845"],
        &["count", "moment8", "--z", "1,2"],
        &["meanvalue", "--t", "2"],
        &["vinogradov", "--t", "7", "--X", "1000"],
        &["scan"],
        &["bounds", "check", "--name", "prop23", "--alpha", "0.1"],
        &["bounds", "survey"],
        &["vaughan", "--alpha", "0.1"],
    ];
    for args in cases {
        let mut full = vec!["--dry-run"];
        full.extend_from_slice(args);
        let out = run(&full);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        let v = lines(&out);
        assert_eq!(v.len(), 2, "{args:?}");
        assert_eq!(v[1]["dry_run"], true);
        assert_eq!(v[1]["params"]["K"], 36);
    }
}

#[test]
fn identical_configs_give_identical_bytes() {
    let args = ["bounds", "survey", "--X", "1e4", "--delta", "0.001", "--samples", "40", "--seed", "11"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["bounds", "survey", "--X", "1e4", "--delta", "0.001", "--samples", "40", "--seed", "12"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn thread_count_does_not_change_output() {
    let args = ["expsum", "--X", "1e4", "--grid", "64"];
    let one = bin().args(args).env("CIRCLE_LAB_THREADS", "1").output().unwrap();
    let four = bin().args(args).env("CIRCLE_LAB_THREADS", "4").output().unwrap();
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
    let bad = bin().args(args).env("CIRCLE_LAB_THREADS", "lots").output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn output_file_matches_stdout() {
    let path = tmp("scan.jsonl");
    let args = ["scan", "--X", "200", "--s", "6", "--theta", "0.8"];
    let direct = run(&args);
    let mut with_file: Vec<&str> = vec!["--output", path.to_str().unwrap()];
    with_file.extend_from_slice(&args);
    let out = run(&with_file);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read(&path).unwrap(), direct.stdout);
}

#[test]
fn csv_has_header_and_rows() {
    let out = run(&["--format", "csv", "classify", "--grid", "8", "--X", "1e4", "--delta", "0.001"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "alpha,label,a,q,err");
    assert_eq!(rows.len(), 9);
    assert!(rows[1..].iter().all(|r| r.split(',').count() == 5));
}

#[test]
fn prime_cache_is_reused() {
    let path = tmp("window.bin");
    let args = ["sieve", "--X", "1e5", "--theta", "0.7", "--prime-cache", path.to_str().unwrap()];
    let first = run(&args);
    assert!(path.exists());
    let second = run(&args);
    assert_eq!(first.stdout, second.stdout);
    std::fs::write(&path, b"garbage").unwrap();
    assert_eq!(run(&args).status.code(), Some(1));
}
