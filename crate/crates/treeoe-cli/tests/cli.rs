//! End-to-end checks of the `treeoe` binary: output formats, determinism,
//! and the exit-code contract (0 ok, 1 violation, 2 usage).

use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treeoe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

/// Writes a fixture file unique to this test (tests run in one process but
/// in parallel threads, so the name carries the caller's label).
fn fixture(label: &str, contents: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("treeoe-cli-{}-{}", std::process::id(), label));
    std::fs::write(&path, contents).expect("temp file writable");
    path
}

const FIVE_POINT: &str = r#"{"n": 5, "gens": [[1,2,3,4,0], [2,3,4,0,1]]}"#;

#[test]
fn schreier_analyze_reports_the_five_point_action() {
    let file = fixture("five-analyze.json", FIVE_POINT);
    let out = run(&["schreier", "analyze", file.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let envelope: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(envelope["schemaVersion"], "1");
    assert_eq!(envelope["config"]["command"], "schreier analyze");
    let report = &envelope["report"];
    assert_eq!(report["transitive"], true);
    assert_eq!(report["index"], 5);
    assert_eq!(report["bipartite"], false);
    assert_eq!(report["evenTransitive"], true);
    assert_eq!(report["oddStabilizerWordFound"], true);
    assert_eq!(report["evenOrbitSize"], 5);
    assert_eq!(report["normal"], true);
    let lambda2 = report["lambda2ByValue"].as_f64().unwrap();
    assert!((lambda2 - (-0.25)).abs() < 1e-9, "lambda2 = {lambda2}");
    let gap = report["spectralGap"].as_f64().unwrap();
    assert!((gap - 1.25).abs() < 1e-9, "gap = {gap}");
}

#[test]
fn schreier_analyze_is_byte_deterministic() {
    let file = fixture("five-determinism.json", FIVE_POINT);
    let first = run(&["schreier", "analyze", file.to_str().unwrap()]);
    let second = run(&["schreier", "analyze", file.to_str().unwrap()]);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(exit_code(&first), 0);
}

#[test]
fn schreier_analyze_rejects_missing_and_malformed_input() {
    let out = run(&["schreier", "analyze", "/definitely/not/here.json"]);
    assert_eq!(exit_code(&out), 2);
    assert!(stdout(&out).is_empty());

    let bad = fixture("bad-perm.json", r#"{"n": 3, "gens": [[0,0,1], [1,2,0]]}"#);
    let out = run(&["schreier", "analyze", bad.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("generator"), "stderr: {}", stderr(&out));

    let intransitive = fixture("intransitive.json", r#"{"n": 2, "gens": [[0,1], [0,1]]}"#);
    let out = run(&["schreier", "analyze", intransitive.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn bruteforce_lemma_passes_and_requires_a_seed() {
    let out = run(&[
        "schreier",
        "bruteforce-lemma",
        "--points",
        "9",
        "--trials",
        "60",
        "--seed",
        "42",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let envelope: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(envelope["report"]["trials"], 60);
    assert_eq!(envelope["report"]["violations"], 0);
    assert_eq!(envelope["report"]["counterexample"], serde_json::Value::Null);

    let out = run(&["schreier", "bruteforce-lemma", "--points", "9", "--trials", "5"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn tower_analyze_emits_csv_with_decreasing_gaps() {
    let out = run(&[
        "tower", "analyze", "--base", "3", "--step", "3", "--depth", "3", "--exponents", "1,1",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    let preamble = lines.next().unwrap();
    assert!(preamble.starts_with("# {"));
    let header: serde_json::Value = serde_json::from_str(&preamble[2..]).unwrap();
    assert_eq!(header["schemaVersion"], "1");
    assert_eq!(header["config"]["exponents"], serde_json::json!([1, 1]));
    assert_eq!(lines.next().unwrap(), "level,size,bipartite,gap");
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    let mut previous_gap = f64::INFINITY;
    for (idx, row) in rows.iter().enumerate() {
        assert_eq!(row[0], (idx + 1).to_string());
        assert_eq!(row[1], 3u64.pow(idx as u32 + 1).to_string());
        assert_eq!(row[2], "false");
        let gap: f64 = row[3].parse().unwrap();
        let expected = 1.0 - (std::f64::consts::TAU / 3f64.powi(idx as i32 + 1)).cos();
        assert!((gap - expected).abs() < 1e-9, "row {idx}: gap {gap}");
        assert!(gap < previous_gap);
        previous_gap = gap;
    }
}

#[test]
fn tower_analyze_flags_bipartite_levels_and_bad_exponents() {
    let out = run(&[
        "tower", "analyze", "--base", "2", "--step", "2", "--depth", "1", "--exponents", "1,1",
    ]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr(&out).contains("bipartite"), "stderr: {}", stderr(&out));

    let out = run(&[
        "tower", "analyze", "--base", "9", "--step", "3", "--depth", "1", "--exponents", "3,3",
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(stdout(&out).is_empty());
}

#[test]
fn iso_verify_reports_clean_counts() {
    let out = run(&[
        "iso", "verify", "--rank", "2", "--radius", "4", "--samples", "5", "--seed", "11",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let envelope: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let report = &envelope["report"];
    for check in [
        "validator",
        "inverseRoundTrip",
        "sigmaLength",
        "sphereBijectivity",
        "cocycleIdentity",
    ] {
        assert!(report[check]["checked"].as_u64().unwrap() > 0, "{check} ran");
        assert_eq!(report[check]["violations"], 0, "{check} clean");
    }

    let repeat = run(&[
        "iso", "verify", "--rank", "2", "--radius", "4", "--samples", "5", "--seed", "11",
    ]);
    assert_eq!(out.stdout, repeat.stdout);
}

#[test]
fn oe_verify_checks_margin_and_passes_within_it() {
    let file = fixture("five-oe.json", FIVE_POINT);
    let out = run(&[
        "oe", "verify", "--rank", "2", "--radius", "6", "--subgroup",
        file.to_str().unwrap(), "--max-len", "2", "--samples", "3", "--seed", "17",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let envelope: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(envelope["report"]["intertwining"]["violations"], 0);
    assert_eq!(envelope["report"]["distancePreservation"]["violations"], 0);
    assert!(envelope["report"]["distancePreservation"]["checked"].as_u64().unwrap() > 0);

    let out = run(&[
        "oe", "verify", "--rank", "2", "--radius", "5", "--subgroup",
        file.to_str().unwrap(), "--max-len", "2", "--samples", "1", "--seed", "1",
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("margin"), "stderr: {}", stderr(&out));

    let out = run(&[
        "oe", "verify", "--rank", "3", "--radius", "8", "--subgroup",
        file.to_str().unwrap(), "--max-len", "2", "--samples", "1", "--seed", "1",
    ]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn correlate_exact_rows_match_the_known_values() {
    let out = run(&[
        "coloring", "correlate", "--action", "twisted", "--word", "ab",
        "--i", "1", "--j", "2", "--mc", "0",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# {"));
    assert_eq!(lines.next().unwrap(), "n,word,exact,mc,stderr");
    assert_eq!(lines.next().unwrap(), "2,ab,0,,");
    assert_eq!(lines.next(), None);

    let out = run(&[
        "coloring", "correlate", "--action", "twisted", "--word", "ab",
        "--i", "1", "--j", "4", "--mc", "0",
    ]);
    assert!(stdout(&out).lines().last().unwrap().starts_with("2,ab,0.2,"));
}

#[test]
fn correlate_series_walks_powers_of_the_word() {
    let out = run(&[
        "coloring", "correlate", "--action", "star", "--word", "ab",
        "--i", "1", "--j", "1", "--n-max", "4", "--mc", "0",
    ]);
    assert_eq!(exit_code(&out), 0);
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0], "0,1,0.2,,");
    assert_eq!(rows[1], "2,ab,0,,");
    assert!(rows[2].starts_with("4,abab,"));
    // (ab)^4 has the exact value 28/729 at (i, j) = (1, 1).
    let exact: f64 = rows[4].split(',').nth(2).unwrap().parse().unwrap();
    assert!((exact - 28.0 / 729.0).abs() < 1e-12, "row 8: {exact}");
}

#[test]
fn correlate_monte_carlo_is_seeded_and_close_to_exact() {
    let args = [
        "coloring", "correlate", "--action", "twisted", "--word", "ab",
        "--i", "1", "--j", "4", "--mc", "2000", "--seed", "5",
    ];
    let out = run(&args);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let row = text.lines().last().unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[0], "2");
    assert_eq!(fields[1], "ab");
    let exact: f64 = fields[2].parse().unwrap();
    let mc: f64 = fields[3].parse().unwrap();
    let se: f64 = fields[4].parse().unwrap();
    assert_eq!(exact, 0.2);
    assert!(se > 0.0);
    assert!((mc - exact).abs() <= 4.0 * se, "mc {mc} vs exact {exact} ± {se}");

    let repeat = run(&args);
    assert_eq!(out.stdout, repeat.stdout);
}

#[test]
fn correlate_usage_errors() {
    let out = run(&[
        "coloring", "correlate", "--action", "twisted", "--word", "ab",
        "--i", "1", "--j", "4", "--mc", "100",
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("--seed"), "stderr: {}", stderr(&out));
    assert!(stdout(&out).is_empty());

    let out = run(&[
        "coloring", "correlate", "--action", "twisted", "--word", "ab",
        "--i", "9", "--j", "4", "--mc", "0",
    ]);
    assert_eq!(exit_code(&out), 2);

    let out = run(&[
        "coloring", "correlate", "--action", "twisted", "--word", "xy",
        "--i", "1", "--j", "4", "--mc", "0",
    ]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn coloring_verify_runs_clean() {
    let out = run(&["coloring", "verify", "--samples", "100", "--seed", "3"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let envelope: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let report = &envelope["report"];
    for check in [
        "rainbowNeighborhoods",
        "rootEquivariance",
        "undo",
        "cocycleLength",
        "cocycleRelation",
        "multiplicativity",
    ] {
        assert!(report[check]["checked"].as_u64().unwrap() > 0, "{check} ran");
        assert_eq!(report[check]["violations"], 0, "{check} clean");
    }
}
