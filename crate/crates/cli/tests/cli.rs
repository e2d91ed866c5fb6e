use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_rsbtrack");

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(name)
}

fn rsbtrack(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("RSBTRACK_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn simulate(name: &str, out: &Path) -> Output {
    rsbtrack(&["simulate", scenario(name).to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    for (name, code) in [
        ("clean", 0),
        ("sponge-in-cavity", 0),
        ("new-equipment", 0),
        ("pocket-carry-out", 0),
        ("minimal", 0),
        ("sponge-retained", 2),
        ("cavity-retention", 2),
    ] {
        let out = simulate(name, dir.path());
        assert_eq!(out.status.code(), Some(code), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let missing = rsbtrack(&["simulate", "no-such-file.json"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));
}

#[test]
fn simulate_writes_trace_reports_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    assert!(simulate("sponge-in-cavity", dir.path()).status.success());
    for file in [
        "sponge-in-cavity.trace.ndjson",
        "sponge-in-cavity.case-1.report.json",
        "sponge-in-cavity.case-1.report.csv",
        "sponge-in-cavity.summary.json",
    ] {
        assert!(dir.path().join(file).exists(), "{file}");
    }
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/golden/sponge-in-cavity.trace.ndjson");
    assert_eq!(
        std::fs::read(dir.path().join("sponge-in-cavity.trace.ndjson")).unwrap(),
        std::fs::read(golden).unwrap()
    );
    let summary = json(&dir.path().join("sponge-in-cavity.summary.json"));
    assert_eq!(summary["cases"][0]["final_phase"], "Complete");

    // No leftover temporaries.
    let names: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names.len(), 4, "{names:?}");
}

#[test]
fn outputs_are_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        simulate("clean", dir.path());
        rsbtrack(&[
            "montecarlo",
            scenario("cavity-retention").to_str().unwrap(),
            "--runs",
            "500",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
    }
    for file in ["clean.trace.ndjson", "clean.summary.json", "clean.case-1.report.csv", "cavity-retention.montecarlo.json"] {
        assert_eq!(
            std::fs::read(a.path().join(file)).unwrap(),
            std::fs::read(b.path().join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn seed_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out = rsbtrack(&[
        "simulate",
        scenario("clean").to_str().unwrap(),
        "--seed",
        "99",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(json(&dir.path().join("clean.summary.json"))["seed"], 99);
}

#[test]
fn montecarlo_miss_rate_matches_detection_probability() {
    const N: f64 = 100_000.0;
    let dir = tempfile::tempdir().unwrap();
    let out = rsbtrack(&[
        "montecarlo",
        scenario("cavity-retention").to_str().unwrap(),
        "--runs",
        "100000",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&dir.path().join("cavity-retention.montecarlo.json"));
    assert_eq!(summary["runs"], 100_000);
    let rate = summary["first_scan_miss_rate"].as_f64().unwrap();
    let q = 0.2;
    let sigma = (q * (1.0 - q) / N).sqrt();
    assert!((rate - q).abs() <= 3.0 * sigma, "miss rate {rate}, sigma {sigma}");
}

#[test]
fn single_run_batch_matches_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario("sponge-in-cavity");
    rsbtrack(&[
        "montecarlo",
        path.to_str().unwrap(),
        "--runs",
        "1",
        "--seed-base",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    rsbtrack(&[
        "simulate",
        path.to_str().unwrap(),
        "--seed",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let batch = json(&dir.path().join("sponge-in-cavity.montecarlo.json"));
    let single = json(&dir.path().join("sponge-in-cavity.summary.json"));
    assert_eq!(batch["totals"], single["stats"]);
    assert_eq!(batch["cases"], 1);
    assert_eq!(batch["cases_complete"], 1);
}

#[test]
fn zero_runs_is_an_error() {
    let out = rsbtrack(&["montecarlo", scenario("clean").to_str().unwrap(), "--runs", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args(["simulate", scenario("minimal").to_str().unwrap()])
        .env("RSBTRACK_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("minimal.summary.json").exists());
}

#[test]
fn validate_reports_counts_and_rejects_bad_files() {
    let out = rsbtrack(&["validate", scenario("clean").to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("clean: ok"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let mut s = json(&scenario("clean"));
    s["events"][0]["item"] = "nope".into();
    std::fs::write(&bad, s.to_string()).unwrap();
    let out = rsbtrack(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn report_rebuilds_from_stored_trace() {
    let dir = tempfile::tempdir().unwrap();
    simulate("pocket-carry-out", dir.path());
    let trace = dir.path().join("pocket-carry-out.trace.ndjson");
    let sub = dir.path().join("rebuilt");
    let out = rsbtrack(&[
        "report",
        trace.to_str().unwrap(),
        "--case",
        "case-1",
        "--out",
        sub.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(
        std::fs::read(sub.join("case-1.report.csv")).unwrap(),
        std::fs::read(dir.path().join("pocket-carry-out.case-1.report.csv")).unwrap()
    );
    let out = rsbtrack(&["report", trace.to_str().unwrap(), "--case", "nope", "--out", sub.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eval_bundled_ranks_dr_tool_first() {
    let dir = tempfile::tempdir().unwrap();
    let out = rsbtrack(&["eval", "--bundled", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("1. Dr. Tool"));
    let ranking = json(&dir.path().join("ranking.json"));
    assert_eq!(ranking["ranking"][0][0], "Dr. Tool");
}

#[test]
fn eval_from_files_matches_bundled() {
    let dir = tempfile::tempdir().unwrap();
    let files = dir.path().join("files");
    let out = rsbtrack(&[
        "eval",
        "--needs",
        data("needs.csv").to_str().unwrap(),
        "--correlation",
        data("correlation.csv").to_str().unwrap(),
        "--scores",
        data("scores.csv").to_str().unwrap(),
        "--screening",
        data("screening.csv").to_str().unwrap(),
        "--datum",
        "Ultra Tool",
        "--qualitative",
        data("qualitative.csv").to_str().unwrap(),
        "--out",
        files.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bundled = dir.path().join("bundled");
    rsbtrack(&["eval", "--bundled", "--out", bundled.to_str().unwrap()]);
    assert_eq!(
        std::fs::read(files.join("ranking.json")).unwrap(),
        std::fs::read(bundled.join("ranking.json")).unwrap()
    );
}

#[test]
fn eval_rejects_mismatched_tables() {
    let dir = tempfile::tempdir().unwrap();
    let needs = dir.path().join("needs.csv");
    let corr = dir.path().join("corr.csv");
    let scores = dir.path().join("scores.csv");
    std::fs::write(&needs, "need,importance\nfast,5\ncheap,3\n").unwrap();
    std::fs::write(&corr, "need,speed,cost\nfast,9,0\n").unwrap();
    std::fs::write(&scores, "concept,speed\na,1\n").unwrap();
    let out = rsbtrack(&[
        "eval",
        "--needs",
        needs.to_str().unwrap(),
        "--correlation",
        corr.to_str().unwrap(),
        "--scores",
        scores.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("ranking.json").exists());

    // Ragged rows are a parse error too.
    std::fs::write(&corr, "need,speed,cost\nfast,9,0\ncheap,1\n").unwrap();
    let out = rsbtrack(&[
        "eval",
        "--needs",
        needs.to_str().unwrap(),
        "--correlation",
        corr.to_str().unwrap(),
        "--scores",
        scores.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn risk_bundled_writes_scores() {
    let dir = tempfile::tempdir().unwrap();
    let out = rsbtrack(&["risk", "--bundled", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let rows = json(&dir.path().join("risk.json"));
    let rows = rows.as_array().unwrap();
    assert!(!rows.is_empty());
    for r in rows {
        let l = r["likelihood"].as_u64().unwrap();
        let c = r["consequence"].as_u64().unwrap();
        assert_eq!(r["score"].as_u64().unwrap(), l * c);
    }
}
