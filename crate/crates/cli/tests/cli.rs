//! Runs the `tdas` binary end to end on small problems.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tdas_core::io::load_dataset;
use tdas_core::FreqFilterParams;

fn tdas(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdas"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = tdas(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn error_json(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().expect("an error line");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("not json ({e}): {line}"))
}

const SMALL: &[&str] = &["--chains", "24", "--steps-per-level", "40"];

/// data, ref (400 steps), van (40 steps), all on 16x16 blobs.
fn small_runs(dir: &Path) {
    ok(dir, &["make-data", "--kind", "low_freq_blobs", "--count", "80", "--height", "16", "--seed", "3", "--out", "data"]);
    let mut a = vec!["sample", "--dataset", "data", "--vanilla", "--seed", "1", "--out", "ref"];
    a.extend_from_slice(SMALL);
    ok(dir, &a);
    let mut a = vec!["sample", "--dataset", "data", "--vanilla", "--seed", "2", "--iterations", "40", "--out", "van"];
    a.extend_from_slice(SMALL);
    ok(dir, &a);
}

#[test]
fn pipeline_runs_and_tdas_beats_vanilla() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_runs(d);
    ok(d, &["calibrate", "--reference", "ref", "--generated", "van", "--out", "cal"]);
    let params = FreqFilterParams::load(d.join("cal/params.json")).unwrap();
    assert!(params.lambda1 < 1.0 && params.lambda2 < params.lambda1, "{params:?}");
    assert!(fs::read_to_string(d.join("cal/kappa.csv")).unwrap().starts_with("r,kappa\n"));

    ok(d, &["sample", "--config", "van/run.json", "--tdas", "--params", "cal/params.json", "--space-mask", "data", "--out", "tdas"]);
    ok(d, &["validate", "--metrics", "--samples", "tdas", "--reference", "ref", "--baseline", "van", "--out", "met"]);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(d.join("met/report.json")).unwrap()).unwrap();
    assert_eq!(report["improved"], true, "{report}");

    ok(d, &["stats", "--samples", "tdas", "--out", "st"]);
    let csv = fs::read_to_string(d.join("st/radial.csv")).unwrap();
    assert!(csv.starts_with("radius,mean_power,cells\n"));
    assert!(d.join("st/stats.tdt").exists());
}

#[test]
fn identity_tdas_equals_vanilla_and_manifest_replays() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_runs(d);
    ok(d, &["sample", "--config", "van/run.json", "--tdas", "--out", "idt"]);
    ok(d, &["sample", "--config", "van/run.json", "--out", "again"]);
    let van = load_dataset(d.join("van")).unwrap();
    assert_eq!(load_dataset(d.join("idt")).unwrap(), van);
    assert_eq!(load_dataset(d.join("again")).unwrap(), van);

    let m: serde_json::Value = serde_json::from_slice(&fs::read(d.join("van/run.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "sample");
    assert_eq!(m["seed"], 2);
    assert!(m["timings"].as_array().unwrap().iter().any(|t| t["phase"] == "sample"));
    assert!(m["outputs"].as_array().unwrap().len() > 24);
}

#[test]
fn jobs_do_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_runs(d);
    ok(d, &["--jobs", "1", "sample", "--config", "van/run.json", "--out", "one"]);
    assert_eq!(load_dataset(d.join("one")).unwrap(), load_dataset(d.join("van")).unwrap());
}

#[test]
fn calibrating_a_set_against_itself_gives_unit_lambdas() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_runs(d);
    ok(d, &["calibrate", "--reference", "ref", "--generated", "ref", "--out", "same"]);
    let p = FreqFilterParams::load(d.join("same/params.json")).unwrap();
    assert_eq!((p.lambda1, p.lambda2), (1.0, 1.0));
}

#[test]
fn unstructured_data_fails_calibration_unless_identity_allowed() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["make-data", "--kind", "unstructured", "--count", "80", "--height", "16", "--seed", "3", "--out", "u"]);
    let mut a = vec!["sample", "--dataset", "u", "--vanilla", "--seed", "1", "--out", "uref"];
    a.extend_from_slice(SMALL);
    ok(d, &a);
    let mut a = vec!["sample", "--dataset", "u", "--vanilla", "--seed", "2", "--iterations", "40", "--out", "uvan"];
    a.extend_from_slice(SMALL);
    ok(d, &a);

    let out = tdas(d, &["calibrate", "--reference", "uref", "--generated", "uvan", "--out", "c"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"], "calibration");
    assert!(d.join("c/kappa.csv").exists(), "kappa curve is kept for inspection");

    ok(d, &["calibrate", "--reference", "uref", "--generated", "uvan", "--allow-identity", "--out", "c"]);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(d.join("c/calibration.json")).unwrap()).unwrap();
    assert_eq!(report["fallback"], true);
    assert_eq!(report["params"]["lambda1"], 1.0);
}

#[test]
fn errors_are_single_json_lines_with_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cases: &[(&[&str], &str)] = &[
        (&["sample", "--dataset", "x", "--vanilla", "--bogus", "--out", "o"], "usage"),
        (&["calibrate", "--reference", "missing", "--generated", "missing", "--out", "o"], "io"),
        (&["sample", "--dataset", "missing", "--vanilla", "--out", "o"], "io"),
        (&["make-data", "--kind", "unstructured", "--count", "0", "--out", "o"], "invalid_argument"),
        (&["validate", "--out", "o"], "usage"),
    ];
    for (args, kind) in cases {
        let out = tdas(d, args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert_eq!(stderr.trim_end().lines().count(), 1, "{stderr}");
        assert_eq!(error_json(&out)["error"], *kind, "{args:?}");
    }
}

#[test]
fn failed_checks_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["validate", "--theorem1", "--map", "permutation", "--out", "t1"]);
    // the DCT conjugate agrees only to round-off, so a zero tolerance fails
    let out = tdas(d, &["validate", "--theorem1", "--tolerance", "0", "--out", "t1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "validation");
    ok(d, &["validate", "--theorem2", "--draws", "2000", "--out", "t2"]);
    let r: serde_json::Value = serde_json::from_slice(&fs::read(d.join("t2/report.json")).unwrap()).unwrap();
    assert_eq!(r["regimes"].as_array().unwrap().len(), 3);

    small_runs(d);
    // vanilla against itself is not strictly better
    let out = tdas(d, &["validate", "--metrics", "--samples", "van", "--reference", "ref", "--baseline", "van", "--out", "m"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(d.join("m/report.json").exists());
}

#[test]
fn bench_writes_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["bench", "--filter-overhead", "8,16", "--repeats", "3", "--out", "b"]);
    let csv = fs::read_to_string(d.join("b/bench.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "size,channels,repeats,median_s,min_s,max_s");
    assert!(lines[1].starts_with("8,3,3,") && lines[2].starts_with("16,3,3,"));
}

#[test]
fn every_flag_is_documented_in_help() {
    let tmp = tempfile::tempdir().unwrap();
    for cmd in ["make-data", "sample", "calibrate", "stats", "validate", "bench"] {
        let out = tdas(tmp.path(), &[cmd, "--help"]);
        assert!(out.status.success(), "{cmd}");
        let help = String::from_utf8_lossy(&out.stdout);
        let lines: Vec<&str> = help.lines().collect();
        for (i, line) in lines.iter().enumerate() {
            let trimmed = line.trim_start();
            if !trimmed.starts_with("--") {
                continue;
            }
            let flag = trimmed.split_whitespace().next().unwrap();
            // long help puts the description on the next, deeper-indented line
            let same_line = trimmed.split_once("  ").map_or("", |(_, d)| d).trim();
            let next_line = lines.get(i + 1).map(|l| l.trim()).unwrap_or("");
            let doc = if same_line.is_empty() { next_line } else { same_line };
            assert!(
                !doc.is_empty() && !doc.starts_with('[') && !doc.starts_with("--"),
                "{cmd} {flag} lacks a description"
            );
        }
    }
}
