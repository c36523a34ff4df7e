use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn nmf(dir: &Path, args: &[&str], stdin: Option<&[u8]>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_nmf"))
        .current_dir(dir)
        .args(args)
        .stdin(if stdin.is_some() { Stdio::piped() } else { Stdio::null() })
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    if let Some(bytes) = stdin {
        // Validation errors can exit before stdin is read.
        let _ = child.stdin.take().unwrap().write_all(bytes);
    }
    child.wait_with_output().unwrap()
}

fn error_doc(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not an error document ({e}): {text}"))
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn synth_csv(dir: &Path, seed: &str) -> Vec<u8> {
    let out = nmf(dir, &["synth", "--seed", seed, "--out", "-"], None);
    assert!(out.status.success());
    out.stdout
}

#[test]
fn missing_input_is_a_validation_error_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nmf(tmp.path(), &["fit", "--input", "no_such.csv"], None);
    assert_eq!(out.status.code(), Some(2));
    let doc = error_doc(&out);
    assert_eq!(doc["schema"], 1);
    assert_eq!(doc["error"]["kind"], "validation");
    assert_eq!(doc["error"]["path"], "no_such.csv");
    assert!(doc["error"]["message"].as_str().unwrap().contains("no_such.csv"));
}

#[test]
fn zero_k_is_rejected_before_reading_input() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nmf(tmp.path(), &["fit", "--k", "0"], None);
    assert_eq!(out.status.code(), Some(2));
    let message = error_doc(&out)["error"]["message"].as_str().unwrap().to_string();
    assert!(message.contains("1 <= k < min(n, m)"), "{message}");
}

#[test]
fn k_at_the_matrix_limit_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = synth_csv(tmp.path(), "0");
    let out = nmf(tmp.path(), &["fit", "--k", "77"], Some(&csv));
    assert_eq!(out.status.code(), Some(2));
    let message = error_doc(&out)["error"]["message"].as_str().unwrap().to_string();
    assert!(message.contains("min(n, m) = 77"), "{message}");
}

#[test]
fn unknown_flag_and_timezone_are_validation_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nmf(tmp.path(), &["sweep", "--bogus"], None);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_doc(&out)["error"]["kind"], "validation");

    let out = nmf(tmp.path(), &["ingest", "--timezone", "Mars/Olympus"], Some(b"timestamp,count\n"));
    assert_eq!(out.status.code(), Some(2));
    assert!(error_doc(&out)["error"]["message"].as_str().unwrap().contains("Mars/Olympus"));
}

#[test]
fn synth_piped_into_fit_writes_every_output() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = synth_csv(tmp.path(), "1");
    let out = nmf(tmp.path(), &["fit", "--k", "4", "--out-dir", "run", "--plots"], Some(&csv));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = tmp.path().join("run");
    for name in [
        "matrix.csv",
        "W.csv",
        "H.csv",
        "H_weighted.csv",
        "fit.json",
        "residuals.csv",
        "components.json",
        "run_manifest.json",
        "components.svg",
        "weighted_activations.svg",
        "daily_overlay.svg",
        "raw_series.svg",
    ] {
        assert!(run.join(name).is_file(), "{name} missing");
    }
    let fit = json(&run.join("fit.json"));
    assert_eq!(fit["schema"], 1);
    assert_eq!(fit["n"], 144);
    assert_eq!(fit["m"], 77);
    assert_eq!(fit["step_minutes"], 10.0);
    assert_eq!(fit["config"]["k"], 4);

    let w = fs::read_to_string(run.join("W.csv")).unwrap();
    assert!(w.starts_with("component_1,component_2,component_3,component_4\n"));
    assert_eq!(w.lines().count(), 145);
    let h = fs::read_to_string(run.join("H.csv")).unwrap();
    assert!(h.starts_with("2020-01-19,"));
    assert_eq!(h.lines().count(), 5);

    let residuals = fs::read_to_string(run.join("residuals.csv")).unwrap();
    assert!(residuals.starts_with("day,residual_l2,relative_error,rank\n"));
    assert_eq!(residuals.lines().count(), 78);
}

#[test]
fn sweep_prints_the_suggestion_it_records() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = synth_csv(tmp.path(), "2");
    let out = nmf(tmp.path(), &["sweep", "--out-dir", "a", "--plots"], Some(&csv));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let a = tmp.path().join("a");
    let table = fs::read_to_string(a.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 9);
    assert!(table.starts_with("k,mse,relative_error,iterations,converged\n"));
    assert!(a.join("mse_vs_k.svg").is_file());

    let record = json(&a.join("sweep.json"));
    let suggested = record["suggested_k"].as_u64().unwrap();
    let stdout = String::from_utf8(out.stdout.clone()).unwrap();
    let line = stdout.lines().find(|l| l.starts_with("suggested_k = ")).unwrap();
    assert!(line.starts_with(&format!("suggested_k = {suggested} (advisory")), "{line}");
    assert_eq!(record["suggestion_is_advisory"], true);

    let again = nmf(tmp.path(), &["sweep", "--out-dir", "b"], Some(&csv));
    assert_eq!(again.stdout, out.stdout);
    let b = tmp.path().join("b");
    for name in ["sweep.csv", "sweep.json", "matrix.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn analyze_reproduces_the_fit_analysis() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = synth_csv(tmp.path(), "4");
    assert!(nmf(tmp.path(), &["fit", "--out-dir", "fit"], Some(&csv)).status.success());
    let out = nmf(tmp.path(), &["analyze", "--factorization", "fit", "--out-dir", "again"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["H_weighted.csv", "components.json", "residuals.csv"] {
        let a = fs::read(tmp.path().join("fit").join(name)).unwrap();
        let b = fs::read(tmp.path().join("again").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn ingest_reports_rejected_rows_and_dropped_days() {
    let tmp = tempfile::tempdir().unwrap();
    let input = "timestamp,count\n\
                 2021-03-01T00:00:00Z,5\n\
                 not-a-time,3\n\
                 2021-03-01T12:00:00Z,-1\n\
                 2021-03-02T00:00:00Z,7\n\
                 2021-03-03T00:00:00Z,6\n";
    fs::write(tmp.path().join("raw.csv"), input).unwrap();
    let out = nmf(tmp.path(), &["ingest", "--input", "raw.csv", "--out-dir", "ing"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&tmp.path().join("ing/ingest_report.json"));
    assert_eq!(report["rows_read"], 5);
    assert_eq!(report["rows_accepted"], 3);
    assert_eq!(report["rows_rejected"], 2);
    let dropped = json(&tmp.path().join("ing/dropped_days.json"));
    assert!(dropped["dropped"].is_array());
    let matrix = fs::read_to_string(tmp.path().join("ing/matrix.csv")).unwrap();
    assert_eq!(matrix.lines().count(), 145);
}

#[test]
fn rerun_records_absolute_inputs_and_replays_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("raw.csv"), synth_csv(tmp.path(), "5")).unwrap();
    let out = nmf(tmp.path(), &["fit", "--input", "raw.csv", "--k", "3", "--out-dir", "first"], None);
    assert!(out.status.success());
    let manifest = json(&tmp.path().join("first/run_manifest.json"));
    assert_eq!(manifest["tool"], "nmf");
    assert_eq!(manifest["job"]["command"], "fit");
    assert!(Path::new(manifest["job"]["source"]["input"].as_str().unwrap()).is_absolute());

    let elsewhere = tempfile::tempdir().unwrap();
    let manifest_path = tmp.path().join("first/run_manifest.json");
    let out = nmf(
        elsewhere.path(),
        &["rerun", "--manifest", manifest_path.to_str().unwrap(), "--out-dir", "second"],
        None,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["W.csv", "H.csv", "fit.json", "run_manifest.json", "residuals.csv"] {
        let a = fs::read(tmp.path().join("first").join(name)).unwrap();
        let b = fs::read(elsewhere.path().join("second").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn rerun_of_a_stdin_run_takes_a_replacement_input() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = synth_csv(tmp.path(), "6");
    fs::write(tmp.path().join("raw.csv"), &csv).unwrap();
    assert!(nmf(tmp.path(), &["ingest", "--out-dir", "a"], Some(&csv)).status.success());
    let out = nmf(
        tmp.path(),
        &["rerun", "--manifest", "a/run_manifest.json", "--input", "raw.csv", "--out-dir", "b"],
        None,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        fs::read(tmp.path().join("a/matrix.csv")).unwrap(),
        fs::read(tmp.path().join("b/matrix.csv")).unwrap()
    );
}

#[test]
fn emitted_scenario_round_trips_through_synth() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nmf(
        tmp.path(),
        &["synth", "--seed", "8", "--emit-scenario", "scenario.json", "--out", "builtin.csv"],
        None,
    );
    assert!(out.status.success());
    let out = nmf(
        tmp.path(),
        &["synth", "--seed", "8", "--scenario", "scenario.json", "--out", "file.csv"],
        None,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        fs::read(tmp.path().join("builtin.csv")).unwrap(),
        fs::read(tmp.path().join("file.csv")).unwrap()
    );
}
