use std::path::Path;
use std::process::{Command, Output};

fn graphrom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphrom")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, name: &str, recipe: &str, seed: &str) -> std::path::PathBuf {
    let out = dir.join(name);
    let o = graphrom(&["synth", "--recipe", recipe, "--seed", seed, "--n-steps", "60", "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

const OSC_CONFIG: &str = r#"{
    "schema": 1,
    "input": {"path": "osc.csv"},
    "columns": {"state": ["x", "v"], "observables": ["energy"], "target": "energy"},
    "model": {"kind": "taylor", "order": 1, "variables": ["x", "v"]},
    "stepwise": {"min_terms": 1}
}"#;

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "a.csv", "microstructure-like", "9");
    let b = synth(dir.path(), "b.csv", "microstructure-like", "9");
    let c = synth(dir.path(), "c.csv", "microstructure-like", "10");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn synth_truth_file_lists_planted_terms() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth.json");
    let o = graphrom(&[
        "synth", "--recipe", "planted-sparse-linear", "--out", p(&dir.path().join("d.csv")), "--truth", p(&truth),
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(truth).unwrap()).unwrap();
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["x2", "x5", "x10", "x14", "x18"]);
}

#[test]
fn fit_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "osc.csv", "damped-oscillator-states", "1");
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, OSC_CONFIG).unwrap();
    let o = graphrom(&["fit", "--config", p(&cfg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["model.json", "trace.csv", "fit.csv", "weights_diag.csv"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("final terms"));
}

#[test]
fn bad_config_field_exits_2_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, OSC_CONFIG.replace(r#""order": 1"#, r#""order": "one""#)).unwrap();
    let o = graphrom(&["fit", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("model"), "{}", stderr(&o));

    std::fs::write(&cfg, OSC_CONFIG.replace(r#""min_terms": 1"#, r#""min_terms": 1, "extra": 3"#)).unwrap();
    let o = graphrom(&["fit", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("stepwise"), "{}", stderr(&o));

    std::fs::write(&cfg, OSC_CONFIG.replace(r#""schema": 1"#, r#""schema": 7"#)).unwrap();
    let o = graphrom(&["fit", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("schema"));
}

#[test]
fn missing_input_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, OSC_CONFIG).unwrap();
    let o = graphrom(&["fit", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("osc.csv"));
}

#[test]
fn pickle_input_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.pkl");
    std::fs::write(&path, b"\x80\x04junk").unwrap();
    let o = graphrom(&["ingest-check", "--input", p(&path)]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("not supported"), "{}", stderr(&o));
}

#[test]
fn malformed_csv_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    std::fs::write(&path, "t,x\n0,1\n1,oops\n").unwrap();
    let o = graphrom(&["ingest-check", "--input", p(&path)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn ingest_check_accepts_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.json");
    std::fs::write(&path, r#"[{"t": 0, "x": 1.5}, {"t": 0.5, "x": 2}]"#).unwrap();
    let o = graphrom(&["ingest-check", "--input", p(&path)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("rows: 2") && stdout.contains("column: x"));
}

#[test]
fn error_study_defaults_pass_assert() {
    let dir = tempfile::tempdir().unwrap();
    let o = graphrom(&["error-study", "--assert", "--svg", "--out", p(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("error_study_summary.json")).unwrap()).unwrap();
    let studies = summary["studies"].as_array().unwrap();
    assert_eq!(studies.len(), 2);
    assert!(studies.iter().all(|s| s["within_tolerance"] == true));
    assert!(dir.path().join("error_study_baseline_k1.csv").exists());
    assert!(dir.path().join("error_study_nonlocal_k1.csv").exists());
    assert!(dir.path().join("error_study_k1.svg").exists());
}

#[test]
fn error_study_assert_failure_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = graphrom(&["error-study", "--assert", "--tolerance", "0.0", "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    // Without --assert the same run reports but succeeds.
    let o = graphrom(&["error-study", "--tolerance", "0.0", "--out", p(dir.path())]);
    assert!(o.status.success());
}

#[test]
fn error_study_needs_three_meshes() {
    let dir = tempfile::tempdir().unwrap();
    let o = graphrom(&["error-study", "--n-list", "8,16", "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn weights_diag_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "osc.csv", "damped-oscillator-states", "1");
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, OSC_CONFIG).unwrap();
    let out = dir.path().join("diag.csv");
    let o = graphrom(&["weights-diag", "--config", p(&cfg), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("component_a,component_b,max_abs_deviation"));
    assert_eq!(text.lines().count(), 1 + 2 * 2);
}
