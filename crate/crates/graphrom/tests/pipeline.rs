use std::path::Path;

use graphrom::config::{parse_config, RunConfig};
use graphrom::io::{ingest, write_series, DataFormat};
use graphrom::pipeline::run_pipeline;
use graphrom::synth::{generate, Recipe, SynthSpec};

fn synth_to(dir: &Path, recipe: Recipe, seed: u64, n_steps: usize, noise: f64) -> graphrom::synth::SynthData {
    let data = generate(&SynthSpec {
        seed,
        n_steps,
        dt: 0.1,
        recipe,
        noise,
    })
    .unwrap();
    write_series(&dir.join("data.csv"), &data.series, "t").unwrap();
    data
}

fn planted_config(min_terms: usize) -> RunConfig {
    let xs: Vec<String> = (1..=20).map(|k| format!("\"x{k}\"")).collect();
    parse_config(&format!(
        r#"{{
            "schema": 1,
            "input": {{"path": "data.csv"}},
            "columns": {{"state": ["x1", "x2"], "observables": [{obs}], "target": "y"}},
            "model": {{"kind": "dynamics", "variables": [{obs}], "degree_cap": 1}},
            "solver": {{"kind": "ols"}},
            "stepwise": {{"min_terms": {min_terms}}}
        }}"#,
        obs = xs.join(", ")
    ))
    .unwrap()
}

#[test]
fn planted_terms_survive() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_to(dir.path(), Recipe::PlantedSparseLinear, 11, 120, 1e-3);
    let out = dir.path().join("out");
    let summary = run_pipeline(&planted_config(6), dir.path(), &out).unwrap();
    for (name, _) in &data.truth {
        assert!(summary.final_terms.contains(name), "{name} missing from {:?}", summary.final_terms);
    }
    let model: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("model.json")).unwrap()).unwrap();
    for term in model["terms"].as_array().unwrap() {
        let label = term["descriptor"].as_str().unwrap();
        if let Some((_, g)) = data.truth.iter().find(|(n, _)| n == label) {
            let c = term["coefficient"].as_f64().unwrap();
            assert!((c - g).abs() < 1e-2, "{label}: {c} vs {g}");
        }
    }
    assert_eq!(model["schema"], 1);
    assert!(model["solver"]["rank"].as_u64().unwrap() >= 5);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    synth_to(dir.path(), Recipe::PlantedSparseLinear, 5, 80, 1e-2);
    let cfg = planted_config(3);
    run_pipeline(&cfg, dir.path(), &dir.path().join("a")).unwrap();
    run_pipeline(&cfg, dir.path(), &dir.path().join("b")).unwrap();
    for f in ["model.json", "trace.csv", "fit.csv", "weights_diag.csv"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn emitted_csvs_parse_as_tables() {
    let dir = tempfile::tempdir().unwrap();
    synth_to(dir.path(), Recipe::PlantedSparseLinear, 5, 60, 1e-2);
    let out = dir.path().join("out");
    run_pipeline(&planted_config(3), dir.path(), &out).unwrap();
    let fit = ingest(&out.join("fit.csv"), Some(DataFormat::Csv), "t", &["y".into()]).unwrap();
    assert_eq!(fit.len(), 60);
    let trace = ingest(&out.join("trace.csv"), None, "iteration", &["n_terms".into()]);
    // removed_descriptor is text, so the trace is only table-shaped, not numeric.
    assert!(trace.is_err());
    let mut rdr = csv::Reader::from_path(out.join("trace.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 21 - 3 + 1);
    assert_eq!(rows[0].len(), 8);
}

#[test]
fn taylor_order_zero_predicts_the_base_value() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_to(dir.path(), Recipe::MicrostructureLike, 2, 40, 0.0);
    let cfg = parse_config(
        r#"{
            "schema": 1,
            "input": {"path": "data.csv"},
            "columns": {"state": ["phi", "e11"], "observables": ["energy"], "target": "energy"},
            "model": {"kind": "taylor", "order": 0, "variables": ["phi", "e11"], "base_index": 3}
        }"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    run_pipeline(&cfg, dir.path(), &out).unwrap();
    let fit = ingest(&out.join("fit.csv"), None, "t", &[]).unwrap();
    let base = data.series.column("energy").unwrap()[3];
    let (_, yhat) = fit.columns().iter().find(|(n, _)| n.starts_with("yhat_")).unwrap();
    assert!(yhat.iter().all(|v| *v == base));
}

#[test]
fn taylor_model_fits_energy() {
    let dir = tempfile::tempdir().unwrap();
    synth_to(dir.path(), Recipe::MicrostructureLike, 4, 60, 0.0);
    let cfg = parse_config(
        r#"{
            "schema": 1,
            "input": {"path": "data.csv"},
            "columns": {"state": ["phi", "e11"], "observables": ["energy"], "target": "energy"},
            "preprocess": {"scale": {"e11": 100.0}},
            "weight": {"family": "gaussian"},
            "model": {"kind": "taylor", "order": 2, "variables": ["phi", "e11"], "symmetric": true},
            "stepwise": {"min_terms": 2}
        }"#,
    )
    .unwrap();
    let summary = run_pipeline(&cfg, dir.path(), &dir.path().join("out")).unwrap();
    assert_eq!(summary.final_terms.len(), 2);
    assert_eq!(summary.final_terms[0], "T[]energy");
}

#[test]
fn missing_columns_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    synth_to(dir.path(), Recipe::DampedOscillatorStates, 1, 30, 0.0);
    let mut cfg = planted_config(2);
    cfg.columns.state = vec!["x".into(), "nope".into()];
    let err = run_pipeline(&cfg, dir.path(), &dir.path().join("out")).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("`nope`"));
}

#[test]
fn too_many_min_terms_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    synth_to(dir.path(), Recipe::PlantedSparseLinear, 1, 30, 0.0);
    let err = run_pipeline(&planted_config(50), dir.path(), &dir.path().join("out")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("stepwise.min_terms"));
}

#[test]
fn svg_output_is_optional() {
    let dir = tempfile::tempdir().unwrap();
    synth_to(dir.path(), Recipe::PlantedSparseLinear, 1, 40, 1e-3);
    let mut cfg = planted_config(5);
    cfg.output.svg = true;
    let out = dir.path().join("out");
    run_pipeline(&cfg, dir.path(), &out).unwrap();
    assert!(out.join("loss_vs_terms.svg").exists());
    assert!(out.join("fit.svg").exists());
}
