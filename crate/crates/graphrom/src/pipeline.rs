//! `fit`: ingest, preprocess, build the graph and basis, run stepwise
//! selection and write the reports.

use std::path::{Path, PathBuf};

use graphrom_core::basis::{build_dynamics_basis, build_taylor_basis, OperatorBasis, TermDescriptor};
use graphrom_core::calculus::{verify_unit_norm, UnitNormReport};
use graphrom_core::preprocess::{backward_euler_derivative, gaussian_filter, TimeSeries};
use graphrom_core::regression::{stepwise_backward, StepRecord, StepwiseTrace, StepwiseWarning, SVD_CUTOFF};
use graphrom_core::state_graph::build_graph;
use graphrom_core::{StateGraph, StateVector, WeightSpec};
use serde::Serialize;

use crate::config::{ModelConfig, RunConfig};
use crate::error::{AppError, AppResult};
use crate::io::{fmt_f64, ingest, write_csv, write_text};
use crate::svg;

/// Loaded and preprocessed data with the graph built on it.
pub struct Prepared {
    pub series: TimeSeries,
    pub graph: StateGraph,
    pub target: Vec<f64>,
}

fn core_err(context: &str) -> impl Fn(graphrom_core::Error) -> AppError + '_ {
    move |e| AppError::from_core(context, e)
}

/// Resolves the input path against the config directory.
pub fn input_path(cfg: &RunConfig, base_dir: &Path) -> PathBuf {
    if cfg.input.path.is_absolute() {
        cfg.input.path.clone()
    } else {
        base_dir.join(&cfg.input.path)
    }
}

pub fn load_series(cfg: &RunConfig, base_dir: &Path) -> AppResult<TimeSeries> {
    let mut required: Vec<String> = cfg.columns.state.clone();
    required.extend(cfg.columns.observables.iter().cloned());
    required.extend(cfg.preprocess.scale.keys().cloned());
    if let Some(d) = &cfg.preprocess.derivative {
        required.push(d.clone());
    }
    ingest(&input_path(cfg, base_dir), cfg.input.format, &cfg.columns.time, &required)
}

pub fn preprocess(cfg: &RunConfig, mut series: TimeSeries) -> AppResult<TimeSeries> {
    for (name, factor) in &cfg.preprocess.scale {
        series.scale_column(name, *factor).map_err(core_err("preprocess.scale"))?;
    }
    if let Some(f) = &cfg.preprocess.filter {
        series = gaussian_filter(&series, f.window, f.sigma, f.passes).map_err(core_err("preprocess.filter"))?;
    }
    if let Some(col) = &cfg.preprocess.derivative {
        series = backward_euler_derivative(&series, col).map_err(core_err("preprocess.derivative"))?;
    }
    Ok(series)
}

/// Builds the state graph: state columns as coordinates, observables and the
/// target as vertex data.
pub fn build(cfg: &RunConfig, series: TimeSeries) -> AppResult<Prepared> {
    let col = |name: &str| {
        series
            .column(name)
            .map(|v| v.to_vec())
            .map_err(|_| AppError::Data(format!("missing column `{name}` after preprocessing")))
    };
    let state_cols: Vec<Vec<f64>> = cfg.columns.state.iter().map(|s| col(s)).collect::<AppResult<_>>()?;
    let target = col(&cfg.columns.target)?;
    let mut observables: Vec<(String, Vec<f64>)> = Vec::new();
    for name in &cfg.columns.observables {
        observables.push((name.clone(), col(name)?));
    }
    let target_name = &cfg.columns.target;
    if !cfg.columns.state.contains(target_name) && !cfg.columns.observables.contains(target_name) {
        observables.push((target_name.clone(), target.clone()));
    }
    let states = (0..series.len())
        .map(|r| StateVector::new(state_cols.iter().map(|c| c[r]).collect(), cfg.columns.state.clone()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(core_err("state vectors"))?;
    let graph = build_graph(states, observables, &cfg.weight.to_core()).map_err(core_err("graph"))?;
    Ok(Prepared { series, graph, target })
}

pub fn prepare(cfg: &RunConfig, base_dir: &Path) -> AppResult<Prepared> {
    let series = load_series(cfg, base_dir)?;
    let series = preprocess(cfg, series)?;
    build(cfg, series)
}

pub fn build_basis(cfg: &RunConfig, p: &Prepared) -> AppResult<(OperatorBasis, Vec<String>)> {
    match &cfg.model {
        ModelConfig::Dynamics(d) => {
            let basis = build_dynamics_basis(&p.graph, &d.to_core()).map_err(core_err("model"))?;
            Ok(basis.drop_zero_columns())
        }
        ModelConfig::Taylor(t) => {
            let basis = build_taylor_basis(&p.graph, &p.target, &t.to_core(&cfg.columns.target))
                .map_err(core_err("model"))?;
            Ok(basis.drop_zero_columns())
        }
    }
}

#[derive(Debug, Serialize)]
struct TermOut {
    descriptor: String,
    structure: TermDescriptor,
    coefficient: f64,
    normalized_coefficient: f64,
    normalizer: f64,
    fixed: bool,
}

#[derive(Debug, Serialize)]
struct SolverOut {
    kind: graphrom_core::regression::SolverKind,
    lambda: f64,
    rank: usize,
    cutoff: f64,
}

#[derive(Debug, Serialize)]
struct LossOut {
    total: f64,
    l2: f64,
    l1: f64,
    linf: f64,
}

#[derive(Debug, Serialize)]
struct WeightsOut {
    spec: Option<WeightSpec>,
    max_gram_deviation: f64,
    worst_vertex: usize,
}

#[derive(Debug, Serialize)]
struct ModelOut<'a> {
    schema: u32,
    config: &'a RunConfig,
    rows: usize,
    candidate_terms: usize,
    dropped_zero_columns: Vec<String>,
    target_normalizer: f64,
    terms: Vec<TermOut>,
    solver: SolverOut,
    loss: LossOut,
    weights: WeightsOut,
    warnings: Vec<&'static str>,
}

fn warning_name(w: &StepwiseWarning) -> &'static str {
    match w {
        StepwiseWarning::LassoDiscouraged => "lasso-discouraged",
        StepwiseWarning::EmptyPeakSet => "empty-peak-set",
        StepwiseWarning::LassoNotConverged => "lasso-not-converged",
        StepwiseWarning::UnderdeterminedCv => "underdetermined-cv",
    }
}

/// What `fit` produced, for callers and tests.
#[derive(Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub final_terms: Vec<String>,
    pub final_loss: f64,
    pub warnings: Vec<&'static str>,
    pub files: Vec<PathBuf>,
}

pub fn run_pipeline(cfg: &RunConfig, base_dir: &Path, out_dir: &Path) -> AppResult<RunSummary> {
    let prepared = prepare(cfg, base_dir)?;
    let (basis, dropped) = build_basis(cfg, &prepared)?;
    if basis.n_terms() == 0 {
        return Err(AppError::Data("every basis column is identically zero".into()));
    }
    if cfg.stepwise.min_terms > basis.n_terms() {
        return Err(AppError::Config(format!(
            "at `stepwise.min_terms`: {} exceeds the {} available terms",
            cfg.stepwise.min_terms,
            basis.n_terms()
        )));
    }
    let trace = stepwise_backward(
        &basis,
        &prepared.target,
        &cfg.solver.to_core(),
        &cfg.loss.to_core(),
        cfg.stepwise.to_core(),
    )
    .map_err(core_err("stepwise"))?;
    let report = verify_unit_norm(&prepared.graph).map_err(core_err("weights"))?;

    std::fs::create_dir_all(out_dir).map_err(|e| AppError::io(out_dir, e))?;
    let mut files = Vec::new();

    let model_path = out_dir.join("model.json");
    write_text(&model_path, &model_json(cfg, &prepared, &basis, dropped, &trace, &report)?)?;
    files.push(model_path);

    let trace_path = out_dir.join("trace.csv");
    write_text(&trace_path, &trace_csv(&trace))?;
    files.push(trace_path);

    let fit_path = out_dir.join("fit.csv");
    write_fit_csv(&fit_path, cfg, &prepared, &basis, &trace)?;
    files.push(fit_path);

    let diag_path = out_dir.join("weights_diag.csv");
    write_text(&diag_path, &weights_diag_csv(&cfg.columns.state, &report))?;
    files.push(diag_path);

    if cfg.output.svg {
        let svg_path = out_dir.join("loss_vs_terms.svg");
        let pts: Vec<(f64, f64)> = trace.records.iter().map(|r| (r.n_terms as f64, r.loss.total)).collect();
        write_text(&svg_path, &svg::line_chart("loss vs retained terms", "terms", "loss", &[("loss", &pts)], true))?;
        files.push(svg_path);
    }

    let last = trace.last();
    Ok(RunSummary {
        out_dir: out_dir.to_path_buf(),
        final_terms: last.active.iter().map(|&c| trace.labels[c].clone()).collect(),
        final_loss: last.loss.total,
        warnings: trace.warnings.iter().map(warning_name).collect(),
        files,
    })
}

fn model_json(
    cfg: &RunConfig,
    p: &Prepared,
    basis: &OperatorBasis,
    dropped: Vec<String>,
    trace: &StepwiseTrace,
    report: &UnitNormReport,
) -> AppResult<String> {
    let last = trace.last();
    let terms = last
        .active
        .iter()
        .map(|&c| TermOut {
            descriptor: trace.labels[c].clone(),
            structure: basis.descriptors[c].clone(),
            coefficient: last.coeffs[c],
            normalized_coefficient: last.coeffs_normalized[c],
            normalizer: trace.normalization.nx[c],
            fixed: basis.fixed_mask[c],
        })
        .collect();
    let out = ModelOut {
        schema: crate::config::SCHEMA_VERSION,
        config: cfg,
        rows: p.graph.n(),
        candidate_terms: basis.n_terms(),
        dropped_zero_columns: dropped,
        target_normalizer: trace.normalization.ny[0],
        terms,
        solver: SolverOut {
            kind: cfg.solver.kind,
            lambda: last.lambda,
            rank: last.rank,
            cutoff: SVD_CUTOFF,
        },
        loss: LossOut {
            total: last.loss.total,
            l2: last.loss.l2,
            l1: last.loss.l1,
            linf: last.loss.linf,
        },
        weights: WeightsOut {
            spec: p.graph.weight_spec().copied(),
            max_gram_deviation: report.worst,
            worst_vertex: report.worst_vertex,
        },
        warnings: trace.warnings.iter().map(warning_name).collect(),
    };
    let mut text = serde_json::to_string_pretty(&out).map_err(|e| AppError::Data(format!("model.json: {e}")))?;
    text.push('\n');
    Ok(text)
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per stepwise iteration.
pub fn trace_csv(trace: &StepwiseTrace) -> String {
    let mut out = String::from("iteration,n_terms,loss_total,loss_l2,loss_l1,loss_linf,removed_descriptor,F\n");
    for r in &trace.records {
        let StepRecord {
            iteration,
            n_terms,
            loss,
            removed_label,
            f_stat,
            ..
        } = r;
        out.push_str(&format!(
            "{iteration},{n_terms},{},{},{},{},{},{}\n",
            fmt_f64(loss.total),
            fmt_f64(loss.l2),
            fmt_f64(loss.l1),
            fmt_f64(loss.linf),
            csv_cell(removed_label.as_deref().unwrap_or("")),
            opt(*f_stat),
        ));
    }
    out
}

fn write_fit_csv(path: &Path, cfg: &RunConfig, p: &Prepared, basis: &OperatorBasis, trace: &StepwiseTrace) -> AppResult<()> {
    let mut counts: Vec<usize> = cfg
        .stepwise
        .checkpoints
        .iter()
        .copied()
        .filter(|n| trace.with_terms(*n).is_some())
        .collect();
    counts.push(trace.last().n_terms);
    counts.sort_unstable_by(|a, b| b.cmp(a));
    counts.dedup();
    let names: Vec<String> = counts.iter().map(|n| format!("yhat_{n}")).collect();
    let preds = counts
        .iter()
        .map(|n| basis.predict(&trace.with_terms(*n).expect("filtered above").coeffs))
        .collect::<Result<Vec<_>, _>>()
        .map_err(core_err("prediction"))?;
    let mut headers: Vec<&str> = vec![&cfg.columns.time, "y"];
    headers.extend(names.iter().map(String::as_str));
    let mut cols: Vec<&[f64]> = vec![p.series.t(), &p.target];
    cols.extend(preds.iter().map(Vec::as_slice));
    write_csv(path, &headers, &cols)?;

    if cfg.output.svg {
        let t = p.series.t();
        let mut series: Vec<(String, Vec<(f64, f64)>)> =
            vec![("y".into(), t.iter().copied().zip(p.target.iter().copied()).collect())];
        for (name, pred) in names.iter().zip(&preds) {
            series.push((name.clone(), t.iter().copied().zip(pred.iter().copied()).collect()));
        }
        let refs: Vec<(&str, &[(f64, f64)])> = series.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
        let svg_path = path.with_file_name("fit.svg");
        write_text(&svg_path, &svg::line_chart("fit", &cfg.columns.time, "target", &refs, false))?;
    }
    Ok(())
}

/// Largest deviation of the unit-vector Gram matrix from the identity, per component pair.
pub fn weights_diag_csv(components: &[String], report: &UnitNormReport) -> String {
    let mut out = String::from("component_a,component_b,max_abs_deviation\n");
    for (a, na) in components.iter().enumerate() {
        for (b, nb) in components.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{}\n",
                csv_cell(na),
                csv_cell(nb),
                fmt_f64(report.max_deviation[(a, b)])
            ));
        }
    }
    out
}

/// `weights-diag`: only the graph and its Gram report.
pub fn run_weights_diag(cfg: &RunConfig, base_dir: &Path, out: &Path) -> AppResult<UnitNormReport> {
    let p = prepare(cfg, base_dir)?;
    let report = verify_unit_norm(&p.graph).map_err(core_err("weights"))?;
    if let Some(parent) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| AppError::io(parent, e))?;
    }
    write_text(out, &weights_diag_csv(&cfg.columns.state, &report))?;
    Ok(report)
}
