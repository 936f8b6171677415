//! `error-study`: convergence orders of the differential and non-local
//! modified Taylor series on a polynomial target.

use std::path::{Path, PathBuf};

use graphrom_core::error_lab::{convergence_study, ConvergenceStudy, ErrorNorm, PolySpec, StudyConfig, StudyMode};
use serde::Serialize;

use crate::error::{AppError, AppResult};
use crate::io::{fmt_f64, write_text};
use crate::svg;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyArgs {
    pub alpha: Vec<f64>,
    pub length: f64,
    pub orders: Vec<usize>,
    pub n_list: Vec<usize>,
    pub epsilon: f64,
    pub norm: ErrorNorm,
    pub tolerance: f64,
    pub svg: bool,
}

impl Default for StudyArgs {
    fn default() -> Self {
        StudyArgs {
            alpha: vec![0.5, -1.0, 1.5],
            length: 1.0,
            orders: vec![1],
            n_list: (2..=10).map(|k| 1usize << k).collect(),
            epsilon: 0.0,
            norm: ErrorNorm::L2,
            tolerance: 0.2,
            svg: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySummary {
    pub mode: StudyMode,
    pub order: usize,
    pub slope: Option<f64>,
    /// Expected order: `k + 1` for the baseline, 1 for the non-local model.
    pub expected: f64,
    pub floor_detected: bool,
    pub within_tolerance: bool,
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub schema: u32,
    pub args: StudyArgs,
    pub studies: Vec<StudySummary>,
}

impl StudyReport {
    pub fn failures(&self) -> Vec<&StudySummary> {
        self.studies.iter().filter(|s| !s.within_tolerance).collect()
    }
}

fn mode_name(m: StudyMode) -> &'static str {
    match m {
        StudyMode::NonLocal => "nonlocal",
        StudyMode::DifferentialBaseline => "baseline",
    }
}

pub fn expected_order(mode: StudyMode, k: usize) -> f64 {
    match mode {
        StudyMode::DifferentialBaseline => (k + 1) as f64,
        StudyMode::NonLocal => 1.0,
    }
}

pub fn study_csv(study: &ConvergenceStudy) -> String {
    let mut out = String::from("n,h,error_l1,error_l2,error_linf,slope_window\n");
    for r in &study.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n,
            fmt_f64(r.h),
            fmt_f64(r.error_l1),
            fmt_f64(r.error_l2),
            fmt_f64(r.error_linf),
            u8::from(r.slope_window)
        ));
    }
    out
}

fn run_one(spec: &PolySpec, args: &StudyArgs, k: usize, mode: StudyMode) -> AppResult<ConvergenceStudy> {
    let cfg = StudyConfig::new(k, args.length, args.n_list.clone())
        .with_mode(mode)
        .with_epsilon(args.epsilon)
        .with_norm(args.norm);
    convergence_study(spec, &cfg).map_err(|e| AppError::Config(format!("error study: {e}")))
}

/// Runs both modes for every order and writes one CSV per study plus a
/// summary JSON. The two modes of an order run on separate threads.
pub fn run_error_study(args: &StudyArgs, out_dir: &Path) -> AppResult<StudyReport> {
    if !(args.tolerance.is_finite() && args.tolerance >= 0.0) {
        return Err(AppError::Config("tolerance must be nonnegative".into()));
    }
    if args.orders.is_empty() {
        return Err(AppError::Config("at least one model order".into()));
    }
    let spec = PolySpec::new(args.alpha.clone()).map_err(|e| AppError::Config(format!("alpha: {e}")))?;
    std::fs::create_dir_all(out_dir).map_err(|e| AppError::io(out_dir, e))?;
    let mut studies = Vec::new();
    for &k in &args.orders {
        let (base, nonlocal) = std::thread::scope(|s| {
            let b = s.spawn(|| run_one(&spec, args, k, StudyMode::DifferentialBaseline));
            let n = s.spawn(|| run_one(&spec, args, k, StudyMode::NonLocal));
            (b.join().expect("study thread"), n.join().expect("study thread"))
        });
        let mut pair = Vec::new();
        for (mode, study) in [(StudyMode::DifferentialBaseline, base?), (StudyMode::NonLocal, nonlocal?)] {
            let name = format!("error_study_{}_k{k}.csv", mode_name(mode));
            write_text(&out_dir.join(&name), &study_csv(&study))?;
            let expected = expected_order(mode, k);
            let within = study.slope.is_some_and(|s| (s - expected).abs() <= args.tolerance);
            pair.push((mode, study.clone()));
            studies.push(StudySummary {
                mode,
                order: k,
                slope: study.slope,
                expected,
                floor_detected: study.floor_detected,
                within_tolerance: within,
                csv: name,
            });
        }
        if args.svg {
            let lines: Vec<(String, Vec<(f64, f64)>)> = pair
                .iter()
                .map(|(m, s)| {
                    let pts = s.rows.iter().map(|r| (r.h.log10(), r.error(args.norm))).collect();
                    (mode_name(*m).to_string(), pts)
                })
                .collect();
            let refs: Vec<(&str, &[(f64, f64)])> = lines.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
            let chart = svg::line_chart(&format!("error vs h, k = {k}"), "log10 h", "error", &refs, true);
            write_text(&out_dir.join(format!("error_study_k{k}.svg")), &chart)?;
        }
    }
    let report = StudyReport {
        schema: crate::config::SCHEMA_VERSION,
        args: args.clone(),
        studies,
    };
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| AppError::Data(e.to_string()))?;
    text.push('\n');
    write_text(&summary_path(out_dir), &text)?;
    Ok(report)
}

pub fn summary_path(out_dir: &Path) -> PathBuf {
    out_dir.join("error_study_summary.json")
}
