use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use graphrom::config::load_config;
use graphrom::error::{AppError, AppResult};
use graphrom::io::{detect_format, ingest, write_series, write_text, DataFormat};
use graphrom::pipeline::{run_pipeline, run_weights_diag};
use graphrom::study::{run_error_study, summary_path, StudyArgs};
use graphrom::synth::{generate, Recipe, SynthSpec};
use graphrom_core::error_lab::ErrorNorm;

/// Non-local calculus surrogate models from time-series data.
#[derive(Parser, Debug)]
#[command(name = "graphrom", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a seeded synthetic data set as CSV.
    Synth {
        #[arg(long, value_enum)]
        recipe: Recipe,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 121)]
        n_steps: usize,
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
        /// Also write planted coefficients as JSON (planted recipes only).
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Validate an input file, alone or as referenced by a config.
    IngestCheck {
        #[arg(long, conflicts_with = "input")]
        config: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[arg(long, default_value = "t")]
        time: String,
    },
    /// Run the full pipeline and write model.json, trace.csv, fit.csv and weights_diag.csv.
    Fit {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convergence orders of the modified Taylor series on a polynomial target.
    ErrorStudy {
        /// Polynomial coefficients, constant first.
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, -1.0, 1.5])]
        alpha: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        length: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [1usize])]
        orders: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [4usize, 8, 16, 32, 64, 128, 256, 512, 1024])]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        #[arg(long, value_enum, default_value_t = NormArg::L2)]
        norm: NormArg,
        #[arg(long, default_value_t = 0.2)]
        tolerance: f64,
        /// Exit with status 4 when a slope misses its expected order.
        #[arg(long = "assert")]
        check: bool,
        #[arg(long)]
        svg: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the unit-vector Gram deviation report for a config's graph.
    WeightsDiag {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "weights_diag.csv")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NormArg {
    L1,
    L2,
    Linf,
}

/// `println!` that ignores a closed stdout, so piping into `head` is not an error.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn run(cli: Cli) -> AppResult<()> {
    match cli.command {
        Command::Synth {
            recipe,
            seed,
            n_steps,
            dt,
            noise,
            out,
            truth,
        } => {
            let data = generate(&SynthSpec {
                seed,
                n_steps,
                dt,
                recipe,
                noise,
            })?;
            write_series(&out, &data.series, "t")?;
            if let Some(path) = truth {
                let map: serde_json::Map<String, serde_json::Value> =
                    data.truth.iter().map(|(k, v)| (k.clone(), serde_json::json!(v))).collect();
                let text = serde_json::to_string_pretty(&map).map_err(|e| AppError::Data(e.to_string()))?;
                write_text(&path, &(text + "\n"))?;
            }
            eprintln!("wrote {} rows to {}", data.series.len(), out.display());
        }
        Command::IngestCheck {
            config,
            input,
            format,
            time,
        } => {
            let series = match (config, input) {
                (Some(c), _) => {
                    let cfg = load_config(&c)?;
                    let s = graphrom::pipeline::load_series(&cfg, &config_dir(&c))?;
                    graphrom::pipeline::preprocess(&cfg, s)?
                }
                (None, Some(path)) => {
                    let format = format.map(|f| match f {
                        FormatArg::Csv => DataFormat::Csv,
                        FormatArg::Json => DataFormat::Json,
                    });
                    if format.is_none() {
                        detect_format(&path)?;
                    }
                    ingest(&path, format, &time, &[])?
                }
                (None, None) => return Err(AppError::Config("pass --config or --input".into())),
            };
            let t = series.t();
            out!("rows: {}", series.len());
            if let (Some(a), Some(b)) = (t.first(), t.last()) {
                out!("time: {a} .. {b}");
            }
            for (name, _) in series.columns() {
                out!("column: {name}");
            }
        }
        Command::Fit { config, out } => {
            let cfg = load_config(&config)?;
            let base = config_dir(&config);
            let out_dir = match (out, &cfg.output.dir) {
                (Some(o), _) => o,
                (None, Some(d)) if d.is_absolute() => d.clone(),
                (None, Some(d)) => base.join(d),
                (None, None) => base.join("out"),
            };
            let summary = run_pipeline(&cfg, &base, &out_dir)?;
            out!("final terms ({}): {}", summary.final_terms.len(), summary.final_terms.join(", "));
            out!("final loss: {}", summary.final_loss);
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            for f in &summary.files {
                out!("wrote {}", f.display());
            }
        }
        Command::ErrorStudy {
            alpha,
            length,
            orders,
            n_list,
            epsilon,
            norm,
            tolerance,
            check,
            svg,
            out,
        } => {
            let args = StudyArgs {
                alpha,
                length,
                orders,
                n_list,
                epsilon,
                norm: match norm {
                    NormArg::L1 => ErrorNorm::L1,
                    NormArg::L2 => ErrorNorm::L2,
                    NormArg::Linf => ErrorNorm::Linf,
                },
                tolerance,
                svg,
            };
            let report = run_error_study(&args, &out)?;
            for s in &report.studies {
                let slope = s.slope.map_or("none".to_string(), |v| format!("{v:.4}"));
                out!("{:?} k={} slope={slope} expected={}", s.mode, s.order, s.expected);
            }
            out!("wrote {}", summary_path(&out).display());
            let failures = report.failures();
            if check && !failures.is_empty() {
                let names: Vec<String> = failures.iter().map(|s| format!("{:?} k={}", s.mode, s.order)).collect();
                return Err(AppError::Assertion(format!(
                    "slopes outside tolerance {}: {}",
                    args.tolerance,
                    names.join(", ")
                )));
            }
        }
        Command::WeightsDiag { config, out } => {
            let cfg = load_config(&config)?;
            let report = run_weights_diag(&cfg, &config_dir(&config), &out)?;
            out!("max Gram deviation {} at vertex {}", report.worst, report.worst_vertex);
            out!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
