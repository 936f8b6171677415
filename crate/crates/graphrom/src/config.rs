//! JSON run configuration.
//!
//! Every struct rejects unknown fields, and parse failures report the dotted
//! path of the offending field.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use graphrom_core::basis::{DynamicsBasisConfig, SpecialKind, TaylorBasisConfig};
use graphrom_core::regression::{Backend, Lambda, LossSpec, SolverKind, SolverSpec, StopRule};
use graphrom_core::{WeightConfig, WeightFamily};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::io::DataFormat;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub input: InputConfig,
    pub columns: ColumnRoles,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub weight: WeightSection,
    pub model: ModelConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub loss: LossSection,
    #[serde(default)]
    pub stepwise: StepwiseSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
    /// Inferred from the extension when absent.
    #[serde(default)]
    pub format: Option<DataFormat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnRoles {
    #[serde(default = "default_time")]
    pub time: String,
    /// State-vector components, in graph coordinate order.
    pub state: Vec<String>,
    /// Extra per-row quantities (energies, interface lengths, counts).
    #[serde(default)]
    pub observables: Vec<String>,
    /// Regression target. May name a column produced by preprocessing.
    pub target: String,
}

fn default_time() -> String {
    "t".into()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Multiplicative factors applied to raw columns before anything else.
    #[serde(default)]
    pub scale: BTreeMap<String, f64>,
    #[serde(default)]
    pub filter: Option<FilterConfig>,
    /// Column to differentiate in time; adds `d<col>_dt` and drops the first row.
    #[serde(default)]
    pub derivative: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub window: usize,
    /// Kernel width in samples.
    pub sigma: f64,
    #[serde(default = "one")]
    pub passes: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSection {
    pub family: WeightFamily,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub scale: Option<f64>,
}

impl Default for WeightSection {
    fn default() -> Self {
        WeightSection {
            family: WeightFamily::Polynomial,
            radius: None,
            sigma: None,
            epsilon: None,
            scale: None,
        }
    }
}

impl WeightSection {
    pub fn to_core(&self) -> WeightConfig {
        WeightConfig {
            family: self.family,
            radius: self.radius,
            sigma: self.sigma,
            epsilon: self.epsilon,
            scale: self.scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Dynamics(DynamicsModel),
    Taylor(TaylorModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsModel {
    pub variables: Vec<String>,
    #[serde(default)]
    pub derivative_function: Option<String>,
    #[serde(default)]
    pub derivatives: Vec<Vec<String>>,
    #[serde(default)]
    pub specials: Vec<SpecialFactor>,
    pub degree_cap: u32,
    #[serde(default = "yes")]
    pub symmetric_derivatives: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecialFactor {
    pub name: String,
    pub kind: SpecialKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaylorModel {
    pub order: usize,
    pub variables: Vec<String>,
    #[serde(default)]
    pub base_index: usize,
    #[serde(default)]
    pub symmetric: bool,
}

impl DynamicsModel {
    pub fn to_core(&self) -> DynamicsBasisConfig {
        DynamicsBasisConfig {
            variables: self.variables.clone(),
            derivative_function: self.derivative_function.clone(),
            derivatives: self.derivatives.clone(),
            specials: self.specials.iter().map(|s| (s.name.clone(), s.kind)).collect(),
            degree_cap: self.degree_cap,
            symmetric_derivatives: self.symmetric_derivatives,
        }
    }
}

impl TaylorModel {
    pub fn to_core(&self, function_name: &str) -> TaylorBasisConfig {
        TaylorBasisConfig {
            order: self.order,
            variables: self.variables.clone(),
            base_index: self.base_index,
            symmetric: self.symmetric,
            function_name: function_name.into(),
        }
    }
}

/// `lambda` is either a number or the string `"cv"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSetting {
    Value(f64),
    Auto(CvKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CvKeyword {
    #[serde(rename = "cv")]
    Cv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub kind: SolverKind,
    #[serde(default = "zero_lambda")]
    pub lambda: LambdaSetting,
    #[serde(default)]
    pub cv_grid: Vec<f64>,
    #[serde(default)]
    pub backend: Option<Backend>,
}

fn zero_lambda() -> LambdaSetting {
    LambdaSetting::Value(0.0)
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            kind: SolverKind::Ols,
            lambda: zero_lambda(),
            cv_grid: Vec::new(),
            backend: None,
        }
    }
}

impl SolverSection {
    pub fn to_core(&self) -> SolverSpec {
        let mut spec = match self.kind {
            SolverKind::Ols => SolverSpec::ols(),
            SolverKind::Ridge => SolverSpec::ridge(0.0),
            SolverKind::Lasso => SolverSpec::lasso(0.0),
        };
        spec.lambda = match self.lambda {
            LambdaSetting::Value(v) => Lambda::Value(v),
            LambdaSetting::Auto(CvKeyword::Cv) => Lambda::Cv,
        };
        spec.cv_grid = self.cv_grid.clone();
        if let Some(b) = self.backend {
            spec.backend = b;
        }
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSection {
    #[serde(default = "unit")]
    pub l2: f64,
    #[serde(default)]
    pub l1: f64,
    #[serde(default)]
    pub linf: f64,
    #[serde(default = "one")]
    pub peak_passes: usize,
}

fn unit() -> f64 {
    1.0
}

impl Default for LossSection {
    fn default() -> Self {
        LossSection {
            l2: 1.0,
            l1: 0.0,
            linf: 0.0,
            peak_passes: 1,
        }
    }
}

impl LossSection {
    pub fn to_core(&self) -> LossSpec {
        LossSpec {
            l2: self.l2,
            l1: self.l1,
            linf: self.linf,
            peak_passes: self.peak_passes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepwiseSection {
    #[serde(default = "one")]
    pub min_terms: usize,
    #[serde(default)]
    pub f_threshold: Option<f64>,
    /// Term counts whose predictions go to `fit.csv`; the final model is always included.
    #[serde(default)]
    pub checkpoints: Vec<usize>,
}

impl Default for StepwiseSection {
    fn default() -> Self {
        StepwiseSection {
            min_terms: 1,
            f_threshold: None,
            checkpoints: Vec::new(),
        }
    }
}

impl StepwiseSection {
    pub fn to_core(&self) -> StopRule {
        StopRule {
            min_terms: self.min_terms,
            f_threshold: self.f_threshold,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Also write static SVG charts.
    #[serde(default)]
    pub svg: bool,
}

/// Parses a config from JSON text, reporting the field path on failure.
pub fn parse_config(text: &str) -> AppResult<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        AppError::Config(format!("at `{path}`: {}", e.into_inner()))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> AppResult<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

fn field(path: &str, reason: impl std::fmt::Display) -> AppError {
    AppError::Config(format!("at `{path}`: {reason}"))
}

impl RunConfig {
    pub fn validate(&self) -> AppResult<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(field("schema", format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema)));
        }
        if self.columns.state.is_empty() {
            return Err(field("columns.state", "at least one state component"));
        }
        if self.columns.target.is_empty() {
            return Err(field("columns.target", "must name a column"));
        }
        for (name, f) in &self.preprocess.scale {
            if !(f.is_finite() && *f != 0.0) {
                return Err(field(&format!("preprocess.scale.{name}"), "factor must be finite and nonzero"));
            }
        }
        if let Some(f) = &self.preprocess.filter {
            if f.window == 0 {
                return Err(field("preprocess.filter.window", "must be at least 1"));
            }
            if !(f.sigma.is_finite() && f.sigma > 0.0) {
                return Err(field("preprocess.filter.sigma", "must be positive"));
            }
        }
        match &self.model {
            ModelConfig::Dynamics(d) => {
                if d.variables.is_empty() {
                    return Err(field("model.variables", "at least one variable"));
                }
                if !d.derivatives.is_empty() && d.derivative_function.is_none() {
                    return Err(field("model.derivative_function", "required when derivatives are listed"));
                }
            }
            ModelConfig::Taylor(t) => {
                if t.variables.is_empty() {
                    return Err(field("model.variables", "at least one variable"));
                }
                for v in &t.variables {
                    if !self.columns.state.contains(v) {
                        return Err(field("model.variables", format!("`{v}` is not a state component")));
                    }
                }
            }
        }
        self.solver.to_core().validate().map_err(|e| field("solver", e))?;
        self.loss.to_core().validate().map_err(|e| field("loss", e))?;
        if self.stepwise.min_terms == 0 {
            return Err(field("stepwise.min_terms", "must be at least 1"));
        }
        if let Some(f) = self.stepwise.f_threshold {
            if !(f.is_finite() && f >= 0.0) {
                return Err(field("stepwise.f_threshold", "must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}
