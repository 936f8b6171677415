//! Regularized least squares, multi-norm losses, leave-one-out
//! cross-validation and backwards stepwise selection.

use alloc::string::String;
use alloc::vec::Vec;

use crate::basis::OperatorBasis;
use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;
use crate::preprocess::{find_peaks, NormalizationPair};
use crate::Matrix;

/// Relative singular-value cutoff.
pub const SVD_CUTOFF: f64 = 1e-12;
/// Lasso coordinate-descent tolerance on the largest coefficient change.
pub const LASSO_TOL: f64 = 1e-10;
/// Residual-correction passes after each SVD solve.
const REFINEMENT_STEPS: usize = 2;
/// Lasso sweep limit.
pub const LASSO_MAX_SWEEPS: usize = 100_000;

/// Weighted combination of loss norms.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossSpec {
    /// Weight of the root-mean-square error over all samples.
    pub l2: f64,
    /// Weight of the mean absolute error over the peak set of the target.
    pub l1: f64,
    /// Weight of the largest absolute error.
    pub linf: f64,
    /// Peak-finding passes defining the `l1` domain.
    pub peak_passes: usize,
}

impl Default for LossSpec {
    fn default() -> Self {
        LossSpec {
            l2: 1.0,
            l1: 0.0,
            linf: 0.0,
            peak_passes: 1,
        }
    }
}

impl LossSpec {
    pub fn validate(&self) -> Result<()> {
        let ws = [self.l2, self.l1, self.linf];
        if ws.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::param("loss", "weights must be finite and nonnegative"));
        }
        if ws.iter().all(|w| *w == 0.0) {
            return Err(Error::param("loss", "at least one weight must be positive"));
        }
        if self.l1 > 0.0 && self.peak_passes == 0 {
            return Err(Error::param("peak_passes", "at least one pass"));
        }
        Ok(())
    }
}

/// Loss value and its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub l2: f64,
    pub l1: f64,
    pub linf: f64,
    /// The `l1` term was requested but the peak set was empty.
    pub empty_peak_set: bool,
}

/// `w2 * rms + w1 * mean_{peaks}|e| + winf * max|e|` with `e = y_hat - y`.
pub fn weighted_loss(y: &[f64], y_hat: &[f64], spec: &LossSpec) -> Result<LossBreakdown> {
    if y.len() != y_hat.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            found: y_hat.len(),
            context: "prediction length",
        });
    }
    if y.is_empty() {
        return Err(Error::TooFew {
            what: "samples",
            required: 1,
            found: 0,
        });
    }
    spec.validate()?;
    let err: Vec<f64> = y.iter().zip(y_hat).map(|(a, b)| b - a).collect();
    let sq: Vec<f64> = err.iter().map(|e| e * e).collect();
    let l2 = libm::sqrt(pairwise_sum(&sq) / err.len() as f64);
    let linf = err.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let (mut l1, mut empty_peak_set) = (0.0, false);
    if spec.l1 > 0.0 {
        let peaks = if y.len() >= 3 {
            find_peaks(y, spec.peak_passes)?
        } else {
            Vec::new()
        };
        if peaks.is_empty() {
            empty_peak_set = true;
        } else {
            let abs: Vec<f64> = peaks.iter().map(|&k| err[k].abs()).collect();
            l1 = pairwise_sum(&abs) / abs.len() as f64;
        }
    }
    Ok(LossBreakdown {
        total: spec.l2 * l2 + spec.l1 * l1 + spec.linf * linf,
        l2,
        l1,
        linf,
        empty_peak_set,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SolverKind {
    Ols,
    Ridge,
    Lasso,
}

/// Regularization strength: fixed or chosen by leave-one-out CV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    Value(f64),
    Cv,
}

/// Linear-algebra path for OLS and Ridge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Backend {
    /// SVD least-squares solve (augmented system for Ridge).
    LeastSquares,
    /// SVD filter factors `s / (s^2 + lambda)`.
    #[default]
    Svd,
    /// Explicit regularized pseudo-inverse.
    PseudoInverse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSpec {
    pub kind: SolverKind,
    pub lambda: Lambda,
    pub cv_grid: Vec<f64>,
    pub backend: Backend,
}

impl SolverSpec {
    pub fn ols() -> Self {
        SolverSpec {
            kind: SolverKind::Ols,
            lambda: Lambda::Value(0.0),
            cv_grid: Vec::new(),
            backend: Backend::LeastSquares,
        }
    }

    pub fn ridge(lambda: f64) -> Self {
        SolverSpec {
            kind: SolverKind::Ridge,
            lambda: Lambda::Value(lambda),
            cv_grid: Vec::new(),
            backend: Backend::Svd,
        }
    }

    pub fn lasso(lambda: f64) -> Self {
        SolverSpec {
            kind: SolverKind::Lasso,
            lambda: Lambda::Value(lambda),
            cv_grid: Vec::new(),
            backend: Backend::Svd,
        }
    }

    pub fn with_cv(mut self, grid: Vec<f64>) -> Self {
        self.lambda = Lambda::Cv;
        self.cv_grid = grid;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.lambda {
            Lambda::Value(l) if !(l.is_finite() && l >= 0.0) => {
                return Err(Error::param("lambda", "must be finite and nonnegative"))
            }
            Lambda::Cv if self.cv_grid.is_empty() => {
                return Err(Error::param("cv_grid", "empty grid with lambda = cv"))
            }
            _ => {}
        }
        if self.cv_grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::param("cv_grid", "entries must be finite and nonnegative"));
        }
        Ok(())
    }

    /// Solves with strength `lambda` (ignored by OLS).
    pub fn solve(&self, x: &Matrix, y: &[f64], lambda: f64) -> Result<Fit> {
        match self.kind {
            SolverKind::Ols => solve_ridge(x, y, 0.0, self.backend),
            SolverKind::Ridge => solve_ridge(x, y, lambda, self.backend),
            SolverKind::Lasso => lasso_fit(x, y, lambda),
        }
    }
}

/// Solver diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitInfo {
    /// Singular values kept.
    pub rank: usize,
    /// Absolute singular-value cutoff used.
    pub cutoff: f64,
    /// Coordinate-descent sweeps (Lasso only).
    pub sweeps: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub coeffs: Vec<f64>,
    pub info: FitInfo,
}

fn check_problem(x: &Matrix, y: &[f64]) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::TooFew {
            what: "rows and columns",
            required: 1,
            found: 0,
        });
    }
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: y.len(),
            context: "target length",
        });
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::param("lambda", "must be finite and nonnegative"));
    }
    Ok(())
}

fn solve_ridge(x: &Matrix, y: &[f64], lambda: f64, backend: Backend) -> Result<Fit> {
    check_problem(x, y)?;
    check_lambda(lambda)?;
    let p = x.ncols();
    let yv = nalgebra::DVector::from_column_slice(y);
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, s| m.max(*s));
    let cutoff = SVD_CUTOFF * smax;
    let rank = svd.singular_values.iter().filter(|s| **s > cutoff).count();
    let info = FitInfo {
        rank,
        cutoff,
        sweeps: 0,
        converged: true,
    };
    if smax == 0.0 {
        return Ok(Fit {
            coeffs: alloc::vec![0.0; p],
            info,
        });
    }
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let filter = |s: f64| if s > cutoff { s / (s * s + lambda) } else { 0.0 };
    let mut coeffs: Vec<f64> = match backend {
        Backend::Svd => {
            let uty = u.transpose() * &yv;
            let scaled = nalgebra::DVector::from_iterator(
                uty.len(),
                uty.iter().zip(svd.singular_values.iter()).map(|(c, s)| c * filter(*s)),
            );
            (vt.transpose() * scaled).iter().copied().collect()
        }
        Backend::PseudoInverse => {
            let mut vs = vt.transpose();
            for (k, s) in svd.singular_values.iter().enumerate() {
                vs.column_mut(k).scale_mut(filter(*s));
            }
            let pinv = vs * u.transpose();
            (pinv * &yv).iter().copied().collect()
        }
        Backend::LeastSquares => {
            let (a, b) = if lambda > 0.0 {
                let n = x.nrows();
                let mut a = Matrix::zeros(n + p, p);
                a.view_mut((0, 0), (n, p)).copy_from(x);
                for k in 0..p {
                    a[(n + k, k)] = libm::sqrt(lambda);
                }
                let mut b = nalgebra::DVector::zeros(n + p);
                b.rows_mut(0, n).copy_from(&yv);
                (a, b)
            } else {
                (x.clone(), yv.clone())
            };
            let aug = a.svd(true, true);
            let amax = aug.singular_values.iter().fold(0.0f64, |m, s| m.max(*s));
            let sol = aug
                .solve(&b, SVD_CUTOFF * amax)
                .map_err(|e| Error::param("least-squares", e))?;
            sol.iter().copied().collect()
        }
    };
    // Refinement on the augmented residual [y - X g; -sqrt(lambda) g] corrects
    // the limited accuracy of the computed singular vectors.
    for _ in 0..REFINEMENT_STEPS {
        let g = nalgebra::DVector::from_column_slice(&coeffs);
        let r = &yv - x * &g;
        let utr = u.transpose() * r;
        let vtg = vt * &g;
        let step = nalgebra::DVector::from_iterator(
            utr.len(),
            (0..utr.len()).map(|k| {
                let s = svd.singular_values[k];
                if s > cutoff {
                    (s * utr[k] - lambda * vtg[k]) / (s * s + lambda)
                } else {
                    0.0
                }
            }),
        );
        let delta = vt.transpose() * step;
        for (c, d) in coeffs.iter_mut().zip(delta.iter()) {
            *c += d;
        }
    }
    Ok(Fit { coeffs, info })
}

/// Minimum-norm least squares via the SVD.
pub fn ols_fit(x: &Matrix, y: &[f64]) -> Result<Fit> {
    solve_ridge(x, y, 0.0, Backend::LeastSquares)
}

/// Ridge regression `min |y - X g|^2 + lambda |g|^2` via SVD filter factors.
pub fn ridge_fit(x: &Matrix, y: &[f64], lambda: f64) -> Result<Fit> {
    solve_ridge(x, y, lambda, Backend::Svd)
}

/// Ridge regression with an explicit backend.
pub fn ridge_fit_with(x: &Matrix, y: &[f64], lambda: f64, backend: Backend) -> Result<Fit> {
    solve_ridge(x, y, lambda, backend)
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Lasso `min |y - X g|^2 + lambda |g|_1` by cyclic coordinate descent.
///
/// Non-convergence within [`LASSO_MAX_SWEEPS`] is reported in the fit info.
pub fn lasso_fit(x: &Matrix, y: &[f64], lambda: f64) -> Result<Fit> {
    check_problem(x, y)?;
    check_lambda(lambda)?;
    let (n, p) = (x.nrows(), x.ncols());
    let col_sq: Vec<f64> = (0..p).map(|c| x.column(c).norm_squared()).collect();
    let mut gamma = alloc::vec![0.0; p];
    let mut resid: Vec<f64> = y.to_vec();
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < LASSO_MAX_SWEEPS {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for c in 0..p {
            if col_sq[c] == 0.0 {
                continue;
            }
            let col = x.column(c);
            let mut rho = 0.0;
            for r in 0..n {
                rho += col[r] * resid[r];
            }
            rho += col_sq[c] * gamma[c];
            let next = soft_threshold(rho, 0.5 * lambda) / col_sq[c];
            let delta = next - gamma[c];
            if delta != 0.0 {
                for r in 0..n {
                    resid[r] -= col[r] * delta;
                }
                gamma[c] = next;
            }
            max_change = max_change.max(delta.abs());
        }
        if max_change < LASSO_TOL {
            converged = true;
            break;
        }
    }
    let smax = libm::sqrt(col_sq.iter().fold(0.0f64, |m, v| m.max(*v)));
    Ok(Fit {
        coeffs: gamma,
        info: FitInfo {
            rank: col_sq.iter().filter(|v| **v > 0.0).count(),
            cutoff: SVD_CUTOFF * smax,
            sweeps,
            converged,
        },
    })
}

fn predict(x: &Matrix, gamma: &[f64]) -> Vec<f64> {
    (0..x.nrows())
        .map(|r| {
            let vals: Vec<f64> = (0..x.ncols()).map(|c| x[(r, c)] * gamma[c]).collect();
            pairwise_sum(&vals)
        })
        .collect()
}

/// Leave-one-out result.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub best_lambda: f64,
    /// `(lambda, loss of the pooled held-out predictions)` per grid entry.
    pub table: Vec<(f64, f64)>,
    /// Some training fold had fewer rows than columns.
    pub underdetermined: bool,
}

/// Held-out predictions of every single-row fold.
pub fn loo_predictions(x: &Matrix, y: &[f64], solver: &SolverSpec, lambda: f64) -> Result<Vec<f64>> {
    check_problem(x, y)?;
    let n = x.nrows();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let rows: Vec<usize> = (0..n).filter(|&r| r != k).collect();
        let xt = x.select_rows(rows.iter());
        let yt: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
        let fit = solver.solve(&xt, &yt, lambda)?;
        let row: Vec<f64> = (0..x.ncols()).map(|c| x[(k, c)] * fit.coeffs[c]).collect();
        out.push(pairwise_sum(&row));
    }
    Ok(out)
}

/// Chooses lambda from `solver.cv_grid` by leave-one-out cross-validation.
///
/// The held-out predictions of all folds are pooled and scored with `loss`.
/// Ties within a relative `1e-12` go to the larger lambda.
pub fn loo_cross_validate(x: &Matrix, y: &[f64], solver: &SolverSpec, loss: &LossSpec) -> Result<CvResult> {
    check_problem(x, y)?;
    if x.nrows() < 3 {
        return Err(Error::TooFew {
            what: "rows for cross-validation",
            required: 3,
            found: x.nrows(),
        });
    }
    if solver.cv_grid.is_empty() {
        return Err(Error::param("cv_grid", "empty"));
    }
    let mut table = Vec::with_capacity(solver.cv_grid.len());
    for &lambda in &solver.cv_grid {
        check_lambda(lambda)?;
        let pred = loo_predictions(x, y, solver, lambda)?;
        table.push((lambda, weighted_loss(y, &pred, loss)?.total));
    }
    let mut best = table[0];
    for &(lambda, value) in &table[1..] {
        let tol = 1e-12 * best.1.abs().max(value.abs());
        if value < best.1 - tol || ((value - best.1).abs() <= tol && lambda > best.0) {
            best = (lambda, value);
        }
    }
    Ok(CvResult {
        best_lambda: best.0,
        table,
        underdetermined: x.nrows() - 1 < x.ncols(),
    })
}

/// Stopping rule for backwards stepwise selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    /// Stop once this many terms (fixed included) remain.
    pub min_terms: usize,
    /// Stop when every candidate's F-statistic exceeds this value.
    pub f_threshold: Option<f64>,
}

/// One stepwise iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub iteration: usize,
    pub n_terms: usize,
    /// Active column indices into the basis, fixed included.
    pub active: Vec<usize>,
    /// Column removed to reach this model (none for the full model).
    pub removed: Option<usize>,
    pub removed_label: Option<String>,
    pub f_stat: Option<f64>,
    pub loss: LossBreakdown,
    /// Unnormalized coefficients over all basis columns (zero when inactive).
    pub coeffs: Vec<f64>,
    /// Normalized-frame coefficients over all basis columns.
    pub coeffs_normalized: Vec<f64>,
    pub lambda: f64,
    pub rank: usize,
    /// Removal was ranked by loss increase because `n <= P_active`.
    pub degenerate_f: bool,
    /// Loss decreased relative to the previous record.
    pub loss_decreased: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepwiseWarning {
    /// Lasso is supported but performs poorly inside stepwise selection.
    LassoDiscouraged,
    /// The `l1` loss term had no peaks to average over.
    EmptyPeakSet,
    /// Coordinate descent hit its sweep limit.
    LassoNotConverged,
    /// A CV training fold had more columns than rows.
    UnderdeterminedCv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepwiseTrace {
    pub records: Vec<StepRecord>,
    pub labels: Vec<String>,
    pub normalization: NormalizationPair,
    pub warnings: Vec<StepwiseWarning>,
}

impl StepwiseTrace {
    pub fn last(&self) -> &StepRecord {
        self.records.last().expect("trace holds the full model")
    }

    /// Record with exactly `n_terms` terms.
    pub fn with_terms(&self, n_terms: usize) -> Option<&StepRecord> {
        self.records.iter().find(|r| r.n_terms == n_terms)
    }

    fn warn(&mut self, w: StepwiseWarning) {
        if !self.warnings.contains(&w) {
            self.warnings.push(w);
        }
    }
}

struct Frame<'a> {
    basis: &'a OperatorBasis,
    xt: Matrix,
    yt: Vec<f64>,
    y: &'a [f64],
    fixed: Vec<f64>,
    pair: NormalizationPair,
    solver: &'a SolverSpec,
    loss: &'a LossSpec,
}

struct Evaluated {
    rss: f64,
    loss: LossBreakdown,
    coeffs: Vec<f64>,
    coeffs_normalized: Vec<f64>,
    rank: usize,
    converged: bool,
}

impl Frame<'_> {
    fn evaluate(&self, free: &[usize], lambda: f64) -> Result<Evaluated> {
        let p = self.basis.n_terms();
        let mut gt = alloc::vec![0.0; p];
        let (mut rank, mut converged) = (0, true);
        let fitted = if free.is_empty() {
            alloc::vec![0.0; self.yt.len()]
        } else {
            let xs = self.xt.select_columns(free.iter());
            let fit = self.solver.solve(&xs, &self.yt, lambda)?;
            rank = fit.info.rank;
            converged = fit.info.converged;
            for (k, &c) in free.iter().enumerate() {
                gt[c] = fit.coeffs[k];
            }
            predict(&xs, &fit.coeffs)
        };
        let res: Vec<f64> = self.yt.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).collect();
        let rss = pairwise_sum(&res);
        let ny = self.pair.ny[0];
        let mut coeffs = alloc::vec![0.0; p];
        for c in 0..p {
            if self.basis.fixed_mask[c] {
                coeffs[c] = 1.0;
                gt[c] = ny / self.pair.nx[c];
            } else {
                coeffs[c] = gt[c] * self.pair.nx[c] / ny;
            }
        }
        let y_hat: Vec<f64> = fitted.iter().zip(&self.fixed).map(|(f, b)| f / ny + b).collect();
        let loss = weighted_loss(self.y, &y_hat, self.loss)?;
        Ok(Evaluated {
            rss,
            loss,
            coeffs,
            coeffs_normalized: gt,
            rank,
            converged,
        })
    }

    fn choose_lambda(&self, free: &[usize]) -> Result<(f64, bool)> {
        match self.solver.lambda {
            Lambda::Value(l) => Ok((l, false)),
            Lambda::Cv if free.is_empty() || self.solver.kind == SolverKind::Ols => {
                Ok((self.solver.cv_grid[0], false))
            }
            Lambda::Cv => {
                let xs = self.xt.select_columns(free.iter());
                let cv = loo_cross_validate(&xs, &self.yt, self.solver, self.loss)?;
                Ok((cv.best_lambda, cv.underdetermined))
            }
        }
    }
}

/// Backwards stepwise selection with a one-degree-of-freedom F-test.
///
/// Fits run in the normalized frame of [`OperatorBasis::target_normalization`]
/// with fixed columns pinned to unit coefficient. Each iteration removes the
/// free term with the smallest
/// `F = (RSS_without - RSS_with) / (RSS_with / (n - P_active))`; equal F values
/// remove the term with the larger label. When `n <= P_active` terms are ranked
/// by loss increase instead and the record is flagged.
pub fn stepwise_backward(
    basis: &OperatorBasis,
    y: &[f64],
    solver: &SolverSpec,
    loss: &LossSpec,
    stop: StopRule,
) -> Result<StepwiseTrace> {
    solver.validate()?;
    loss.validate()?;
    if stop.min_terms == 0 || stop.min_terms > basis.n_terms() {
        return Err(Error::param("min_terms", "must be in 1..=number of basis columns"));
    }
    let pair = basis.target_normalization(y)?;
    let fixed = basis.fixed_contribution();
    let xt = pair.apply_x(&basis.x);
    let ny = pair.ny[0];
    let yt: Vec<f64> = y.iter().zip(&fixed).map(|(a, b)| (a - b) * ny).collect();
    let frame = Frame {
        basis,
        xt,
        yt,
        y,
        fixed,
        pair: pair.clone(),
        solver,
        loss,
    };
    let labels = basis.labels();
    let n_fixed = basis.fixed_mask.iter().filter(|f| **f).count();
    let mut free: Vec<usize> = (0..basis.n_terms()).filter(|&c| !basis.fixed_mask[c]).collect();

    let mut trace = StepwiseTrace {
        records: Vec::new(),
        labels: labels.clone(),
        normalization: pair,
        warnings: Vec::new(),
    };
    if solver.kind == SolverKind::Lasso {
        trace.warn(StepwiseWarning::LassoDiscouraged);
    }

    let record = |trace: &mut StepwiseTrace,
                  free: &[usize],
                  ev: Evaluated,
                  lambda: f64,
                  removed: Option<(usize, f64, bool)>| {
        if ev.loss.empty_peak_set {
            trace.warn(StepwiseWarning::EmptyPeakSet);
        }
        if !ev.converged {
            trace.warn(StepwiseWarning::LassoNotConverged);
        }
        let loss_decreased = trace
            .records
            .last()
            .map(|r| ev.loss.total < r.loss.total * (1.0 - 1e-12))
            .unwrap_or(false);
        let mut active: Vec<usize> = (0..basis.n_terms())
            .filter(|&c| basis.fixed_mask[c] || free.contains(&c))
            .collect();
        active.sort_unstable();
        trace.records.push(StepRecord {
            iteration: trace.records.len(),
            n_terms: active.len(),
            active,
            removed: removed.map(|r| r.0),
            removed_label: removed.map(|r| labels[r.0].clone()),
            f_stat: removed.map(|r| r.1),
            loss: ev.loss,
            coeffs: ev.coeffs,
            coeffs_normalized: ev.coeffs_normalized,
            lambda,
            rank: ev.rank,
            degenerate_f: removed.map(|r| r.2).unwrap_or(false),
            loss_decreased,
        });
    };

    let (mut lambda, under) = frame.choose_lambda(&free)?;
    if under {
        trace.warn(StepwiseWarning::UnderdeterminedCv);
    }
    let mut current = frame.evaluate(&free, lambda)?;
    let mut with_rss = current.rss;
    let mut with_loss = current.loss.total;
    record(&mut trace, &free, current, lambda, None);

    let n = basis.n_rows();
    while !free.is_empty() && free.len() + n_fixed > stop.min_terms {
        let p_active = free.len();
        let degenerate = n <= p_active;
        // (score, column, F)
        let mut best: Option<(f64, usize, f64)> = None;
        for (k, &c) in free.iter().enumerate() {
            let mut without = free.clone();
            without.remove(k);
            let ev = frame.evaluate(&without, lambda)?;
            let numer = (ev.rss - with_rss).max(0.0);
            let f = if degenerate {
                f64::NAN
            } else {
                let denom = with_rss / (n - p_active) as f64;
                if numer == 0.0 {
                    0.0
                } else if denom == 0.0 {
                    f64::INFINITY
                } else {
                    numer / denom
                }
            };
            let score = if degenerate { ev.loss.total - with_loss } else { f };
            let better = match best {
                None => true,
                Some((s, bc, _)) => {
                    let tol = 1e-12 * s.abs().max(score.abs());
                    score < s - tol || ((score - s).abs() <= tol && labels[c] > labels[bc])
                }
            };
            if better {
                best = Some((score, c, f));
            }
        }
        let (_, col, f) = best.expect("free set is nonempty");
        if let (Some(th), false) = (stop.f_threshold, degenerate) {
            if f > th {
                break;
            }
        }
        free.retain(|&c| c != col);
        let (l, under) = frame.choose_lambda(&free)?;
        lambda = l;
        if under {
            trace.warn(StepwiseWarning::UnderdeterminedCv);
        }
        current = frame.evaluate(&free, lambda)?;
        with_rss = current.rss;
        with_loss = current.loss.total;
        record(&mut trace, &free, current, lambda, Some((col, f, degenerate)));
    }
    Ok(trace)
}
