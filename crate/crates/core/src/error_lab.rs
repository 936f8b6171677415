//! One-dimensional error analysis of the modified Taylor series.
//!
//! Training points sit on an even grid `{0, 2h, ..., 2nh}` and testing points
//! interlace them at the odd multiples of `h`. On this mesh the non-local
//! first derivative of a polynomial has a closed form in Faulhaber and
//! harmonic sums. The sums here carry a `1/n` prefactor: the mesh has `n + 1`
//! training vertices, so this is the same `1/(count - 1)` used by
//! [`crate::calculus`].
//!
//! Weights are polynomial with `p = 1`: `w(r) = C_eps / r^(2 + eps)` and
//! `C_eps = (1 - eps) R^eps`, where `R = L / 2` is the mesh half-width.

use alloc::vec::Vec;

use crate::calculus::{partial_derivative, DerivativeRequest};
use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;
use crate::regression::ols_fit;
use crate::state_graph::{from_weights, StateVector};
use crate::Matrix;

/// Interlaced uniform mesh on `[0, L]` with `n` intervals of width `2h`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Mesh1D {
    n: usize,
    length: f64,
}

impl Mesh1D {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "mesh needs at least one interval"));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::param("length", "must be finite and positive"));
        }
        Ok(Mesh1D { n, length })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Half spacing `h = L / (2n)`.
    pub fn h(&self) -> f64 {
        self.length / (2 * self.n) as f64
    }

    /// Weight radius `R = L / 2`.
    pub fn radius(&self) -> f64 {
        0.5 * self.length
    }

    /// Training point `2ih`. The last one is pinned to `L` exactly.
    pub fn training_point(&self, i: usize) -> f64 {
        if i == self.n {
            self.length
        } else {
            (2 * i) as f64 * self.h()
        }
    }

    pub fn training(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.training_point(i)).collect()
    }

    /// Testing point `(2j + 1)h`.
    pub fn testing_point(&self, j: usize) -> f64 {
        (2 * j + 1) as f64 * self.h()
    }

    pub fn testing(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.testing_point(j)).collect()
    }

    fn check_training(&self, i: usize) -> Result<()> {
        if i > self.n {
            return Err(Error::IndexOutOfRange {
                what: "training point",
                index: i,
                len: self.n + 1,
            });
        }
        Ok(())
    }
}

/// Polynomial target `u(x) = sum_l alpha_l x^l`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PolySpec {
    pub alpha: Vec<f64>,
}

impl PolySpec {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::param("alpha", "need at least the constant coefficient"));
        }
        if let Some(index) = alpha.iter().position(|a| !a.is_finite()) {
            return Err(Error::NonFinite {
                context: "polynomial coefficients",
                index,
            });
        }
        Ok(PolySpec { alpha })
    }

    /// Degree `K` (length minus one; trailing zeros are kept).
    pub fn degree(&self) -> usize {
        self.alpha.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.alpha.iter().rev().fold(0.0, |acc, a| acc * x + a)
    }

    /// Exact `d^order u / dx^order` at `x`.
    pub fn derivative(&self, order: usize, x: f64) -> f64 {
        let mut acc = 0.0;
        for q in (order..self.alpha.len()).rev() {
            let falling = (q - order + 1..=q).fold(1.0, |f, v| f * v as f64);
            acc = acc * x + falling * self.alpha[q];
        }
        acc
    }
}

const BERNOULLI_LCM: i128 = 2310;
/// `B_j * 2310` for `j = 0..=10`, with `B_1 = -1/2`.
const BERNOULLI_SCALED: [i128; 11] = [2310, -1155, 385, 0, -77, 0, 55, 0, -77, 0, 175];

/// Largest power supported by [`faulhaber`].
pub const FAULHABER_MAX: usize = 10;

fn binom_i128(n: usize, k: usize) -> i128 {
    let mut acc: i128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as i128 / (i as i128 + 1);
    }
    acc
}

/// Faulhaber function `phi_l[n]` in exact integer arithmetic.
///
/// Uses the Bernoulli closed form. For `l >= 1` this is `sum_{j=0}^{n} j^l`.
/// For `l = 0` the closed form gives `n`, one less than the literal sum,
/// because the `0^0` term is not counted; that value is returned as is.
pub fn faulhaber(l: usize, n: u64) -> Result<i128> {
    if l > FAULHABER_MAX {
        return Err(Error::param("l", alloc::format!("Bernoulli table ends at {FAULHABER_MAX}")));
    }
    let n = n as i128;
    let mut acc: i128 = 0;
    for (j, &b) in BERNOULLI_SCALED.iter().enumerate().take(l + 1) {
        if b == 0 {
            continue;
        }
        let sign = if j % 2 == 1 { -1 } else { 1 };
        let term = n
            .checked_pow((l + 1 - j) as u32)
            .and_then(|p| p.checked_mul(binom_i128(l + 1, j) * b * sign))
            .ok_or(Error::Overflow("faulhaber"))?;
        acc = acc.checked_add(term).ok_or(Error::Overflow("faulhaber"))?;
    }
    let den = BERNOULLI_LCM * (l as i128 + 1);
    debug_assert_eq!(acc % den, 0);
    Ok(acc / den)
}

/// Floating point [`faulhaber`] for arguments whose exact value overflows.
pub fn faulhaber_f64(l: usize, n: u64) -> Result<f64> {
    if l > FAULHABER_MAX {
        return Err(Error::param("l", alloc::format!("Bernoulli table ends at {FAULHABER_MAX}")));
    }
    if let Ok(v) = faulhaber(l, n) {
        return Ok(v as f64);
    }
    let n = n as f64;
    let mut acc = 0.0;
    for (j, &b) in BERNOULLI_SCALED.iter().enumerate().take(l + 1) {
        let sign = if j % 2 == 1 { -1.0 } else { 1.0 };
        acc += sign * binom_i128(l + 1, j) as f64 * b as f64 * libm::pow(n, (l + 1 - j) as f64);
    }
    Ok(acc / (BERNOULLI_LCM as f64 * (l + 1) as f64))
}

/// Generalized harmonic number `sum_{j=1}^{n} j^(-eps)`.
pub fn harmonic(epsilon: f64, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::param("epsilon", "must be finite and nonnegative"));
    }
    if epsilon == 0.0 {
        return Ok(n as f64);
    }
    // Smallest terms first.
    let mut acc = 0.0;
    for j in (1..=n).rev() {
        acc += libm::pow(j as f64, -epsilon);
    }
    Ok(acc)
}

/// `p_l[i, j] = sum_{q=1}^{l} i^(q-1) j^(l-q)`, so that `j^l - i^l = (j - i) p_l`.
pub fn p_poly(l: usize, i: u64, j: u64) -> f64 {
    let (i, j) = (i as f64, j as f64);
    (1..=l)
        .map(|q| libm::pow(i, (q - 1) as f64) * libm::pow(j, (l - q) as f64))
        .sum()
}

/// Exact `sum_{j != i} p_l[i, j]` over `j = 0..=n`.
///
/// Reduces to `sum_q i^(q-1) S_{l-q} - l i^(l-1)` with `S_m` the literal sum
/// of `j^m` (so `S_0 = n + 1`).
fn p_sum_exact(l: usize, i: u64, n: u64) -> Result<i128> {
    if l == 0 {
        return Ok(0);
    }
    let ov = Error::Overflow("p_l sum");
    let ii = i as i128;
    let mut acc: i128 = 0;
    for q in 1..=l {
        let m = l - q;
        let s = if m == 0 { n as i128 + 1 } else { faulhaber(m, n)? };
        let term = ii
            .checked_pow((q - 1) as u32)
            .and_then(|p| p.checked_mul(s))
            .ok_or(ov.clone())?;
        acc = acc.checked_add(term).ok_or(ov.clone())?;
    }
    let self_term = ii
        .checked_pow((l - 1) as u32)
        .and_then(|p| p.checked_mul(l as i128))
        .ok_or(ov.clone())?;
    acc.checked_sub(self_term).ok_or(ov)
}

fn p_sum_f64(l: usize, i: u64, n: u64) -> Result<f64> {
    if let Ok(v) = p_sum_exact(l, i, n) {
        return Ok(v as f64);
    }
    let fi = i as f64;
    let mut acc = 0.0;
    for q in 1..=l {
        let m = l - q;
        let s = if m == 0 { n as f64 + 1.0 } else { faulhaber_f64(m, n)? };
        acc += libm::pow(fi, (q - 1) as f64) * s;
    }
    Ok(acc - l as f64 * libm::pow(fi, (l - 1) as f64))
}

/// `C_eps = (1 - eps) R^eps`; equals 1 at `eps = 0`.
pub fn weight_constant(mesh: &Mesh1D, epsilon: f64) -> f64 {
    (1.0 - epsilon) * libm::pow(mesh.radius(), epsilon)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon.is_finite() && (0.0..1.0).contains(&epsilon)) {
        return Err(Error::param("epsilon", "must lie in [0, 1)"));
    }
    Ok(())
}

/// Closed-form non-local first derivative at training point `i`:
/// `(C_eps / n) sum_l alpha_l (2h)^(l-1-eps) sum_{j != i} p_l[i, j] / |j - i|^eps`.
///
/// With `eps = 0` the inner sums come from the Faulhaber reduction.
pub fn nonlocal_derivative_closed(spec: &PolySpec, mesh: &Mesh1D, i: usize, epsilon: f64) -> Result<f64> {
    mesh.check_training(i)?;
    check_epsilon(epsilon)?;
    let n = mesh.n() as u64;
    let two_h = 2.0 * mesh.h();
    let mut terms = Vec::with_capacity(spec.alpha.len());
    for (l, &a) in spec.alpha.iter().enumerate().skip(1) {
        if a == 0.0 {
            continue;
        }
        let inner = if epsilon == 0.0 {
            p_sum_f64(l, i as u64, n)?
        } else {
            let row: Vec<f64> = (0..=n)
                .filter(|&j| j != i as u64)
                .map(|j| p_poly(l, i as u64, j) / libm::pow((j as f64 - i as f64).abs(), epsilon))
                .collect();
            pairwise_sum(&row)
        };
        terms.push(a * libm::pow(two_h, l as f64 - 1.0 - epsilon) * inner);
    }
    Ok(weight_constant(mesh, epsilon) * pairwise_sum(&terms) / n as f64)
}

/// Pointwise derivative error `delta u(x_i) - u'(x_i)`.
pub fn derivative_error(spec: &PolySpec, mesh: &Mesh1D, i: usize, epsilon: f64) -> Result<f64> {
    Ok(nonlocal_derivative_closed(spec, mesh, i, epsilon)? - spec.derivative(1, mesh.training_point(i)))
}

/// Non-local first derivative at every training point by direct summation.
fn direct_derivative(values: &[f64], mesh: &Mesh1D, epsilon: f64) -> Vec<f64> {
    let x = mesh.training();
    let c = weight_constant(mesh, epsilon);
    let inv = 1.0 / mesh.n() as f64;
    let mut row = Vec::with_capacity(x.len());
    (0..x.len())
        .map(|i| {
            row.clear();
            for j in 0..x.len() {
                if j != i {
                    let r = x[j] - x[i];
                    row.push((values[j] - values[i]) * r * c / libm::pow(r.abs(), 2.0 + epsilon));
                }
            }
            pairwise_sum(&row) * inv
        })
        .collect()
}

/// Cross-checks the closed form against the graph calculus.
///
/// Builds a one-dimensional graph on the training points with the explicit
/// weight table `C_eps / r^(2 + eps)`, takes the first partial derivative and
/// returns the largest absolute deviation from [`nonlocal_derivative_closed`].
pub fn oracle_match_graph_derivative(spec: &PolySpec, mesh: &Mesh1D, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let x = mesh.training();
    let m = x.len();
    let c = weight_constant(mesh, epsilon);
    let mut weights = alloc::vec![0.0; m * m];
    for i in 0..m {
        for j in i + 1..m {
            let w = c / libm::pow((x[j] - x[i]).abs(), 2.0 + epsilon);
            weights[i * m + j] = w;
            weights[j * m + i] = w;
        }
    }
    let states = x
        .iter()
        .map(|&v| StateVector::unlabeled(alloc::vec![v]))
        .collect::<Result<Vec<_>>>()?;
    let g = from_weights(states, Vec::new(), weights)?;
    let f: Vec<f64> = x.iter().map(|&v| spec.eval(v)).collect();
    let graph = partial_derivative(&g, &f, &DerivativeRequest::new(alloc::vec![0]))?;
    let mut worst: f64 = 0.0;
    for (i, gd) in graph.iter().enumerate() {
        let closed = nonlocal_derivative_closed(spec, mesh, i, epsilon)?;
        worst = worst.max((gd - closed).abs());
    }
    Ok(worst)
}

/// Fits `gamma_1` at base point `i` with `gamma_0` pinned to 1 and `eps = 0`.
pub fn fit_gamma1(spec: &PolySpec, mesh: &Mesh1D, i: usize) -> Result<f64> {
    fit_gamma1_with(spec, mesh, i, 0.0)
}

/// `gamma_1 = sum b_j d_j / sum b_j^2` with `b_j = delta u(x_i) (x_j - x_i)`
/// and `d_j = u(x_j) - u(x_i)` over all training points.
pub fn fit_gamma1_with(spec: &PolySpec, mesh: &Mesh1D, i: usize, epsilon: f64) -> Result<f64> {
    let du = nonlocal_derivative_closed(spec, mesh, i, epsilon)?;
    let x = mesh.training();
    let ui = spec.eval(x[i]);
    let b: Vec<f64> = x.iter().map(|&xj| du * (xj - x[i])).collect();
    gamma1_ratio(&b, &x, spec, ui)
}

fn gamma1_ratio(b: &[f64], x: &[f64], spec: &PolySpec, ui: f64) -> Result<f64> {
    let bd: Vec<f64> = b.iter().zip(x).map(|(bj, &xj)| bj * (spec.eval(xj) - ui)).collect();
    let bb: Vec<f64> = b.iter().map(|bj| bj * bj).collect();
    let den = pairwise_sum(&bb);
    if den == 0.0 {
        return Err(Error::param("spec", "derivative column is identically zero; gamma_1 is undefined"));
    }
    Ok(pairwise_sum(&bd) / den)
}

/// Limit of `gamma_1` at a fixed training index as `h -> 0`:
/// `(1 + sum_l (alpha_l/alpha_1) 3 L^(l-1)/(l+2)) / (1 + sum_l (alpha_l/alpha_1) L^(l-1)/l)`.
///
/// For a quadratic this is `(1 + 3L a2/(4 a1)) / (1 + L a2/(2 a1))`.
pub fn gamma1_limit(spec: &PolySpec, length: f64) -> Result<f64> {
    let a1 = spec.alpha.get(1).copied().unwrap_or(0.0);
    if a1 == 0.0 {
        return Err(Error::param("alpha", "the limit needs a nonzero linear coefficient"));
    }
    let (mut num, mut den) = (1.0, 1.0);
    for (l, &a) in spec.alpha.iter().enumerate().skip(2) {
        let lf = l as f64;
        let scale = a / a1 * libm::pow(length, lf - 1.0);
        num += scale * 3.0 / (lf + 2.0);
        den += scale / lf;
    }
    Ok(num / den)
}

/// `gamma_1` at a fixed index over a sequence of meshes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Gamma1Study {
    pub n: Vec<usize>,
    pub h: Vec<f64>,
    pub gamma1: Vec<f64>,
    pub limit: f64,
    /// `|gamma_1 - limit|` per mesh.
    pub deviation: Vec<f64>,
    /// Least-squares slope of `log deviation` against `log h`.
    pub order: f64,
}

pub fn gamma1_study(spec: &PolySpec, length: f64, n_list: &[usize], i: usize) -> Result<Gamma1Study> {
    if n_list.len() < 2 {
        return Err(Error::TooFew {
            what: "meshes",
            required: 2,
            found: n_list.len(),
        });
    }
    let limit = gamma1_limit(spec, length)?;
    let mut out = Gamma1Study {
        n: n_list.to_vec(),
        h: Vec::new(),
        gamma1: Vec::new(),
        limit,
        deviation: Vec::new(),
        order: 0.0,
    };
    for &n in n_list {
        let mesh = Mesh1D::new(n, length)?;
        let g = fit_gamma1(spec, &mesh, i)?;
        out.h.push(mesh.h());
        out.gamma1.push(g);
        out.deviation.push((g - limit).abs());
    }
    out.order = loglog_slope(&out.h, &out.deviation);
    Ok(out)
}

/// Model flavour: non-local derivatives with fitted coefficients, or exact
/// derivatives with all coefficients equal to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum StudyMode {
    #[default]
    NonLocal,
    DifferentialBaseline,
}

/// Norm used to pick the reported slope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ErrorNorm {
    L1,
    #[default]
    L2,
    Linf,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StudyConfig {
    /// Taylor model order `k >= 1`.
    pub order: usize,
    pub length: f64,
    pub n_list: Vec<usize>,
    pub epsilon: f64,
    pub norm: ErrorNorm,
    pub mode: StudyMode,
}

impl StudyConfig {
    pub fn new(order: usize, length: f64, n_list: Vec<usize>) -> Self {
        StudyConfig {
            order,
            length,
            n_list,
            epsilon: 0.0,
            norm: ErrorNorm::L2,
            mode: StudyMode::NonLocal,
        }
    }

    pub fn with_mode(mut self, mode: StudyMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_norm(mut self, norm: ErrorNorm) -> Self {
        self.norm = norm;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StudyRow {
    pub n: usize,
    pub h: f64,
    pub error_l1: f64,
    pub error_l2: f64,
    pub error_linf: f64,
    /// Whether this mesh took part in the slope fit.
    pub slope_window: bool,
}

impl StudyRow {
    pub fn error(&self, norm: ErrorNorm) -> f64 {
        match norm {
            ErrorNorm::L1 => self.error_l1,
            ErrorNorm::L2 => self.error_l2,
            ErrorNorm::Linf => self.error_linf,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConvergenceStudy {
    pub rows: Vec<StudyRow>,
    pub norm: ErrorNorm,
    /// Fitted order over the window; `None` when fewer than two meshes remain
    /// before the floor.
    pub slope: Option<f64>,
    /// Whether the error flattened before the finest mesh.
    pub floor_detected: bool,
}

/// Relative drop below which a halving counts as flat.
pub const FLOOR_RATIO: f64 = 0.95;

/// Errors, per testing point, of the order-`k` model on one mesh.
pub fn pointwise_errors(spec: &PolySpec, mesh: &Mesh1D, order: usize, epsilon: f64, mode: StudyMode) -> Result<Vec<f64>> {
    if order == 0 || order > crate::calculus::MAX_ORDER {
        return Err(Error::param("order", "model order must be in 1..=8"));
    }
    check_epsilon(epsilon)?;
    let x = mesh.training();
    let u: Vec<f64> = x.iter().map(|&v| spec.eval(v)).collect();
    let h = mesh.h();

    let derivs: Vec<Vec<f64>> = match mode {
        StudyMode::DifferentialBaseline => (1..=order)
            .map(|l| x.iter().map(|&v| spec.derivative(l, v)).collect())
            .collect(),
        StudyMode::NonLocal => {
            let first = (0..x.len())
                .map(|i| nonlocal_derivative_closed(spec, mesh, i, epsilon))
                .collect::<Result<Vec<f64>>>()?;
            let mut all = alloc::vec![first];
            for _ in 1..order {
                let next = direct_derivative(all.last().unwrap(), mesh, epsilon);
                all.push(next);
            }
            all
        }
    };

    let mut errs = Vec::with_capacity(mesh.n());
    for j in 0..mesh.n() {
        // Base point is the training point to the left of x_j.
        let i = j;
        let gammas = match mode {
            StudyMode::DifferentialBaseline => alloc::vec![1.0; order],
            StudyMode::NonLocal => fit_gammas(&x, &u, &derivs, i)?,
        };
        let mut terms = alloc::vec![u[i]];
        let mut fact = 1.0;
        for l in 1..=order {
            fact *= l as f64;
            terms.push(gammas[l - 1] * derivs[l - 1][i] * libm::pow(h, l as f64) / fact);
        }
        let model = pairwise_sum(&terms);
        errs.push(model - spec.eval(mesh.testing_point(j)));
    }
    Ok(errs)
}

/// Least-squares `gamma_1..gamma_k` at base `i` with `gamma_0 = 1`.
fn fit_gammas(x: &[f64], u: &[f64], derivs: &[Vec<f64>], i: usize) -> Result<Vec<f64>> {
    let k = derivs.len();
    let mut cols = Matrix::zeros(x.len(), k);
    let mut fact = 1.0;
    for l in 1..=k {
        fact *= l as f64;
        for (r, &xr) in x.iter().enumerate() {
            cols[(r, l - 1)] = derivs[l - 1][i] * libm::pow(xr - x[i], l as f64) / fact;
        }
    }
    let d: Vec<f64> = u.iter().map(|v| v - u[i]).collect();
    if k == 1 {
        let b: Vec<f64> = cols.column(0).iter().copied().collect();
        let bd: Vec<f64> = b.iter().zip(&d).map(|(p, q)| p * q).collect();
        let bb: Vec<f64> = b.iter().map(|p| p * p).collect();
        let den = pairwise_sum(&bb);
        if den == 0.0 {
            // Zero derivative: the column carries nothing, keep the unit coefficient.
            return Ok(alloc::vec![1.0]);
        }
        return Ok(alloc::vec![pairwise_sum(&bd) / den]);
    }
    if cols.iter().all(|v| *v == 0.0) {
        return Ok(alloc::vec![1.0; k]);
    }
    Ok(ols_fit(&cols, &d)?.coeffs)
}

/// Discrete-average norms `((1/n) sum |e|^l)^(1/l)` and the max norm.
pub fn error_norms(errs: &[f64]) -> (f64, f64, f64) {
    let n = errs.len() as f64;
    let abs: Vec<f64> = errs.iter().map(|e| e.abs()).collect();
    let sq: Vec<f64> = errs.iter().map(|e| e * e).collect();
    let linf = abs.iter().fold(0.0f64, |m, v| m.max(*v));
    (pairwise_sum(&abs) / n, libm::sqrt(pairwise_sum(&sq) / n), linf)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| libm::log(*v)).collect();
    let ly: Vec<f64> = y.iter().map(|v| libm::log(*v)).collect();
    let m = lx.len() as f64;
    let mx = pairwise_sum(&lx) / m;
    let my = pairwise_sum(&ly) / m;
    let sxy: Vec<f64> = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).collect();
    let sxx: Vec<f64> = lx.iter().map(|a| (a - mx) * (a - mx)).collect();
    pairwise_sum(&sxy) / pairwise_sum(&sxx)
}

/// Runs the model on every mesh in `n_list` and fits the convergence order.
///
/// Meshes are processed from coarse to fine. The slope window stops at the
/// first halving that fails to cut the error by at least 5%, or once the
/// error is within a few hundred ulps of the target's magnitude.
pub fn convergence_study(spec: &PolySpec, cfg: &StudyConfig) -> Result<ConvergenceStudy> {
    if cfg.n_list.len() < 3 {
        return Err(Error::TooFew {
            what: "meshes in n_list",
            required: 3,
            found: cfg.n_list.len(),
        });
    }
    let mut ns = cfg.n_list.clone();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 3 {
        return Err(Error::TooFew {
            what: "distinct meshes in n_list",
            required: 3,
            found: ns.len(),
        });
    }
    let mut rows = Vec::with_capacity(ns.len());
    for &n in &ns {
        let mesh = Mesh1D::new(n, cfg.length)?;
        let errs = pointwise_errors(spec, &mesh, cfg.order, cfg.epsilon, cfg.mode)?;
        let (l1, l2, linf) = error_norms(&errs);
        rows.push(StudyRow {
            n,
            h: mesh.h(),
            error_l1: l1,
            error_l2: l2,
            error_linf: linf,
            slope_window: false,
        });
    }

    let scale = (0..=ns[0])
        .map(|i| spec.eval(Mesh1D::new(ns[0], cfg.length).map(|m| m.training_point(i)).unwrap_or(0.0)).abs())
        .fold(0.0f64, f64::max)
        .max(1.0);
    let at_floor = |e: f64| e <= 256.0 * f64::EPSILON * scale;

    let mut end = 0;
    let mut floor_detected = false;
    for (k, row) in rows.iter().enumerate() {
        let e = row.error(cfg.norm);
        if at_floor(e) {
            floor_detected = true;
            break;
        }
        if k > 0 && e > FLOOR_RATIO * rows[k - 1].error(cfg.norm) {
            floor_detected = true;
            break;
        }
        end = k + 1;
    }
    for row in rows.iter_mut().take(end) {
        row.slope_window = true;
    }
    let slope = if end >= 2 {
        let h: Vec<f64> = rows[..end].iter().map(|r| r.h).collect();
        let e: Vec<f64> = rows[..end].iter().map(|r| r.error(cfg.norm)).collect();
        Some(loglog_slope(&h, &e))
    } else {
        None
    };
    Ok(ConvergenceStudy {
        rows,
        norm: cfg.norm,
        slope,
        floor_detected,
    })
}

/// Integrated-interpolation estimate `2^s C_s / (l s + 1)^(1/l) h^s` of the
/// total `l`-norm error for a pointwise error `C_s (x - x_i)^s`.
pub fn integrated_error_estimate(c_s: f64, s: u32, l: u32, h: f64) -> f64 {
    let (s, l) = (s as f64, l as f64);
    libm::pow(2.0, s) * c_s / libm::pow(l * s + 1.0, 1.0 / l) * libm::pow(h, s)
}

/// Midpoint-sampled estimate `C_s h^s` of the same quantity.
pub fn averaged_error_estimate(c_s: f64, s: u32, h: f64) -> f64 {
    c_s * libm::pow(h, s as f64)
}
