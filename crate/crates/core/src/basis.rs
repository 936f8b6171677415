//! Design matrices for the two model families.
//!
//! The dynamics basis is a set of products (optional derivative or special
//! factor) x (monomial of bounded degree), evaluated row by row. The Taylor
//! basis expands a vertex function about one base vertex with non-local
//! derivatives; its constant term is the only fixed column.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::calculus::{DerivativeCache, DerivativeRequest, MAX_ORDER};
use crate::error::{Error, Result};
use crate::numeric::{factorial, pairwise_sum};
use crate::preprocess::{NormKind, NormalizationPair};
use crate::state_graph::StateGraph;
use crate::Matrix;

/// Kind of a special (non-polynomial) factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SpecialKind {
    Interfacial,
    ParticleCount,
}

/// Optional single factor multiplying a monomial.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Factor {
    None,
    /// Non-local derivative of `function` along the named state components.
    Derivative { function: String, along: Vec<String> },
    Special { name: String, kind: SpecialKind },
}

/// Identifies one column of a design matrix.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TermDescriptor {
    /// `factor * prod_v v^power`; zero powers are omitted.
    Product { factor: Factor, powers: Vec<(String, u32)> },
    /// Taylor term of `function` with ordered derivative directions.
    Taylor { function: String, along: Vec<String> },
    /// A raw named column.
    Column(String),
}

impl TermDescriptor {
    pub fn label(&self) -> String {
        match self {
            TermDescriptor::Product { factor, powers } => {
                let mut parts: Vec<String> = Vec::new();
                match factor {
                    Factor::None => {}
                    Factor::Derivative { function, along } => {
                        parts.push(format!("D[{}]{}", along.join(","), function))
                    }
                    Factor::Special { name, .. } => parts.push(name.clone()),
                }
                for (v, k) in powers {
                    if *k == 1 {
                        parts.push(v.clone());
                    } else {
                        parts.push(format!("{v}^{k}"));
                    }
                }
                if parts.is_empty() {
                    String::from("1")
                } else {
                    parts.join("*")
                }
            }
            TermDescriptor::Taylor { function, along } => format!("T[{}]{}", along.join(","), function),
            TermDescriptor::Column(name) => name.clone(),
        }
    }

    /// Polynomial degree of the monomial part (0 for non-product terms).
    pub fn degree(&self) -> u32 {
        match self {
            TermDescriptor::Product { powers, .. } => powers.iter().map(|(_, k)| k).sum(),
            _ => 0,
        }
    }
}

/// Design matrix with descriptors, fixed/free partition and normalizers.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorBasis {
    pub x: Matrix,
    pub descriptors: Vec<TermDescriptor>,
    pub fixed_mask: Vec<bool>,
    pub normalization: NormalizationPair,
    pub norm_kind: NormKind,
}

impl OperatorBasis {
    /// Basis over raw named columns, none fixed.
    pub fn from_columns(x: Matrix, labels: &[String]) -> Result<Self> {
        if labels.len() != x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols(),
                found: labels.len(),
                context: "column labels",
            });
        }
        let descriptors = labels.iter().cloned().map(TermDescriptor::Column).collect();
        Ok(Self::assemble(x, descriptors, alloc::vec![false; labels.len()]))
    }

    fn assemble(x: Matrix, descriptors: Vec<TermDescriptor>, fixed_mask: Vec<bool>) -> Self {
        let p = x.ncols();
        OperatorBasis {
            x,
            descriptors,
            fixed_mask,
            normalization: NormalizationPair::identity(p, 1),
            norm_kind: NormKind::L2,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_terms(&self) -> usize {
        self.x.ncols()
    }

    pub fn labels(&self) -> Vec<String> {
        self.descriptors.iter().map(TermDescriptor::label).collect()
    }

    /// Sum of the fixed columns (their coefficients are pinned to 1).
    pub fn fixed_contribution(&self) -> Vec<f64> {
        (0..self.n_rows())
            .map(|r| {
                let vals: Vec<f64> = (0..self.n_terms())
                    .filter(|&c| self.fixed_mask[c])
                    .map(|c| self.x[(r, c)])
                    .collect();
                pairwise_sum(&vals)
            })
            .collect()
    }

    /// Normalizers for fitting `y`: column scales of `X` and the scale of
    /// `y` minus the fixed contribution.
    pub fn target_normalization(&self, y: &[f64]) -> Result<NormalizationPair> {
        if y.len() != self.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows(),
                found: y.len(),
                context: "target length",
            });
        }
        let fixed = self.fixed_contribution();
        let free: Vec<f64> = y.iter().zip(&fixed).map(|(a, b)| a - b).collect();
        let labels = self.labels();
        let ones = Matrix::from_element(y.len(), 1, 1.0);
        let (_, _, mut pair) = crate::preprocess::scale_and_normalize(&self.x, &ones, self.norm_kind, &labels)?;
        let ym = Matrix::from_column_slice(y.len(), 1, &free);
        // a free target that vanishes identically keeps unit scale
        pair.ny = match crate::preprocess::scale_and_normalize(&ym, &ones, self.norm_kind, &[]) {
            Ok((_, _, p)) => p.nx,
            Err(_) => alloc::vec![1.0],
        };
        Ok(pair)
    }

    /// Sets the normalizers for target `y`.
    pub fn with_target(mut self, y: &[f64]) -> Result<Self> {
        self.normalization = self.target_normalization(y)?;
        Ok(self)
    }

    pub fn with_norm_kind(mut self, kind: NormKind) -> Self {
        self.norm_kind = kind;
        self
    }

    /// Removes identically zero free columns, returning their labels.
    pub fn drop_zero_columns(self) -> (Self, Vec<String>) {
        let keep: Vec<usize> = (0..self.n_terms())
            .filter(|&c| self.fixed_mask[c] || self.x.column(c).iter().any(|&v| v != 0.0))
            .collect();
        let dropped = (0..self.n_terms())
            .filter(|c| !keep.contains(c))
            .map(|c| self.descriptors[c].label())
            .collect();
        (self.select(&keep), dropped)
    }

    /// Sub-basis with the given columns, in order.
    pub fn select(&self, cols: &[usize]) -> Self {
        let x = self.x.select_columns(cols.iter());
        let nx = cols
            .iter()
            .map(|&c| self.normalization.nx.get(c).copied().unwrap_or(1.0))
            .collect();
        OperatorBasis {
            x,
            descriptors: cols.iter().map(|&c| self.descriptors[c].clone()).collect(),
            fixed_mask: cols.iter().map(|&c| self.fixed_mask[c]).collect(),
            normalization: NormalizationPair {
                nx,
                ny: self.normalization.ny.clone(),
            },
            norm_kind: self.norm_kind,
        }
    }

    /// `X gamma` for unnormalized coefficients.
    pub fn predict(&self, gamma: &[f64]) -> Result<Vec<f64>> {
        if gamma.len() != self.n_terms() {
            return Err(Error::DimensionMismatch {
                expected: self.n_terms(),
                found: gamma.len(),
                context: "coefficient count",
            });
        }
        Ok((0..self.n_rows())
            .map(|r| {
                let vals: Vec<f64> = (0..self.n_terms()).map(|c| self.x[(r, c)] * gamma[c]).collect();
                pairwise_sum(&vals)
            })
            .collect())
    }
}

/// Maps normalized coefficients fitted on `old` into the normalized frame of `new`.
///
/// Implements `gamma~' = N'_X^-1 N_X gamma~ N_y^-1 N'_y`, which leaves the
/// unnormalized coefficients, and therefore the fixed coefficient, unchanged.
pub fn renormalize_for_new_data(old: &OperatorBasis, coeffs: &[f64], new: &OperatorBasis) -> Result<Vec<f64>> {
    if old.descriptors != new.descriptors {
        return Err(Error::DescriptorMismatch);
    }
    if coeffs.len() != old.n_terms() {
        return Err(Error::DimensionMismatch {
            expected: old.n_terms(),
            found: coeffs.len(),
            context: "coefficient count",
        });
    }
    let (a, b) = (&old.normalization, &new.normalization);
    Ok(coeffs
        .iter()
        .enumerate()
        .map(|(c, g)| g * a.nx[c] / b.nx[c] / a.ny[0] * b.ny[0])
        .collect())
}

/// Configuration of the polynomial-product dynamics basis.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DynamicsBasisConfig {
    /// Names of the polynomial variables (state components or observables).
    pub variables: Vec<String>,
    /// Observable whose non-local derivatives form derivative factors.
    pub derivative_function: Option<String>,
    /// Derivative directions, each a list of state-component names.
    pub derivatives: Vec<Vec<String>>,
    /// Special factors (observable name, kind).
    pub specials: Vec<(String, SpecialKind)>,
    /// Maximum total monomial degree `A`.
    pub degree_cap: u32,
    /// Treat derivative directions as unordered and deduplicate them.
    pub symmetric_derivatives: bool,
}

impl DynamicsBasisConfig {
    /// Volume-fraction dynamics: `phi` and three strains up to cubic order,
    /// second and third energy derivatives, two interfacial lengths and two
    /// domain counts.
    pub fn microstructure_default() -> Self {
        let v = |s: &[&str]| s.iter().map(|x| String::from(*x)).collect::<Vec<_>>();
        let strains = ["e11", "e12", "e22"];
        let mut derivatives = Vec::new();
        for e in strains {
            derivatives.push(v(&["phi", e]));
        }
        derivatives.push(v(&["phi", "phi"]));
        for (a, ea) in strains.iter().enumerate() {
            for eb in &strains[a..] {
                derivatives.push(v(&["phi", ea, eb]));
            }
        }
        for e in strains {
            derivatives.push(v(&["phi", "phi", e]));
        }
        derivatives.push(v(&["phi", "phi", "phi"]));
        DynamicsBasisConfig {
            variables: v(&["phi", "e11", "e12", "e22"]),
            derivative_function: Some("energy".into()),
            derivatives,
            specials: alloc::vec![
                ("L1".into(), SpecialKind::Interfacial),
                ("L2".into(), SpecialKind::Interfacial),
                ("N1".into(), SpecialKind::ParticleCount),
                ("N2".into(), SpecialKind::ParticleCount),
            ],
            degree_cap: 3,
            symmetric_derivatives: true,
        }
    }
}

/// All exponent vectors over `q` variables with total degree at most `cap`,
/// graded, then lexicographically descending in the leading variable.
fn monomials(q: usize, cap: u32) -> Vec<Vec<u32>> {
    fn fill(q: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == q - 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=left).rev() {
            prefix.push(k);
            fill(q, left - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if q == 0 {
        out.push(Vec::new());
        return out;
    }
    for d in 0..=cap {
        fill(q, d, &mut Vec::new(), &mut out);
    }
    out
}

fn component_index(g: &StateGraph, name: &str) -> Result<usize> {
    g.vertices()[0]
        .labels()
        .iter()
        .position(|l| l == name)
        .ok_or_else(|| Error::UnknownName(name.into()))
}

/// Values of a named quantity: a state component or an observable.
fn named_values(g: &StateGraph, name: &str) -> Result<Vec<f64>> {
    match component_index(g, name) {
        Ok(a) => g.coordinate(a),
        Err(_) => g.observable(name).map(|v| v.to_vec()),
    }
}

/// Enumerates and evaluates the dynamics basis.
pub fn build_dynamics_basis(g: &StateGraph, cfg: &DynamicsBasisConfig) -> Result<OperatorBasis> {
    let vars: Vec<Vec<f64>> = cfg.variables.iter().map(|v| named_values(g, v)).collect::<Result<_>>()?;

    let mut factors: Vec<(Factor, Vec<f64>)> = alloc::vec![(Factor::None, alloc::vec![1.0; g.n()])];
    if !cfg.derivatives.is_empty() {
        let fname = cfg
            .derivative_function
            .as_ref()
            .ok_or_else(|| Error::param("derivative_function", "required when derivatives are listed"))?;
        let f = g.observable(fname)?.to_vec();
        let mut cache = DerivativeCache::new(g, f)?;
        let mut seen = BTreeSet::new();
        for along in &cfg.derivatives {
            let mut along = along.clone();
            if cfg.symmetric_derivatives {
                let mut idx: Vec<(usize, String)> =
                    along.iter().map(|a| Ok((component_index(g, a)?, a.clone()))).collect::<Result<_>>()?;
                idx.sort();
                along = idx.into_iter().map(|(_, a)| a).collect();
            }
            if !seen.insert(along.clone()) {
                continue;
            }
            let req = DerivativeRequest::new(
                along.iter().map(|a| component_index(g, a)).collect::<Result<_>>()?,
            );
            let values = cache.get(&req)?.to_vec();
            factors.push((
                Factor::Derivative {
                    function: fname.clone(),
                    along,
                },
                values,
            ));
        }
    }
    for (name, kind) in &cfg.specials {
        factors.push((
            Factor::Special {
                name: name.clone(),
                kind: *kind,
            },
            g.observable(name)?.to_vec(),
        ));
    }

    let monos = monomials(cfg.variables.len(), cfg.degree_cap);
    let n = g.n();
    let mut columns: Vec<f64> = Vec::with_capacity(n * factors.len() * monos.len());
    let mut descriptors = Vec::new();
    for (factor, fvals) in &factors {
        for mono in &monos {
            for r in 0..n {
                let mut v = fvals[r];
                for (k, &e) in mono.iter().enumerate() {
                    v *= crate::numeric::powi(vars[k][r], e as i32);
                }
                columns.push(v);
            }
            let powers = cfg
                .variables
                .iter()
                .zip(mono)
                .filter(|(_, &e)| e > 0)
                .map(|(v, &e)| (v.clone(), e))
                .collect();
            descriptors.push(TermDescriptor::Product {
                factor: factor.clone(),
                powers,
            });
        }
    }
    let p = descriptors.len();
    let x = Matrix::from_column_slice(n, p, &columns);
    Ok(OperatorBasis::assemble(x, descriptors, alloc::vec![false; p]))
}

/// Configuration of the modified Taylor-series basis.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TaylorBasisConfig {
    /// Expansion order `k`.
    pub order: usize,
    /// State components to expand in.
    pub variables: Vec<String>,
    /// Expansion vertex.
    pub base_index: usize,
    /// Merge permutations of a multi-index into one column.
    pub symmetric: bool,
    /// Name recorded in the descriptors.
    pub function_name: String,
}

impl TaylorBasisConfig {
    /// Fourth order in `phi` and three strains about the first vertex.
    pub fn microstructure_default() -> Self {
        TaylorBasisConfig {
            order: 4,
            variables: ["phi", "e11", "e12", "e22"].iter().map(|s| String::from(*s)).collect(),
            base_index: 0,
            symmetric: false,
            function_name: "energy".into(),
        }
    }
}

/// Ordered tuples over `0..q` of every length `0..=k`, by length then lexicographically.
fn ordered_tuples(q: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = alloc::vec![Vec::new()];
    let mut layer: Vec<Vec<usize>> = alloc::vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::new();
        for t in &layer {
            for a in 0..q {
                let mut u = t.clone();
                u.push(a);
                next.push(u);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Number of distinct permutations of `t`.
fn multiplicity(t: &[usize]) -> f64 {
    let mut counts = alloc::collections::BTreeMap::new();
    for a in t {
        *counts.entry(a).or_insert(0usize) += 1;
    }
    counts.values().fold(factorial(t.len()), |acc, &c| acc / factorial(c))
}

/// Builds the Taylor basis of `f` about `cfg.base_index`.
///
/// Column `(a_1..a_l)` holds `D^l f(x_i)[a] * prod_m dx^{a_m}_{ij} / l!` in
/// row `j`; derivatives are evaluated once at the base vertex.
pub fn build_taylor_basis(g: &StateGraph, f: &[f64], cfg: &TaylorBasisConfig) -> Result<OperatorBasis> {
    g.check_index(cfg.base_index)?;
    if cfg.order > MAX_ORDER {
        return Err(Error::param("order", format!("at most {MAX_ORDER}")));
    }
    if cfg.variables.is_empty() {
        return Err(Error::param("variables", "at least one expansion variable"));
    }
    let comps: Vec<usize> = cfg.variables.iter().map(|v| component_index(g, v)).collect::<Result<_>>()?;
    let q = comps.len();
    let mut tuples = ordered_tuples(q, cfg.order);
    if cfg.symmetric {
        tuples.retain(|t| t.windows(2).all(|w| w[0] <= w[1]));
    }
    let mut cache = DerivativeCache::new(g, f.to_vec())?;
    let base = cfg.base_index;
    let n = g.n();
    let mut columns = Vec::with_capacity(n * tuples.len());
    let mut descriptors = Vec::with_capacity(tuples.len());
    let mut fixed = Vec::with_capacity(tuples.len());
    for t in &tuples {
        let l = t.len();
        let coef = if l == 0 {
            f[base]
        } else {
            let req = DerivativeRequest::new(t.iter().map(|&a| comps[a]).collect());
            let mult = if cfg.symmetric { multiplicity(t) } else { 1.0 };
            cache.get(&req)?[base] * mult / factorial(l)
        };
        for r in 0..n {
            let mut v = coef;
            for &a in t {
                v *= g.coord(r, comps[a]) - g.coord(base, comps[a]);
            }
            columns.push(v);
        }
        descriptors.push(TermDescriptor::Taylor {
            function: cfg.function_name.clone(),
            along: t.iter().map(|&a| cfg.variables[a].clone()).collect(),
        });
        fixed.push(l == 0);
    }
    let x = Matrix::from_column_slice(n, tuples.len(), &columns);
    Ok(OperatorBasis::assemble(x, descriptors, fixed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::WeightConfig;
    use crate::state_graph::{build_graph, StateVector};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn graph(names: &[&str], n: usize, observables: &[&str]) -> StateGraph {
        let labels: Vec<String> = names.iter().map(|s| String::from(*s)).collect();
        let states: Vec<StateVector> = (0..n)
            .map(|i| {
                let t = i as f64 / n as f64;
                let comps = (0..names.len())
                    .map(|k| libm::sin(1.3 * (k + 1) as f64 * t + 0.2 * k as f64) + 0.1 * t)
                    .collect();
                StateVector::new(comps, labels.clone()).unwrap()
            })
            .collect();
        let obs = observables
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let col = states
                    .iter()
                    .map(|s| s.components().iter().map(|c| c * c).sum::<f64>() + k as f64 + 0.5)
                    .collect();
                (String::from(*name), col)
            })
            .collect();
        build_graph(states, obs, &WeightConfig::polynomial(None)).unwrap()
    }

    fn cfg(vars: &[&str], cap: u32) -> DynamicsBasisConfig {
        DynamicsBasisConfig {
            variables: vars.iter().map(|s| String::from(*s)).collect(),
            derivative_function: None,
            derivatives: Vec::new(),
            specials: Vec::new(),
            degree_cap: cap,
            symmetric_derivatives: true,
        }
    }

    fn binom(n: usize, k: usize) -> usize {
        crate::numeric::binomial(n as u64, k as u64) as usize
    }

    #[test]
    fn smallest_enumerations() {
        let g = graph(&["v"], 6, &[]);
        let b = build_dynamics_basis(&g, &cfg(&["v"], 1)).unwrap();
        assert_eq!(b.labels(), ["1", "v"]);
        let g = graph(&["v1", "v2"], 6, &[]);
        let b = build_dynamics_basis(&g, &cfg(&["v1", "v2"], 2)).unwrap();
        assert_eq!(b.labels(), ["1", "v1", "v2", "v1^2", "v1*v2", "v2^2"]);
        assert_eq!(b.x[(3, 4)], g.coord(3, 0) * g.coord(3, 1));
        assert!(b.fixed_mask.iter().all(|f| !f));
    }

    #[test]
    fn microstructure_default_count_matches_combinatorics() {
        let c = DynamicsBasisConfig::microstructure_default();
        assert_eq!(c.derivatives.len(), 14);
        let g = graph(&["phi", "e11", "e12", "e22"], 12, &["energy", "L1", "L2", "N1", "N2"]);
        let b = build_dynamics_basis(&g, &c).unwrap();
        let expected = (1 + 14 + 4) * binom(4 + 3, 3);
        assert_eq!(b.n_terms(), expected);
        assert_eq!(b.n_terms(), 665);
        for d in &b.descriptors {
            assert!(d.degree() <= 3);
        }
        let labels: BTreeSet<String> = b.labels().into_iter().collect();
        assert_eq!(labels.len(), b.n_terms());
    }

    #[test]
    fn derivative_columns_are_per_row() {
        let mut c = cfg(&["x"], 1);
        c.derivative_function = Some("f".into());
        c.derivatives = alloc::vec![alloc::vec!["y".into(), "x".into()], alloc::vec!["x".into(), "y".into()]];
        c.specials = alloc::vec![("s".into(), SpecialKind::ParticleCount)];
        let g = graph(&["x", "y"], 9, &["f", "s"]);
        let b = build_dynamics_basis(&g, &c).unwrap();
        // symmetric dedup keeps one derivative factor
        assert_eq!(b.n_terms(), 3 * 2);
        let req = DerivativeRequest::new(alloc::vec![0, 1]);
        let d = crate::calculus::partial_derivative(&g, g.observable("f").unwrap(), &req).unwrap();
        let col = b.labels().iter().position(|l| l == "D[x,y]f*x").unwrap();
        for r in 0..g.n() {
            assert_eq!(b.x[(r, col)], d[r] * g.coord(r, 0));
        }
        let specials = b
            .descriptors
            .iter()
            .filter(|d| matches!(d, TermDescriptor::Product { factor: Factor::Special { .. }, .. }))
            .count();
        assert_eq!(specials, 2);
    }

    #[test]
    fn missing_names_error() {
        let g = graph(&["x"], 5, &[]);
        assert_eq!(
            build_dynamics_basis(&g, &cfg(&["nope"], 1)).unwrap_err(),
            Error::UnknownName("nope".into())
        );
    }

    #[test]
    fn taylor_counts() {
        let g = graph(&["a", "b", "c", "d"], 8, &["energy"]);
        let f = g.observable("energy").unwrap().to_vec();
        let mut c = TaylorBasisConfig::microstructure_default();
        c.variables = ["a", "b", "c", "d"].iter().map(|s| String::from(*s)).collect();
        let b = build_taylor_basis(&g, &f, &c).unwrap();
        assert_eq!(b.n_terms(), 341);
        assert_eq!(b.fixed_mask.iter().filter(|f| **f).count(), 1);
        assert!(b.fixed_mask[0]);
        for q in 1..=4usize {
            for k in 0..=4usize {
                c.variables = ["a", "b", "c", "d"][..q].iter().map(|s| String::from(*s)).collect();
                c.order = k;
                let b = build_taylor_basis(&g, &f, &c).unwrap();
                let expected: usize = (0..=k).map(|l| q.pow(l as u32)).sum();
                assert_eq!(b.n_terms(), expected);
            }
        }
        c.variables = alloc::vec!["a".into(), "b".into()];
        c.order = 2;
        assert_eq!(build_taylor_basis(&g, &f, &c).unwrap().n_terms(), 7);
        c.symmetric = true;
        assert_eq!(build_taylor_basis(&g, &f, &c).unwrap().n_terms(), 6);
        c.order = 0;
        c.symmetric = false;
        let b = build_taylor_basis(&g, &f, &c).unwrap();
        assert_eq!(b.n_terms(), 1);
        assert!(b.x.column(0).iter().all(|&v| v == f[0]));
        c.base_index = 99;
        assert!(build_taylor_basis(&g, &f, &c).is_err());
        c.base_index = 0;
        c.variables = alloc::vec!["zz".into()];
        assert!(build_taylor_basis(&g, &f, &c).is_err());
    }

    #[test]
    fn taylor_column_values() {
        let g = graph(&["a", "b"], 7, &["energy"]);
        let f = g.observable("energy").unwrap().to_vec();
        let c = TaylorBasisConfig {
            order: 2,
            variables: alloc::vec!["a".into(), "b".into()],
            base_index: 2,
            symmetric: false,
            function_name: "energy".into(),
        };
        let b = build_taylor_basis(&g, &f, &c).unwrap();
        let col = b.labels().iter().position(|l| l == "T[b,a]energy").unwrap();
        let d = crate::calculus::partial_derivative(&g, &f, &DerivativeRequest::new(alloc::vec![1, 0])).unwrap();
        for r in 0..g.n() {
            let expected = d[2] * (g.coord(r, 1) - g.coord(2, 1)) * (g.coord(r, 0) - g.coord(2, 0)) / 2.0;
            assert_relative_eq!(b.x[(r, col)], expected, max_relative = 1e-14);
        }
        // base row: only the constant survives
        let pred = b.predict(&alloc::vec![1.0; b.n_terms()]).unwrap();
        assert_eq!(pred[2], f[2]);
    }

    #[test]
    fn renormalization_preserves_predictions() {
        let g = graph(&["a", "b"], 9, &["energy"]);
        let f = g.observable("energy").unwrap().to_vec();
        let c = TaylorBasisConfig {
            order: 2,
            variables: alloc::vec!["a".into(), "b".into()],
            base_index: 0,
            symmetric: false,
            function_name: "energy".into(),
        };
        let old = build_taylor_basis(&g, &f, &c).unwrap().with_target(&f).unwrap();
        let gamma: Vec<f64> = (0..old.n_terms()).map(|k| if k == 0 { 1.0 } else { 0.3 * k as f64 - 1.0 }).collect();
        let gm = Matrix::from_column_slice(gamma.len(), 1, &gamma);
        let gt: Vec<f64> = old.normalization.normalize_coeffs(&gm).iter().copied().collect();

        assert_eq!(renormalize_for_new_data(&old, &gt, &old).unwrap(), gt);

        let mut new = old.clone();
        new.x *= 2.0;
        let f2: Vec<f64> = f.iter().map(|v| 3.0 * v).collect();
        let new = new.with_target(&f2).unwrap();
        let gt2 = renormalize_for_new_data(&old, &gt, &new).unwrap();
        let back: Vec<f64> = new
            .normalization
            .denormalize_coeffs(&Matrix::from_column_slice(gt2.len(), 1, &gt2))
            .iter()
            .copied()
            .collect();
        for (a, b) in back.iter().zip(&gamma) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        assert!((back[0] - 1.0).abs() <= 1e-15);
        let p_old = old.predict(&gamma).unwrap();
        let p_new = new.predict(&back).unwrap();
        for (a, b) in p_old.iter().zip(&p_new) {
            assert!((2.0 * a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        let other = old.select(&[0, 1]);
        assert_eq!(renormalize_for_new_data(&old, &gt, &other), Err(Error::DescriptorMismatch));
    }

    #[test]
    fn zero_columns_dropped() {
        let x = Matrix::from_column_slice(3, 3, &[1.0, 2.0, 3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        let b = OperatorBasis::from_columns(x, &["a".into(), "z".into(), "c".into()]).unwrap();
        assert_eq!(b.target_normalization(&[1.0, 2.0, 3.0]).unwrap_err(), Error::ZeroColumn("z".into()));
        let (b, dropped) = b.drop_zero_columns();
        assert_eq!(dropped, ["z"]);
        assert_eq!(b.labels(), ["a", "c"]);
        assert!(b.target_normalization(&[1.0, 2.0, 3.0]).is_ok());
    }

    proptest! {
        #[test]
        fn build_is_deterministic(n in 4usize..10, cap in 0u32..4) {
            let g = graph(&["x", "y"], n, &[]);
            let a = build_dynamics_basis(&g, &cfg(&["x", "y"], cap)).unwrap();
            let b = build_dynamics_basis(&g, &cfg(&["x", "y"], cap)).unwrap();
            prop_assert_eq!(a.n_terms(), binom(2 + cap as usize, cap as usize));
            prop_assert_eq!(a, b);
        }

        #[test]
        fn monomial_count(q in 1usize..5, cap in 0u32..5) {
            prop_assert_eq!(monomials(q, cap).len(), binom(q + cap as usize, cap as usize));
        }
    }
}
