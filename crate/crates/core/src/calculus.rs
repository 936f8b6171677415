//! Non-local operators on a [`StateGraph`].
//!
//! Vertex sums exclude the vertex itself and carry a `1/(n-1)` prefactor;
//! scalar inner products over vertices carry `1/n`. Every reduction runs in
//! ascending vertex order through a fixed pairwise tree, so results are
//! bit-reproducible.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;
use crate::state_graph::StateGraph;
use crate::Matrix;

/// Scalar values `f(x_i)`, one per vertex.
pub type VertexFunction = Vec<f64>;

/// Largest supported derivative order.
pub const MAX_ORDER: usize = 8;

/// Function on ordered vertex pairs, stored as a dense `n * n` table.
/// The diagonal is unused and kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeVector {
    n: usize,
    values: Vec<f64>,
}

impl EdgeVector {
    pub fn zeros(n: usize) -> Self {
        EdgeVector {
            n,
            values: alloc::vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n + j] = v;
    }
}

/// Ordered multi-index `(alpha_1, ..., alpha_q)`. `alpha_1` is applied first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DerivativeRequest {
    pub multi_index: Vec<usize>,
}

impl DerivativeRequest {
    pub fn new(multi_index: Vec<usize>) -> Self {
        DerivativeRequest { multi_index }
    }

    pub fn order(&self) -> usize {
        self.multi_index.len()
    }

    fn validate(&self, p: usize) -> Result<()> {
        if self.multi_index.is_empty() {
            return Err(Error::param("multi_index", "derivative order must be at least 1"));
        }
        if self.multi_index.len() > MAX_ORDER {
            return Err(Error::param("multi_index", alloc::format!("order exceeds {MAX_ORDER}")));
        }
        for &a in &self.multi_index {
            if a >= p {
                return Err(Error::IndexOutOfRange {
                    what: "state component",
                    index: a,
                    len: p,
                });
            }
        }
        Ok(())
    }
}

fn check_len(g: &StateGraph, f: &[f64]) -> Result<()> {
    if f.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            found: f.len(),
            context: "vertex function length",
        });
    }
    Ok(())
}

fn edge_from(g: &StateGraph, f: &[f64]) -> EdgeVector {
    let n = g.n();
    let mut e = EdgeVector::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                e.set(i, j, (f[j] - f[i]) * libm::sqrt(g.weight(i, j)));
            }
        }
    }
    e
}

/// Weighted differences `(f_j - f_i) sqrt(w_ij)`.
pub fn nonlocal_gradient(g: &StateGraph, f: &[f64]) -> Result<EdgeVector> {
    check_len(g, f)?;
    Ok(edge_from(g, f))
}

/// `(1/n) sum_i f1_i f2_i`.
pub fn scalar_inner_product(g: &StateGraph, f1: &[f64], f2: &[f64]) -> Result<f64> {
    check_len(g, f1)?;
    check_len(g, f2)?;
    let prods: Vec<f64> = f1.iter().zip(f2).map(|(a, b)| a * b).collect();
    Ok(pairwise_sum(&prods) / g.n() as f64)
}

/// `(1/(n-1)) sum_{j != i} v1(i,j) v2(i,j)`.
pub fn vector_dot_at(g: &StateGraph, v1: &EdgeVector, v2: &EdgeVector, i: usize) -> Result<f64> {
    g.check_index(i)?;
    for v in [v1, v2] {
        if v.n() != g.n() {
            return Err(Error::DimensionMismatch {
                expected: g.n(),
                found: v.n(),
                context: "edge vector size",
            });
        }
    }
    let prods: Vec<f64> = (0..g.n())
        .filter(|&j| j != i)
        .map(|j| v1.get(i, j) * v2.get(i, j))
        .collect();
    Ok(pairwise_sum(&prods) / (g.n() - 1) as f64)
}

/// Coordinate unit vector `(x^alpha_j - x^alpha_i) sqrt(w_ij)`.
pub fn unit_vector(g: &StateGraph, alpha: usize) -> Result<EdgeVector> {
    let x = g.coordinate(alpha)?;
    Ok(edge_from(g, &x))
}

/// One application of the first-order operator along `alpha`.
fn first_derivative(g: &StateGraph, f: &[f64], alpha: usize) -> VertexFunction {
    let n = g.n();
    let inv = 1.0 / (n - 1) as f64;
    let mut terms = Vec::with_capacity(n - 1);
    (0..n)
        .map(|i| {
            terms.clear();
            let xi = g.coord(i, alpha);
            for j in 0..n {
                if j != i {
                    terms.push((f[j] - f[i]) * (g.coord(j, alpha) - xi) * g.weight(i, j));
                }
            }
            pairwise_sum(&terms) * inv
        })
        .collect()
}

/// Non-local partial derivative of any order up to [`MAX_ORDER`].
///
/// Orders above one apply the first-order operator repeatedly, starting with
/// `alpha_1` and contracting with `alpha_q` last.
pub fn partial_derivative(g: &StateGraph, f: &[f64], req: &DerivativeRequest) -> Result<VertexFunction> {
    check_len(g, f)?;
    req.validate(g.dim())?;
    let mut current = f.to_vec();
    for &alpha in &req.multi_index {
        current = first_derivative(g, &current, alpha);
    }
    Ok(current)
}

/// Memoized derivatives of one vertex function, keyed by multi-index.
///
/// Shared prefixes are computed once: `(a, b, c)` reuses `(a, b)`.
#[derive(Debug, Clone)]
pub struct DerivativeCache<'g> {
    graph: &'g StateGraph,
    f: VertexFunction,
    table: BTreeMap<Vec<usize>, VertexFunction>,
}

impl<'g> DerivativeCache<'g> {
    pub fn new(graph: &'g StateGraph, f: VertexFunction) -> Result<Self> {
        check_len(graph, &f)?;
        Ok(DerivativeCache {
            graph,
            f,
            table: BTreeMap::new(),
        })
    }

    pub fn function(&self) -> &[f64] {
        &self.f
    }

    pub fn get(&mut self, req: &DerivativeRequest) -> Result<&[f64]> {
        req.validate(self.graph.dim())?;
        let idx = &req.multi_index;
        let mut have = (1..=idx.len())
            .rev()
            .find(|&l| self.table.contains_key(&idx[..l]))
            .unwrap_or(0);
        while have < idx.len() {
            let base = if have == 0 {
                self.f.clone()
            } else {
                self.table[&idx[..have]].clone()
            };
            let next = first_derivative(self.graph, &base, idx[have]);
            have += 1;
            self.table.insert(idx[..have].to_vec(), next);
        }
        Ok(&self.table[idx.as_slice()])
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

/// Gram matrix `G^{ab} = x^a . x^b` of the unit vectors at vertex `i`.
pub fn gram_at(g: &StateGraph, i: usize) -> Result<Matrix> {
    g.check_index(i)?;
    let p = g.dim();
    let units: Vec<EdgeVector> = (0..p).map(|a| unit_vector(g, a)).collect::<Result<_>>()?;
    let mut m = Matrix::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            let v = vector_dot_at(g, &units[a], &units[b], i)?;
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    Ok(m)
}

/// Deviation of the unit-vector Gram matrices from the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitNormReport {
    /// Entrywise maximum over vertices of `|G_i - I|`.
    pub max_deviation: Matrix,
    /// Vertex with the largest single deviation.
    pub worst_vertex: usize,
    /// Largest single deviation.
    pub worst: f64,
}

/// Measures `<x^a, x^b> - delta_ab` at every vertex. Diagnostic only.
pub fn verify_unit_norm(g: &StateGraph) -> Result<UnitNormReport> {
    let p = g.dim();
    let mut max_deviation = Matrix::zeros(p, p);
    let (mut worst, mut worst_vertex) = (0.0f64, 0);
    for i in 0..g.n() {
        let gram = gram_at(g, i)?;
        for a in 0..p {
            for b in 0..p {
                let target = if a == b { 1.0 } else { 0.0 };
                let d = (gram[(a, b)] - target).abs();
                if d > max_deviation[(a, b)] {
                    max_deviation[(a, b)] = d;
                }
                if d > worst {
                    worst = d;
                    worst_vertex = i;
                }
            }
        }
    }
    Ok(UnitNormReport {
        max_deviation,
        worst_vertex,
        worst,
    })
}

/// Largest absolute difference between the two orderings of a mixed second derivative.
pub fn mixed_commutator(g: &StateGraph, f: &[f64], a: usize, b: usize) -> Result<f64> {
    let ab = partial_derivative(g, f, &DerivativeRequest::new(alloc::vec![a, b]))?;
    let ba = partial_derivative(g, f, &DerivativeRequest::new(alloc::vec![b, a]))?;
    Ok(ab.iter().zip(&ba).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}
