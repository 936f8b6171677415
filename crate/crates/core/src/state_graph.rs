//! States as vertices of a fully connected weighted graph.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernels::{eval_weight, WeightConfig, WeightSpec};
use crate::numeric::pairwise_sum;

/// A labelled point in the (normalized) state space.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StateVector {
    components: Vec<f64>,
    labels: Vec<String>,
}

impl StateVector {
    pub fn new(components: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::TooFew {
                what: "state components",
                required: 1,
                found: 0,
            });
        }
        if labels.len() != components.len() {
            return Err(Error::DimensionMismatch {
                expected: components.len(),
                found: labels.len(),
                context: "state labels",
            });
        }
        if let Some(k) = components.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "state vector",
                index: k,
            });
        }
        Ok(StateVector { components, labels })
    }

    /// Components labelled `x0, x1, ...`.
    pub fn unlabeled(components: Vec<f64>) -> Result<Self> {
        let labels = (0..components.len()).map(|k| alloc::format!("x{k}")).collect();
        Self::new(components, labels)
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }
}

/// Named per-vertex scalar columns.
pub type Observables = Vec<(String, Vec<f64>)>;

/// Fully connected graph over computed states with a dense symmetric weight table.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGraph {
    vertices: Vec<StateVector>,
    observables: Observables,
    weights: Vec<f64>,
    radius: f64,
    spec: Option<WeightSpec>,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    let sq: Vec<f64> = a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).collect();
    libm::sqrt(pairwise_sum(&sq))
}

fn check_states(states: &[StateVector]) -> Result<usize> {
    if states.len() < 2 {
        return Err(Error::TooFew {
            what: "vertices",
            required: 2,
            found: states.len(),
        });
    }
    let p = states[0].dim();
    for s in states {
        if s.dim() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: s.dim(),
                context: "state vector length",
            });
        }
    }
    Ok(p)
}

fn check_observables(observables: &Observables, n: usize) -> Result<()> {
    for (_, col) in observables {
        if col.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: col.len(),
                context: "observable column length",
            });
        }
        if let Some(k) = col.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "observable column",
                index: k,
            });
        }
    }
    Ok(())
}

/// Half the largest pairwise distance. Errors on duplicate states.
fn graph_radius(states: &[StateVector]) -> Result<f64> {
    let mut max = 0.0f64;
    for i in 0..states.len() {
        for j in i + 1..states.len() {
            let r = euclidean(states[i].components(), states[j].components());
            if r == 0.0 {
                return Err(Error::DuplicateState { i, j });
            }
            max = max.max(r);
        }
    }
    Ok(0.5 * max)
}

/// Builds the graph, resolving automatic weight parameters against the graph radius.
pub fn build_graph(
    states: Vec<StateVector>,
    observables: Observables,
    weights: &WeightConfig,
) -> Result<StateGraph> {
    let p = check_states(&states)?;
    check_observables(&observables, states.len())?;
    let radius = graph_radius(&states)?;
    let spec = weights.resolve(p as u32, radius)?;
    build_graph_with_spec(states, observables, spec)
}

/// Builds the graph with a fully specified weight.
pub fn build_graph_with_spec(
    states: Vec<StateVector>,
    observables: Observables,
    spec: WeightSpec,
) -> Result<StateGraph> {
    let p = check_states(&states)?;
    if spec.dim as usize != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: spec.dim as usize,
            context: "weight spec dimension",
        });
    }
    check_observables(&observables, states.len())?;
    let radius = graph_radius(&states)?;
    let n = states.len();
    let mut weights = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let r = euclidean(states[i].components(), states[j].components());
            let w = eval_weight(&spec, r)?;
            weights[i * n + j] = w;
            weights[j * n + i] = w;
        }
    }
    Ok(StateGraph {
        vertices: states,
        observables,
        weights,
        radius,
        spec: Some(spec),
    })
}

/// Builds a graph from an explicit weight table (row-major `n * n`).
pub fn from_weights(
    states: Vec<StateVector>,
    observables: Observables,
    weights: Vec<f64>,
) -> Result<StateGraph> {
    check_states(&states)?;
    let n = states.len();
    check_observables(&observables, n)?;
    if weights.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            found: weights.len(),
            context: "weight table size",
        });
    }
    for i in 0..n {
        if weights[i * n + i] != 0.0 {
            return Err(Error::InvalidWeights(alloc::format!("nonzero diagonal at {i}")));
        }
        for j in i + 1..n {
            let (a, b) = (weights[i * n + j], weights[j * n + i]);
            if a != b {
                return Err(Error::InvalidWeights(alloc::format!("asymmetric entry ({i}, {j})")));
            }
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::InvalidWeights(alloc::format!("entry ({i}, {j}) is {a}")));
            }
        }
    }
    let radius = graph_radius(&states)?;
    Ok(StateGraph {
        vertices: states,
        observables,
        weights,
        radius,
        spec: None,
    })
}

impl StateGraph {
    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].dim()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn vertices(&self) -> &[StateVector] {
        &self.vertices
    }

    /// Weight spec used to populate the table, if any.
    pub fn weight_spec(&self) -> Option<&WeightSpec> {
        self.spec.as_ref()
    }

    pub fn observables(&self) -> &Observables {
        &self.observables
    }

    pub fn observable(&self, name: &str) -> Result<&[f64]> {
        self.observables
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::UnknownName(name.into()))
    }

    /// Weight between `i` and `j`; zero on the diagonal.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n() + j]
    }

    /// Row-major weight table.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Component `alpha` of vertex `i`.
    pub fn coord(&self, i: usize, alpha: usize) -> f64 {
        self.vertices[i].components()[alpha]
    }

    /// Coordinate function `x^alpha` over all vertices.
    pub fn coordinate(&self, alpha: usize) -> Result<Vec<f64>> {
        if alpha >= self.dim() {
            return Err(Error::IndexOutOfRange {
                what: "state component",
                index: alpha,
                len: self.dim(),
            });
        }
        Ok(self.vertices.iter().map(|v| v.components()[alpha]).collect())
    }

    /// Returns a copy with every weight multiplied by `factor`.
    pub fn scaled_weights(&self, factor: f64) -> Result<StateGraph> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::param("factor", "must be finite and positive"));
        }
        let mut g = self.clone();
        for w in &mut g.weights {
            *w *= factor;
        }
        g.spec = g.spec.map(|mut s| {
            s.scale *= factor;
            s
        });
        Ok(g)
    }

    pub(crate) fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            return Err(Error::IndexOutOfRange {
                what: "vertex",
                index: i,
                len: self.n(),
            });
        }
        Ok(())
    }
}

/// Euclidean distance between vertices `i != j`.
pub fn pairwise_distance(g: &StateGraph, i: usize, j: usize) -> Result<f64> {
    g.check_index(i)?;
    g.check_index(j)?;
    if i == j {
        return Err(Error::SelfEdge(i));
    }
    Ok(euclidean(
        g.vertices[i].components(),
        g.vertices[j].components(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::WeightFamily;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn states_1d(xs: &[f64]) -> Vec<StateVector> {
        xs.iter().map(|&x| StateVector::unlabeled(alloc::vec![x]).unwrap()).collect()
    }

    #[test]
    fn two_vertex_inverse_square() {
        let cfg = WeightConfig::polynomial(Some(0.0));
        let g = build_graph(states_1d(&[0.0, 1.0]), Vec::new(), &cfg).unwrap();
        assert_relative_eq!(g.weight(0, 1), 1.0, max_relative = 1e-15);
        assert_eq!(g.weight(0, 0), 0.0);
        assert_eq!(g.radius(), 0.5);
    }

    #[test]
    fn duplicates_rejected() {
        let cfg = WeightConfig::polynomial(None);
        let err = build_graph(states_1d(&[2.0, 2.0, 2.0]), Vec::new(), &cfg).unwrap_err();
        assert_eq!(err, Error::DuplicateState { i: 0, j: 1 });
    }

    #[test]
    fn construction_errors() {
        let cfg = WeightConfig::gaussian(None);
        assert!(matches!(
            build_graph(states_1d(&[1.0]), Vec::new(), &cfg),
            Err(Error::TooFew { .. })
        ));
        let mixed = alloc::vec![
            StateVector::unlabeled(alloc::vec![0.0]).unwrap(),
            StateVector::unlabeled(alloc::vec![0.0, 1.0]).unwrap(),
        ];
        assert!(matches!(
            build_graph(mixed, Vec::new(), &cfg),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            StateVector::unlabeled(alloc::vec![f64::NAN]),
            Err(Error::NonFinite { .. })
        ));
        let obs = alloc::vec![("e".into(), alloc::vec![1.0])];
        assert!(build_graph(states_1d(&[0.0, 1.0]), obs, &cfg).is_err());
    }

    #[test]
    fn gaussian_table_matches_scalar_evaluation() {
        let xs = [0.0, 0.25, 0.5, 0.75, 1.0];
        let cfg = WeightConfig::gaussian(Some(0.3));
        let g = build_graph(states_1d(&xs), Vec::new(), &cfg).unwrap();
        let spec = *g.weight_spec().unwrap();
        assert_eq!(spec.family, WeightFamily::Gaussian);
        assert_eq!(spec.radius, 0.5);
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    let r = (xs[j] - xs[i]).abs();
                    let direct = if r > 0.5 {
                        0.0
                    } else {
                        spec.scale * (-r * r / (2.0 * 0.09)).exp()
                    };
                    assert_relative_eq!(g.weight(i, j), direct, max_relative = 1e-14);
                }
            }
        }
    }

    #[test]
    fn distances() {
        let s = alloc::vec![
            StateVector::unlabeled(alloc::vec![0.0, 0.0]).unwrap(),
            StateVector::unlabeled(alloc::vec![3.0, 4.0]).unwrap(),
        ];
        let g = build_graph(s, Vec::new(), &WeightConfig::polynomial(None)).unwrap();
        assert_eq!(pairwise_distance(&g, 0, 1).unwrap(), 5.0);
        assert_eq!(pairwise_distance(&g, 1, 1), Err(Error::SelfEdge(1)));
        assert!(pairwise_distance(&g, 0, 2).is_err());
    }

    #[test]
    fn explicit_weight_table_validation() {
        let s = states_1d(&[0.0, 1.0]);
        assert!(from_weights(s.clone(), Vec::new(), alloc::vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(from_weights(s.clone(), Vec::new(), alloc::vec![1.0, 1.0, 1.0, 0.0]).is_err());
        let g = from_weights(s, Vec::new(), alloc::vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(g.weight(1, 0), 1.0);
        assert!(g.weight_spec().is_none());
    }

    fn cloud() -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 2..9)
    }

    proptest! {
        #[test]
        fn weights_symmetric_and_distance_matches(points in cloud()) {
            let states: Vec<StateVector> =
                points.iter().map(|c| StateVector::unlabeled(c.clone()).unwrap()).collect();
            let g = match build_graph(states, Vec::new(), &WeightConfig::polynomial(None)) {
                Ok(g) => g,
                Err(_) => return Ok(()),
            };
            for i in 0..g.n() {
                prop_assert_eq!(g.weight(i, i), 0.0);
                for j in 0..g.n() {
                    prop_assert_eq!(g.weight(i, j).to_bits(), g.weight(j, i).to_bits());
                    if i != j {
                        let d = pairwise_distance(&g, i, j).unwrap();
                        let mut acc = 0.0;
                        for k in (0..3).rev() {
                            let t = points[j][k] - points[i][k];
                            acc += t * t;
                        }
                        prop_assert!((d - acc.sqrt()).abs() <= 1e-12 * (1.0 + d));
                    }
                }
            }
        }

        #[test]
        fn radius_never_decreases(points in cloud(), extra in prop::collection::vec(-8.0f64..8.0, 3)) {
            let states: Vec<StateVector> =
                points.iter().map(|c| StateVector::unlabeled(c.clone()).unwrap()).collect();
            let Ok(r0) = graph_radius(&states) else { return Ok(()) };
            let mut more = states.clone();
            more.push(StateVector::unlabeled(extra).unwrap());
            if let Ok(r1) = graph_radius(&more) {
                prop_assert!(r1 >= r0);
            }
        }
    }
}
