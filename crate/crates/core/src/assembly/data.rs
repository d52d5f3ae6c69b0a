use crate::geometry::{rot, BoundaryMesh, DataFn, ModelProblem, Point};
use crate::quadrature::gauss;

/// Single-element quadrature for boundary data, graded towards parameters
/// where the data is singular.
#[derive(Debug, Clone, PartialEq)]
pub struct DataQuadrature {
    pub singular: Vec<f64>,
    pub grading: usize,
    pub order: usize,
}

impl DataQuadrature {
    pub fn new(singular: Vec<f64>, grading: usize, order: usize) -> Self {
        Self {
            singular,
            grading: grading.max(1),
            order: order.max(1),
        }
    }

    /// Plain Gauss rule of the given order on every element.
    pub fn plain(order: usize) -> Self {
        Self::new(Vec::new(), 1, order)
    }

    pub fn for_problem(problem: &ModelProblem, order: usize) -> Self {
        Self::new(problem.singular_params.clone(), problem.grading, order)
    }

    fn is_singular(&self, mesh: &BoundaryMesh, t: f64) -> bool {
        let kv = mesh.knot_vector();
        let (a, b) = (kv.a(), kv.b());
        self.singular.iter().any(|&s| {
            s == t || (mesh.is_closed() && ((s == a && t == b) || (s == b && t == a)))
        })
    }

    /// Nodes `σ ∈ (0, 1)` and weights on element `e`.
    pub fn rule(&self, mesh: &BoundaryMesh, e: usize) -> Vec<(f64, f64)> {
        let g = gauss(self.order);
        let (l, r) = mesh.element(e);
        let left = self.grading > 1 && self.is_singular(mesh, l);
        let right = self.grading > 1 && self.is_singular(mesh, r);
        let q = self.grading as i32;
        let graded = |u: f64, w: f64| (u.powi(q), w * q as f64 * u.powi(q - 1));
        match (left, right) {
            (false, false) => g.iter().collect(),
            (true, false) => g.iter().map(|(u, w)| graded(u, w)).collect(),
            (false, true) => g
                .iter()
                .map(|(u, w)| {
                    let (s, ws) = graded(u, w);
                    (1.0 - s, ws)
                })
                .collect(),
            (true, true) => {
                let mut out: Vec<(f64, f64)> = g
                    .iter()
                    .map(|(u, w)| {
                        let (s, ws) = graded(u, w);
                        (0.5 * s, 0.5 * ws)
                    })
                    .collect();
                out.extend(g.iter().map(|(u, w)| {
                    let (s, ws) = graded(u, w);
                    (1.0 - 0.5 * s, 0.5 * ws)
                }));
                out
            }
        }
    }
}

/// Data value at local coordinate `σ` of element `e`, with the point,
/// unnormalized tangent and Jacobian.
#[inline]
pub(crate) fn data_at(mesh: &BoundaryMesh, f: &DataFn, e: usize, sigma: f64) -> (f64, Point, f64) {
    let (x, t) = mesh.point_tangent(e, sigma);
    let jac = t.norm();
    let n = rot(t) / jac;
    (f(x, n), x, jac)
}
