//! NURBS boundary curves, boundary meshes and the built-in model problems.

mod builtin;
mod mesh;
mod problems;

pub use builtin::{builtin_geometry, circle, heart, pacman, slit, GEOMETRY_NAMES};
pub use mesh::{BoundaryMesh, SharedNode};
pub use problems::{builtin_problem, builtin_problem_scaled, Approach, DataFn, ModelProblem, ProblemKind, PROBLEM_NAMES};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::splines::{basis_funs_deriv, check_weights, BoundaryKind, KnotVector, Side, MAX_LOCAL};

pub type Point = Vector2<f64>;

/// Rotation by -π/2: `(t_2, -t_1)`. Applied to a positively oriented tangent
/// this gives the (unnormalized) outward normal.
#[inline]
pub fn rot(t: Point) -> Point {
    Point::new(t.y, -t.x)
}

/// A NURBS curve `γ = Σ C_i R_i` on `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NurbsCurve {
    kv: KnotVector,
    weights: Vec<f64>,
    points: Vec<Point>,
}

impl NurbsCurve {
    pub fn new(kv: KnotVector, weights: Vec<f64>, points: Vec<Point>) -> Result<Self> {
        check_weights(&kv, &weights)?;
        if points.len() != kv.num_basis() {
            return Err(Error::LengthMismatch {
                expected: kv.num_basis(),
                got: points.len(),
            });
        }
        if kv.degree() == 0 {
            return Err(Error::InvalidGeometry("curve degree must be positive".into()));
        }
        if kv.is_closed() {
            let n = points.len();
            if weights[0] != weights[n - 1] {
                return Err(Error::InvalidGeometry("closed curve: first and last weight differ".into()));
            }
            if (points[0] - points[n - 1]).norm() > 1e-13 {
                return Err(Error::InvalidGeometry(
                    "closed curve: first and last control point differ".into(),
                ));
            }
        }
        let curve = Self { kv, weights, points };
        // Derivatives must not vanish on any element, including its endpoints.
        let spans = curve.kv.element_spans();
        for (j, (l, r)) in curve.kv.elements().into_iter().enumerate() {
            for k in 0..=8 {
                let t = l + (r - l) * k as f64 / 8.0;
                let (_, d) = curve.eval_span(spans[j], t);
                if !(d.norm() > 0.0) || !d.norm().is_finite() {
                    return Err(Error::DegenerateDerivative(t));
                }
            }
        }
        Ok(curve)
    }

    pub fn knot_vector(&self) -> &KnotVector {
        &self.kv
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn control_points(&self) -> &[Point] {
        &self.points
    }

    pub fn degree(&self) -> usize {
        self.kv.degree()
    }

    pub fn a(&self) -> f64 {
        self.kv.a()
    }

    pub fn b(&self) -> f64 {
        self.kv.b()
    }

    pub fn kind(&self) -> BoundaryKind {
        self.kv.kind()
    }

    pub fn is_closed(&self) -> bool {
        self.kv.is_closed()
    }

    /// Point and parameter derivative using the polynomial piece of span `k`.
    pub fn eval_span(&self, k: usize, t: f64) -> (Point, Point) {
        let p = self.kv.degree();
        let mut n = [0.0; MAX_LOCAL];
        let mut dn = [0.0; MAX_LOCAL];
        basis_funs_deriv(&self.kv, k, t, &mut n, &mut dn);
        let mut num = Point::zeros();
        let mut dnum = Point::zeros();
        let mut w = 0.0;
        let mut dw = 0.0;
        for r in 0..=p {
            let i = k - p + r;
            let wi = self.weights[i];
            num += self.points[i] * (wi * n[r]);
            dnum += self.points[i] * (wi * dn[r]);
            w += wi * n[r];
            dw += wi * dn[r];
        }
        let x = num / w;
        let dx = (dnum - x * dw) / w;
        (x, dx)
    }

    pub fn eval_side(&self, t: f64, side: Side) -> Result<Point> {
        let k = self.kv.find_span(t, side)?;
        Ok(self.eval_span(k, t).0)
    }

    /// `γ(t)` for `t ∈ [a, b)`, and the left limit at `b`.
    pub fn eval(&self, t: f64) -> Result<Point> {
        let side = if t == self.b() { Side::Left } else { Side::Right };
        self.eval_side(t, side)
    }

    pub fn deriv_side(&self, t: f64, side: Side) -> Result<Point> {
        let k = self.kv.find_span(t, side)?;
        let d = self.eval_span(k, t).1;
        if !(d.norm() > 0.0) {
            return Err(Error::DegenerateDerivative(t));
        }
        Ok(d)
    }

    /// Right derivative `γ'ʳ(t)`; left derivative at `b`.
    pub fn deriv(&self, t: f64) -> Result<Point> {
        let side = if t == self.b() { Side::Left } else { Side::Right };
        self.deriv_side(t, side)
    }

    /// Outward unit normal `(γ_2', -γ_1') / |γ'|`. Fails at corners.
    pub fn outward_normal(&self, t: f64) -> Result<Point> {
        if self.is_corner(t) {
            return Err(Error::CornerEvaluation(t));
        }
        let d = self.deriv(t)?;
        Ok(rot(d) / d.norm())
    }

    /// Outward normal using the one-sided derivative.
    pub fn outward_normal_side(&self, t: f64, side: Side) -> Result<Point> {
        let d = self.deriv_side(t, side)?;
        Ok(rot(d) / d.norm())
    }

    /// Unit tangents left and right of `t`, with wrap-around at the
    /// endpoints of closed curves. `None` where a side does not exist.
    fn unit_tangents(&self, t: f64) -> (Option<Point>, Option<Point>) {
        let (a, b) = (self.a(), self.b());
        let closed = self.is_closed();
        let left = if t > a {
            self.deriv_side(t, Side::Left).ok()
        } else if closed {
            self.deriv_side(b, Side::Left).ok()
        } else {
            None
        };
        let right = if t < b {
            self.deriv_side(t, Side::Right).ok()
        } else if closed {
            self.deriv_side(a, Side::Right).ok()
        } else {
            None
        };
        (left.map(|d| d / d.norm()), right.map(|d| d / d.norm()))
    }

    /// True if the tangent direction jumps at `t` (only possible at
    /// geometry nodes). Endpoints of open curves count as corners.
    pub fn is_corner(&self, t: f64) -> bool {
        if !self.is_closed() && (t == self.a() || t == self.b()) {
            return true;
        }
        if t != self.a() && t != self.b() && self.kv.multiplicity(t) == 0 {
            return false;
        }
        match self.unit_tangents(t) {
            (Some(l), Some(r)) => (l - r).norm() > 1e-10,
            _ => true,
        }
    }

    /// Parameters of all corners (closed curves report `b` for the node at `a`).
    pub fn corners(&self) -> Vec<f64> {
        let nodes = self.kv.nodes();
        let start = if self.is_closed() { 1 } else { 0 };
        nodes[start..].iter().copied().filter(|&t| self.is_corner(t)).collect()
    }

    /// Interior angle (in `(0, 2π)`) at a node, measured on the left of the
    /// curve, i.e. inside the domain for closed positively oriented curves.
    pub fn interior_angle(&self, t: f64) -> Option<f64> {
        match self.unit_tangents(t) {
            (Some(l), Some(r)) => {
                let turn = (l.x * r.y - l.y * r.x).atan2(l.dot(&r));
                Some(std::f64::consts::PI - turn)
            }
            _ => None,
        }
    }

    /// Diameter of the traced curve estimated from `samples` points per element.
    pub fn diameter_sampled(&self, samples: usize) -> f64 {
        let pts = self.sample(samples);
        let mut d = 0.0f64;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                d = d.max((pts[i] - pts[j]).norm());
            }
        }
        d
    }

    /// Points at `samples + 1` equispaced parameters per element.
    pub fn sample(&self, samples: usize) -> Vec<Point> {
        let spans = self.kv.element_spans();
        let mut out = Vec::new();
        for (j, (l, r)) in self.kv.elements().into_iter().enumerate() {
            for k in 0..=samples {
                out.push(self.eval_span(spans[j], l + (r - l) * k as f64 / samples as f64).0);
            }
        }
        out
    }

    /// Signed area enclosed by a closed curve (positive for counterclockwise).
    pub fn signed_area(&self) -> f64 {
        let rule = crate::quadrature::gauss(16);
        let spans = self.kv.element_spans();
        let mut area = 0.0;
        for (j, (l, r)) in self.kv.elements().into_iter().enumerate() {
            for (s, w) in rule.iter() {
                let (x, d) = self.eval_span(spans[j], l + s * (r - l));
                area += 0.5 * w * (r - l) * (x.x * d.y - x.y * d.x);
            }
        }
        area
    }

    pub fn to_record(&self, name: Option<&str>) -> GeometryRecord {
        GeometryRecord {
            name: name.map(str::to_string),
            a: self.a(),
            p_gamma: self.degree(),
            knots: self.kv.knots().to_vec(),
            weights: self.weights.clone(),
            control_points: self.points.iter().map(|p| [p.x, p.y]).collect(),
            closed: self.is_closed(),
        }
    }
}

/// Transported derivative `(∂_Γ u) ∘ γ = (u ∘ γ)' / |γ'|`, with `du` the
/// parameter derivative of `u ∘ γ`.
pub fn arclength_deriv(curve: &NurbsCurve, du: impl Fn(f64) -> f64, t: f64) -> Result<f64> {
    let d = curve.deriv(t)?.norm();
    Ok(du(t) / d)
}

/// Geometry exchange format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub a: f64,
    pub p_gamma: usize,
    pub knots: Vec<f64>,
    pub weights: Vec<f64>,
    pub control_points: Vec<[f64; 2]>,
    pub closed: bool,
}

impl GeometryRecord {
    pub fn to_curve(&self) -> Result<NurbsCurve> {
        let b = *self
            .knots
            .last()
            .ok_or_else(|| Error::InvalidKnots("empty knot vector".into()))?;
        let kind = if self.closed { BoundaryKind::Closed } else { BoundaryKind::Open };
        let kv = KnotVector::new(self.p_gamma, self.a, b, self.knots.clone(), kind)?;
        let pts = self.control_points.iter().map(|c| Point::new(c[0], c[1])).collect();
        NurbsCurve::new(kv, self.weights.clone(), pts)
    }
}
