use super::{NurbsCurve, Point};
use crate::error::{Error, Result};
use crate::quadrature::gauss;
use crate::splines::KnotVector;

const CHORD_SWITCH: f64 = 1e-3;
/// Pairs of elements at most this many elements apart may use a shifted frame.
const LOCAL_STEPS: usize = 64;
/// Relative extent below which a pair uses a shifted frame.
const LOCAL_SIZE: f64 = 1e-4;

/// How two distinct elements touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SharedNode {
    /// The first element ends where the second starts.
    EndStart,
    /// The first element starts where the second ends.
    StartEnd,
}

/// Mesh induced by a knot vector on a NURBS curve.
///
/// Element `j` (0-based) is `[x_j, x_{j+1}]` in the parameter domain and is
/// mapped to `[0, 1]` by `γ_j(σ) = γ(x_j + σ (x_{j+1} - x_j))`.
///
/// Mesh nodes follow the patch convention of the estimators: for closed
/// curves node `i` is `x_{i+1}` with patch `{i, i+1 mod n}`; for open curves
/// node `i` is `x_i` with patch `{i-1, i}` restricted to existing elements.
#[derive(Debug, Clone)]
pub struct BoundaryMesh {
    curve: NurbsCurve,
    kv: KnotVector,
    nodes: Vec<f64>,
    spans: Vec<usize>,
    geo_spans: Vec<usize>,
    arclen: Vec<f64>,
    center: Vec<Point>,
    radius: Vec<f64>,
    /// `γ_j(1) - γ_j(0)`.
    edges: Vec<Point>,
    scale: f64,
}

impl BoundaryMesh {
    pub fn new(curve: &NurbsCurve, kv: &KnotVector) -> Result<Self> {
        if kv.a() != curve.a() || kv.b() != curve.b() {
            return Err(Error::InvalidMesh("parameter interval differs from the curve".into()));
        }
        if kv.kind() != curve.kind() {
            return Err(Error::InvalidMesh("boundary kind differs from the curve".into()));
        }
        let nodes = kv.nodes();
        for x in curve.knot_vector().nodes() {
            if nodes.binary_search_by(|y| y.partial_cmp(&x).unwrap()).is_err() {
                return Err(Error::InvalidMesh(format!("geometry node {x} missing from mesh")));
            }
        }
        let n = nodes.len() - 1;
        if kv.is_closed() && n < 3 {
            return Err(Error::InvalidMesh("closed meshes need at least 3 elements".into()));
        }
        let geo_ext = curve.knot_vector().extended();
        let geo_spans: Vec<usize> = nodes[..n]
            .iter()
            .map(|&x| geo_ext.partition_point(|&y| y <= x) - 1)
            .collect();
        let mut mesh = Self {
            curve: curve.clone(),
            kv: kv.clone(),
            spans: kv.element_spans(),
            nodes,
            geo_spans,
            arclen: Vec::new(),
            center: Vec::new(),
            radius: Vec::new(),
            edges: Vec::new(),
            scale: curve.control_points().iter().map(|c| c.norm()).fold(0.0, f64::max),
        };
        let rule = gauss(16);
        for j in 0..n {
            let len: f64 = rule.iter().map(|(s, w)| w * mesh.tangent(j, s).norm()).sum();
            if !(len > 0.0) {
                return Err(Error::InvalidMesh(format!("element {j} has zero arclength")));
            }
            mesh.arclen.push(len);
            let c = mesh.point(j, 0.5);
            let r = (0..=8)
                .map(|k| (mesh.point(j, k as f64 / 8.0) - c).norm())
                .fold(0.0, f64::max);
            mesh.center.push(c);
            // chord samples underestimate the bounding radius of curved pieces
            mesh.radius.push(r.max(0.5 * len) * 1.05);
            mesh.edges.push(mesh.chord(j, 0.0, 1.0));
        }
        Ok(mesh)
    }

    pub fn curve(&self) -> &NurbsCurve {
        &self.curve
    }

    pub fn knot_vector(&self) -> &KnotVector {
        &self.kv
    }

    pub fn is_closed(&self) -> bool {
        self.kv.is_closed()
    }

    pub fn num_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Distinct parameter nodes `x_0 < ... < x_n`.
    pub fn param_nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn element(&self, j: usize) -> (f64, f64) {
        (self.nodes[j], self.nodes[j + 1])
    }

    pub fn param_length(&self, j: usize) -> f64 {
        self.nodes[j + 1] - self.nodes[j]
    }

    /// Arclength `|Q_j|`, the mesh-size function on element `j`.
    pub fn arclength(&self, j: usize) -> f64 {
        self.arclen[j]
    }

    pub fn arclengths(&self) -> &[f64] {
        &self.arclen
    }

    pub fn total_length(&self) -> f64 {
        self.arclen.iter().sum()
    }

    pub fn mesh_ratio(&self) -> f64 {
        self.kv.mesh_ratio()
    }

    /// Span of element `j` in the discretization knot vector.
    pub fn span(&self, j: usize) -> usize {
        self.spans[j]
    }

    pub fn center(&self, j: usize) -> Point {
        self.center[j]
    }

    /// Radius of a disc around [`Self::center`] containing the element.
    pub fn radius(&self, j: usize) -> f64 {
        self.radius[j]
    }

    pub fn param(&self, j: usize, sigma: f64) -> f64 {
        self.nodes[j] + sigma * (self.nodes[j + 1] - self.nodes[j])
    }

    /// `γ_j(σ)` and `dγ_j/dσ`.
    #[inline]
    pub fn point_tangent(&self, j: usize, sigma: f64) -> (Point, Point) {
        let h = self.nodes[j + 1] - self.nodes[j];
        let (x, d) = self.curve.eval_span(self.geo_spans[j], self.nodes[j] + sigma * h);
        (x, d * h)
    }

    #[inline]
    pub fn point(&self, j: usize, sigma: f64) -> Point {
        self.point_tangent(j, sigma).0
    }

    #[inline]
    pub fn tangent(&self, j: usize, sigma: f64) -> Point {
        self.point_tangent(j, sigma).1
    }

    /// `γ_j(σ + d) - γ_j(σ)`, integrating the tangent when the points are close.
    pub fn chord(&self, j: usize, sigma: f64, d: f64) -> Point {
        let span = self.nodes[self.nodes.len() - 1] - self.nodes[0];
        if d.abs() * self.param_length(j) > CHORD_SWITCH * span {
            return self.point(j, sigma + d) - self.point(j, sigma);
        }
        let mut c = Point::zeros();
        for (u, w) in gauss(4).iter() {
            c += w * self.tangent(j, sigma + d * u);
        }
        c * d
    }

    /// Element containing parameter `t` and the local coordinate; `b` and
    /// interior nodes belong to the element on their left.
    pub fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let (a, b) = (self.kv.a(), self.kv.b());
        if !(t >= a && t <= b) {
            return Err(Error::OutOfDomain { t, a, b });
        }
        let n = self.num_elements();
        let j = self.nodes.partition_point(|&x| x < t).saturating_sub(1).min(n - 1);
        let (l, r) = self.element(j);
        Ok((j, (t - l) / (r - l)))
    }

    pub fn next(&self, j: usize) -> Option<usize> {
        let n = self.num_elements();
        if j + 1 < n {
            Some(j + 1)
        } else if self.is_closed() {
            Some(0)
        } else {
            None
        }
    }

    pub fn prev(&self, j: usize) -> Option<usize> {
        if j > 0 {
            Some(j - 1)
        } else if self.is_closed() {
            Some(self.num_elements() - 1)
        } else {
            None
        }
    }

    /// Classification of distinct elements by parameter-node identity,
    /// including the wrap `a ~ b` of closed curves.
    pub fn shared_node(&self, e: usize, f: usize) -> Option<SharedNode> {
        if e == f {
            return None;
        }
        if self.next(e) == Some(f) {
            Some(SharedNode::EndStart)
        } else if self.prev(e) == Some(f) {
            Some(SharedNode::StartEnd)
        } else {
            None
        }
    }

    /// Number of mesh nodes `#N★`.
    pub fn num_nodes(&self) -> usize {
        if self.is_closed() {
            self.num_elements()
        } else {
            self.num_elements() + 1
        }
    }

    /// Parameter of mesh node `i`.
    pub fn node_param(&self, i: usize) -> f64 {
        if self.is_closed() {
            self.nodes[i + 1]
        } else {
            self.nodes[i]
        }
    }

    /// Elements of the node patch: `(left, right)` of the node.
    pub fn node_patch(&self, i: usize) -> (Option<usize>, Option<usize>) {
        let n = self.num_elements();
        if self.is_closed() {
            (Some(i), Some((i + 1) % n))
        } else {
            let left = i.checked_sub(1);
            let right = (i < n).then_some(i);
            (left, right)
        }
    }

    /// Mesh nodes that are endpoints of element `j`: `(left node, right node)`.
    pub fn element_nodes(&self, j: usize) -> (Option<usize>, Option<usize>) {
        let n = self.num_elements();
        if self.is_closed() {
            (Some((j + n - 1) % n), Some(j))
        } else {
            (Some(j), Some(j + 1))
        }
    }

    /// Sum over nodes of elementwise quantities, each element contributing
    /// to both its end nodes.
    pub fn patch_sum(&self, per_element: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_nodes()];
        for (j, v) in per_element.iter().enumerate() {
            let (l, r) = self.element_nodes(j);
            for node in [l, r].into_iter().flatten() {
                out[node] += v;
            }
        }
        out
    }

    /// Lower bound for the distance between two elements.
    pub fn separation(&self, e: usize, f: usize) -> f64 {
        (self.center[e] - self.center[f]).norm() - self.radius[e] - self.radius[f]
    }

    /// `γ_f(0) - γ_e(0)` as a sum of element chords, for nearby elements
    /// whose extent is tiny compared to their coordinates; `None` otherwise.
    pub fn local_offset(&self, e: usize, f: usize) -> Option<Point> {
        let extent = (self.center[e] - self.center[f]).norm() + self.radius[e] + self.radius[f];
        if extent > LOCAL_SIZE * self.scale {
            return None;
        }
        let n = self.num_elements();
        let steps = |from: usize, to: usize| {
            if to >= from {
                Some(to - from)
            } else if self.is_closed() {
                Some(to + n - from)
            } else {
                None
            }
        };
        let sum = |from: usize, k: usize| (0..k).fold(Point::zeros(), |acc, i| acc + self.edges[(from + i) % n]);
        match (steps(e, f), steps(f, e)) {
            (Some(a), b) if a <= LOCAL_STEPS && b.is_none_or(|b| a <= b) => Some(sum(e, a)),
            (_, Some(b)) if b <= LOCAL_STEPS => Some(-sum(f, b)),
            _ => None,
        }
    }

    /// Whether the curve has a tangent jump at parameter `t`.
    pub fn is_corner(&self, t: f64) -> bool {
        self.curve.is_corner(t)
    }
}
