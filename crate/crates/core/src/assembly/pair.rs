//! Element-pair integration of `∫∫ a(σ) b(τ) k(γ_e(σ), γ_f(τ)) dσ dτ` for
//! vector-valued element densities `a`, `b`.
//!
//! * distinct elements without a common node: tensor Gauss with orders chosen
//!   from the element separation, recursively subdividing near pairs;
//! * identical elements: Duffy transformation `(σ, τ) ↦ (σ, στ)` on both
//!   triangles; for the logarithmic kernel the singular factors `log σ` and
//!   `log(1 - τ)` are integrated with log-weighted rules;
//! * elements with a common node: Duffy transformation around that vertex,
//!   with the factor `log σ` split off for the logarithmic kernel.

use std::f64::consts::PI;

use crate::geometry::{rot, BoundaryMesh, Point, SharedNode};
use crate::quadrature::{gauss, log_rule, QuadConfig, QuadratureRule};
use crate::splines::MAX_LOCAL;

const INV_2PI: f64 = 0.5 / PI;
const INV_4PI: f64 = 0.25 / PI;

/// Integral kernels on the boundary. Normals are unnormalized
/// (`rot` of the element tangent), so the trial (resp. test) density of the
/// double-layer (resp. adjoint) kernel carries no Jacobian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// `-(1/2π) log|x - y|`
    SingleLayer,
    /// `(1/2π) (x - y)·n(y) / |x - y|²`
    DoubleLayer,
    /// `-(1/2π) (x - y)·n(x) / |x - y|²`
    AdjointDoubleLayer,
}

#[inline]
pub(crate) fn kernel_value(k: Kernel, x: Point, tx: Point, y: Point, ty: Point) -> f64 {
    kernel_diff(k, x - y, tx, ty)
}

/// Kernel in terms of `d = x - y`.
#[inline]
pub(crate) fn kernel_diff(k: Kernel, d: Point, tx: Point, ty: Point) -> f64 {
    let r2 = d.norm_squared();
    match k {
        Kernel::SingleLayer => -INV_4PI * r2.ln(),
        Kernel::DoubleLayer => INV_2PI * d.dot(&rot(ty)) / r2,
        Kernel::AdjointDoubleLayer => -INV_2PI * d.dot(&rot(tx)) / r2,
    }
}

/// Element density `σ ↦ (v_0, ..., v_{n-1})`.
pub trait Density: Sync {
    fn len(&self) -> usize;
    fn eval(&self, e: usize, sigma: f64, out: &mut [f64]);
}

/// Density given by a closure.
pub struct FnDensity<F> {
    pub n: usize,
    pub f: F,
}

impl<F> Density for FnDensity<F>
where
    F: Fn(usize, f64, &mut [f64]) + Sync,
{
    fn len(&self) -> usize {
        self.n
    }
    fn eval(&self, e: usize, sigma: f64, out: &mut [f64]) {
        (self.f)(e, sigma, out)
    }
}

/// Orders of the far-field Gauss ladder.
const LADDER: [usize; 9] = [2, 3, 4, 5, 6, 8, 10, 12, 16];
/// `0.5 ln(1e16)`: target relative accuracy of far-field rules.
const FAR_CONST: f64 = 18.5;

/// Gauss order needed for a piece of length `len` at distance `dist` from
/// the singularity, or `None` if the singularity is too close.
pub(crate) fn far_order(dist: f64, len: f64, min: usize, max: usize) -> Option<usize> {
    if !(dist > 0.0) {
        return None;
    }
    let r = dist / (0.5 * len);
    let rho = r + (1.0 + r * r).sqrt();
    let n = (FAR_CONST / rho.ln()).ceil();
    if n > max as f64 {
        return None;
    }
    Some((n as usize).max(min).min(max))
}

/// Minimal far-field order for densities of degree `p` on a geometry of degree `pg`.
pub(crate) fn min_order(p: usize, pg: usize) -> usize {
    2 + (p + pg + 1) / 2
}

/// Points, tangents and density values of every element at the Gauss points
/// of the ladder orders.
pub struct SampleCache {
    orders: Vec<usize>,
    ncomp: usize,
    /// `[order][element]` -> samples
    data: Vec<Vec<Vec<Sample>>>,
}

#[derive(Clone, Copy)]
pub(crate) struct Sample {
    pub x: Point,
    pub t: Point,
    /// Gauss weight.
    pub w: f64,
    pub v: [f64; MAX_LOCAL],
}

impl SampleCache {
    pub fn new(mesh: &BoundaryMesh, density: &dyn Density, max_order: usize) -> Self {
        let orders: Vec<usize> = LADDER.iter().copied().filter(|&n| n <= max_order).collect();
        let orders = if orders.is_empty() { vec![max_order] } else { orders };
        let ncomp = density.len();
        let data = orders
            .iter()
            .map(|&n| {
                let rule = gauss(n);
                (0..mesh.num_elements())
                    .map(|e| {
                        rule.iter()
                            .map(|(s, w)| {
                                let (x, t) = mesh.point_tangent(e, s);
                                let mut v = [0.0; MAX_LOCAL];
                                density.eval(e, s, &mut v[..ncomp]);
                                Sample { x, t, w, v }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self { orders, ncomp, data }
    }

    /// Samples for the smallest cached order `>= n` (or the largest cached).
    pub(crate) fn samples(&self, e: usize, n: usize) -> &[Sample] {
        let k = self
            .orders
            .iter()
            .position(|&m| m >= n)
            .unwrap_or(self.orders.len() - 1);
        &self.data[k][e]
    }
}

/// One side of a pair integral.
pub struct Operand<'a> {
    pub density: &'a dyn Density,
    pub cache: Option<&'a SampleCache>,
    /// Polynomial degree of the density (for the minimal far-field order).
    pub degree: usize,
}

impl<'a> Operand<'a> {
    pub fn new(density: &'a dyn Density, cache: Option<&'a SampleCache>, degree: usize) -> Self {
        if let Some(c) = cache {
            debug_assert_eq!(c.ncomp, density.len());
        }
        Self { density, cache, degree }
    }
}

/// Bounds of the sub-piece `[s0, s1]` of element `e`: center, radius and
/// an arclength estimate.
pub(crate) fn piece_bounds(mesh: &BoundaryMesh, e: usize, s0: f64, s1: f64) -> (Point, f64, f64) {
    if s0 == 0.0 && s1 == 1.0 {
        return (mesh.center(e), mesh.radius(e), mesh.arclength(e));
    }
    piece_bounds_by(|s| mesh.point(e, s), s0, s1)
}

/// [`piece_bounds`] for an arbitrary point map of the element.
pub(crate) fn piece_bounds_by(point: impl Fn(f64) -> Point, s0: f64, s1: f64) -> (Point, f64, f64) {
    let pts: Vec<Point> = (0..=4).map(|k| point(s0 + (s1 - s0) * k as f64 / 4.0)).collect();
    let c = pts[2];
    let len: f64 = pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let r = pts.iter().map(|p| (p - c).norm()).fold(0.0, f64::max);
    (c, r.max(0.5 * len) * 1.05, len)
}

/// Point maps of two elements `e`, `f`, shifted to `γ_e(0)` when the pair
/// is tiny compared to its coordinates.
#[derive(Clone, Copy)]
pub(crate) struct Frame<'m> {
    mesh: &'m BoundaryMesh,
    pub(crate) e: usize,
    pub(crate) f: usize,
    offset: Option<Point>,
}

impl<'m> Frame<'m> {
    pub(crate) fn new(mesh: &'m BoundaryMesh, e: usize, f: usize) -> Self {
        Self {
            mesh,
            e,
            f,
            offset: mesh.local_offset(e, f),
        }
    }

    pub(crate) fn is_local(&self) -> bool {
        self.offset.is_some()
    }

    pub(crate) fn first(&self, s: f64) -> (Point, Point) {
        match self.offset {
            Some(_) => (self.mesh.chord(self.e, 0.0, s), self.mesh.tangent(self.e, s)),
            None => self.mesh.point_tangent(self.e, s),
        }
    }

    pub(crate) fn second(&self, t: f64) -> (Point, Point) {
        match self.offset {
            Some(o) => (o + self.mesh.chord(self.f, 0.0, t), self.mesh.tangent(self.f, t)),
            None => self.mesh.point_tangent(self.f, t),
        }
    }

    pub(crate) fn bounds_first(&self, s0: f64, s1: f64) -> (Point, f64, f64) {
        match self.offset {
            Some(_) => piece_bounds_by(|s| self.first(s).0, s0, s1),
            None => piece_bounds(self.mesh, self.e, s0, s1),
        }
    }

    pub(crate) fn bounds_second(&self, t0: f64, t1: f64) -> (Point, f64, f64) {
        match self.offset {
            Some(_) => piece_bounds_by(|t| self.second(t).0, t0, t1),
            None => piece_bounds(self.mesh, self.f, t0, t1),
        }
    }
}

/// `out[i * nb + j] = ∫∫ a_i(σ) b_j(τ) k(γ_e(σ), γ_f(τ)) dσ dτ`.
pub fn integrate_pair(
    mesh: &BoundaryMesh,
    kernel: Kernel,
    e: usize,
    f: usize,
    test: &Operand,
    trial: &Operand,
    cfg: &QuadConfig,
    out: &mut [f64],
) {
    let na = test.density.len();
    let nb = trial.density.len();
    out[..na * nb].iter_mut().for_each(|v| *v = 0.0);
    if e == f {
        same_element(mesh, kernel, e, test, trial, cfg, out);
        return;
    }
    match mesh.shared_node(e, f) {
        Some(SharedNode::StartEnd) => {
            common_vertex(mesh, kernel, e, f, false, true, test, trial, cfg, out)
        }
        Some(SharedNode::EndStart) => {
            common_vertex(mesh, kernel, e, f, true, false, test, trial, cfg, out)
        }
        None => far_pair(mesh, kernel, e, f, test, trial, cfg, out),
    }
}

#[inline]
fn accumulate(out: &mut [f64], a: &[f64], b: &[f64], w: f64) {
    let nb = b.len();
    for (i, ai) in a.iter().enumerate() {
        let wa = w * ai;
        let row = &mut out[i * nb..(i + 1) * nb];
        for (o, bj) in row.iter_mut().zip(b) {
            *o += wa * bj;
        }
    }
}

fn far_pair(
    mesh: &BoundaryMesh,
    kernel: Kernel,
    e: usize,
    f: usize,
    test: &Operand,
    trial: &Operand,
    cfg: &QuadConfig,
    out: &mut [f64],
) {
    let pg = mesh.curve().degree();
    let max = cfg.regular_order;
    let frame = Frame::new(mesh, e, f);
    let dist = mesh.separation(e, f);
    let ne = far_order(dist, mesh.arclength(e), min_order(test.degree, pg), max);
    let nf = far_order(dist, mesh.arclength(f), min_order(trial.degree, pg), max);
    if let (Some(ne), Some(nf), Some(ce), Some(cf), false) = (ne, nf, test.cache, trial.cache, frame.is_local()) {
        let se = ce.samples(e, ne);
        let sf = cf.samples(f, nf);
        let na = test.density.len();
        let nb = trial.density.len();
        for p in se {
            for q in sf {
                let k = kernel_value(kernel, p.x, p.t, q.x, q.t);
                accumulate(out, &p.v[..na], &q.v[..nb], p.w * q.w * k);
            }
        }
        return;
    }
    far_rect(mesh, &frame, kernel, (0.0, 1.0), (0.0, 1.0), test, trial, cfg, out, 0);
}

/// Tensor Gauss on `[s0, s1] × [t0, t1]`, subdividing the larger piece
/// while the pieces are too close for the maximal order.
#[allow(clippy::too_many_arguments)]
fn far_rect(
    mesh: &BoundaryMesh,
    frame: &Frame,
    kernel: Kernel,
    (s0, s1): (f64, f64),
    (t0, t1): (f64, f64),
    test: &Operand,
    trial: &Operand,
    cfg: &QuadConfig,
    out: &mut [f64],
    depth: usize,
) {
    let pg = mesh.curve().degree();
    let max = cfg.regular_order;
    let (ce, re, le) = frame.bounds_first(s0, s1);
    let (cf, rf, lf) = frame.bounds_second(t0, t1);
    let dist = (ce - cf).norm() - re - rf;
    let ne = far_order(dist, le, min_order(test.degree, pg), max);
    let nf = far_order(dist, lf, min_order(trial.degree, pg), max);
    match (ne, nf) {
        (Some(ne), Some(nf)) => tensor_block(frame, kernel, (s0, s1), ne, (t0, t1), nf, test, trial, out),
        _ if depth >= 40 => tensor_block(frame, kernel, (s0, s1), max, (t0, t1), max, test, trial, out),
        _ => {
            if le >= lf {
                let m = 0.5 * (s0 + s1);
                far_rect(mesh, frame, kernel, (s0, m), (t0, t1), test, trial, cfg, out, depth + 1);
                far_rect(mesh, frame, kernel, (m, s1), (t0, t1), test, trial, cfg, out, depth + 1);
            } else {
                let m = 0.5 * (t0 + t1);
                far_rect(mesh, frame, kernel, (s0, s1), (t0, m), test, trial, cfg, out, depth + 1);
                far_rect(mesh, frame, kernel, (s0, s1), (m, t1), test, trial, cfg, out, depth + 1);
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn tensor_block(
    frame: &Frame,
    kernel: Kernel,
    (s0, s1): (f64, f64),
    ne: usize,
    (t0, t1): (f64, f64),
    nf: usize,
    test: &Operand,
    trial: &Operand,
    out: &mut [f64],
) {
    let na = test.density.len();
    let nb = trial.density.len();
    let re = gauss(ne);
    let rf = gauss(nf);
    let pts_f: Vec<(Point, Point, f64, [f64; MAX_LOCAL])> = rf
        .iter()
        .map(|(t, w)| {
            let tau = t0 + (t1 - t0) * t;
            let (y, ty) = frame.second(tau);
            let mut v = [0.0; MAX_LOCAL];
            trial.density.eval(frame.f, tau, &mut v[..nb]);
            (y, ty, w * (t1 - t0), v)
        })
        .collect();
    let mut a = [0.0; MAX_LOCAL];
    for (s, ws) in re.iter() {
        let sigma = s0 + (s1 - s0) * s;
        let (x, tx) = frame.first(sigma);
        test.density.eval(frame.e, sigma, &mut a[..na]);
        let ws = ws * (s1 - s0);
        for (y, ty, wt, b) in &pts_f {
            let k = kernel_value(kernel, x, tx, *y, *ty);
            accumulate(out, &a[..na], &b[..nb], ws * wt * k);
        }
    }
}

/// Both densities on the same element.
fn same_element(
    mesh: &BoundaryMesh,
    kernel: Kernel,
    e: usize,
    test: &Operand,
    trial: &Operand,
    cfg: &QuadConfig,
    out: &mut [f64],
) {
    let na = test.density.len();
    let nb = trial.density.len();
    let g = gauss(cfg.regular_order);
    let mut a1 = [0.0; MAX_LOCAL];
    let mut a2 = [0.0; MAX_LOCAL];
    let mut b1 = [0.0; MAX_LOCAL];
    let mut b2 = [0.0; MAX_LOCAL];
    // a(σ) b(στ) and a(στ) b(σ) with weight σ
    let mut both = |sigma: f64, tau: f64, w: f64, out: &mut [f64], f: &dyn Fn(Point, Point, Point) -> (f64, f64)| {
        let st = sigma * tau;
        let t1 = mesh.tangent(e, sigma);
        let t2 = mesh.tangent(e, st);
        let d = mesh.chord(e, st, sigma * (1.0 - tau));
        test.density.eval(e, sigma, &mut a1[..na]);
        test.density.eval(e, st, &mut a2[..na]);
        trial.density.eval(e, st, &mut b1[..nb]);
        trial.density.eval(e, sigma, &mut b2[..nb]);
        let (k1, k2) = f(d, t1, t2);
        accumulate(out, &a1[..na], &b1[..nb], w * sigma * k1);
        accumulate(out, &a2[..na], &b2[..nb], w * sigma * k2);
    };
    match kernel {
        Kernel::SingleLayer => {
            // smooth quotient
            for (s, ws) in g.iter() {
                for (t, wt) in g.iter() {
                    both(s, t, ws * wt, out, &|d, _, _| {
                        let q = -INV_2PI * (d.norm() / (s * (1.0 - t))).ln();
                        (q, q)
                    });
                }
            }
            let l = log_rule(cfg.singular_order);
            // log σ
            for (s, ws) in l.iter() {
                for (t, wt) in g.iter() {
                    both(s, t, ws * wt, out, &|_, _, _| (-INV_2PI, -INV_2PI));
                }
            }
            // log(1 - τ)
            for (s, ws) in g.iter() {
                for (t, wt) in l.iter() {
                    both(s, 1.0 - t, ws * wt, out, &|_, _, _| (-INV_2PI, -INV_2PI));
                }
            }
        }
        _ => {
            for (s, ws) in g.iter() {
                for (t, wt) in g.iter() {
                    both(s, t, ws * wt, out, &|d, t1, t2| {
                        (kernel_diff(kernel, d, t1, t2), kernel_diff(kernel, -d, t2, t1))
                    });
                }
            }
        }
    }
}

/// Elements sharing one node. `flip_e` / `flip_f` select whether the shared
/// node is at `σ = 1` of the test element resp. `τ = 1` of the trial element.
#[allow(clippy::too_many_arguments)]
fn common_vertex(
    mesh: &BoundaryMesh,
    kernel: Kernel,
    e: usize,
    f: usize,
    flip_e: bool,
    flip_f: bool,
    test: &Operand,
    trial: &Operand,
    cfg: &QuadConfig,
    out: &mut [f64],
) {
    let na = test.density.len();
    let nb = trial.density.len();
    let se = |u: f64| if flip_e { 1.0 - u } else { u };
    let tf = |v: f64| if flip_f { 1.0 - v } else { v };
    // offsets from the shared node
    let de = |u: f64| mesh.chord(e, se(0.0), if flip_e { -u } else { u });
    let df = |v: f64| mesh.chord(f, tf(0.0), if flip_f { -v } else { v });
    let g = gauss(cfg.regular_order);
    let mut a1 = [0.0; MAX_LOCAL];
    let mut a2 = [0.0; MAX_LOCAL];
    let mut b1 = [0.0; MAX_LOCAL];
    let mut b2 = [0.0; MAX_LOCAL];
    // distances to the vertex: (σ, στ) and (στ, σ)
    let mut both = |sigma: f64,
                    tau: f64,
                    w: f64,
                    out: &mut [f64],
                    k: &dyn Fn(Point, Point, Point) -> f64| {
        let st = sigma * tau;
        let tx1 = mesh.tangent(e, se(sigma));
        let ty1 = mesh.tangent(f, tf(st));
        let tx2 = mesh.tangent(e, se(st));
        let ty2 = mesh.tangent(f, tf(sigma));
        let d1 = de(sigma) - df(st);
        let d2 = de(st) - df(sigma);
        test.density.eval(e, se(sigma), &mut a1[..na]);
        trial.density.eval(f, tf(st), &mut b1[..nb]);
        test.density.eval(e, se(st), &mut a2[..na]);
        trial.density.eval(f, tf(sigma), &mut b2[..nb]);
        accumulate(out, &a1[..na], &b1[..nb], w * sigma * k(d1, tx1, ty1));
        accumulate(out, &a2[..na], &b2[..nb], w * sigma * k(d2, tx2, ty2));
    };
    match kernel {
        Kernel::SingleLayer => {
            for (s, ws) in g.iter() {
                for (t, wt) in g.iter() {
                    both(s, t, ws * wt, out, &|d, _, _| -INV_2PI * (d.norm() / s).ln());
                }
            }
            let l = log_rule(cfg.singular_order);
            for (s, ws) in l.iter() {
                for (t, wt) in g.iter() {
                    both(s, t, ws * wt, out, &|_, _, _| -INV_2PI);
                }
            }
        }
        _ => {
            for (s, ws) in g.iter() {
                for (t, wt) in g.iter() {
                    both(s, t, ws * wt, out, &|d, tx, ty| kernel_diff(kernel, d, tx, ty));
                }
            }
        }
    }
}

/// Plain tensor Gauss of order `n` on the full square, for oracles.
pub fn brute_force_pair(
    mesh: &BoundaryMesh,
    kernel: Kernel,
    e: usize,
    f: usize,
    test: &dyn Density,
    trial: &dyn Density,
    n: usize,
    out: &mut [f64],
) {
    let na = test.len();
    let nb = trial.len();
    out[..na * nb].iter_mut().for_each(|v| *v = 0.0);
    let rule: std::sync::Arc<QuadratureRule> = gauss(n);
    let mut a = [0.0; MAX_LOCAL];
    let mut b = [0.0; MAX_LOCAL];
    for (s, ws) in rule.iter() {
        let (x, tx) = mesh.point_tangent(e, s);
        test.eval(e, s, &mut a[..na]);
        for (t, wt) in rule.iter() {
            let (y, ty) = mesh.point_tangent(f, t);
            trial.eval(f, t, &mut b[..nb]);
            accumulate(out, &a[..na], &b[..nb], ws * wt * kernel_value(kernel, x, tx, y, ty));
        }
    }
}
