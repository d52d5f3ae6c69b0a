//! Pointwise evaluation of `V ψ`, `K u`, `W u` and `K' ψ` on the boundary.
//!
//! A trace point is a pair `(e, σ)` of an element and a local coordinate.
//! On the element containing the point the integral is split at `σ` and the
//! logarithmic part of the single-layer kernel is integrated with the
//! log-weighted rule; all other elements use Gauss rules whose orders follow
//! the distance to the point, subdividing near the point.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::assembly::pair::{far_order, kernel_diff, kernel_value, min_order, Frame};
use crate::assembly::{Density, DiscreteFunction, FnDensity, Kernel, PiecewisePoly, SampleCache};
use crate::error::{Error, Result};
use crate::geometry::{rot, BoundaryMesh, DataFn, Point};
use crate::quadrature::{cheby_nodes, gauss, lagrange_deriv_matrix, lagrange_interp_matrix, log_rule, QuadConfig};
use crate::splines::MAX_LOCAL;

const INV_2PI: f64 = 0.5 / PI;
const MAX_DEPTH: usize = 50;

/// Boundary potential `x ↦ ∫_Γ k(x, y) c(y)` of an element density `c`
/// (already including whatever Jacobian the kernel requires).
pub struct Potential<'a> {
    mesh: &'a BoundaryMesh,
    density: &'a dyn Density,
    cache: SampleCache,
    degree: usize,
    cfg: QuadConfig,
}

impl<'a> Potential<'a> {
    pub fn new(mesh: &'a BoundaryMesh, density: &'a dyn Density, degree: usize, cfg: &QuadConfig) -> Self {
        Self {
            mesh,
            density,
            cache: SampleCache::new(mesh, density, cfg.regular_order),
            degree,
            cfg: cfg.clone(),
        }
    }

    pub fn components(&self) -> usize {
        self.density.len()
    }

    /// Potential at `γ_e(σ)`; for the adjoint double-layer kernel the
    /// normal is taken at the point.
    pub fn eval(&self, kernel: Kernel, e: usize, sigma: f64, out: &mut [f64]) {
        let nc = self.density.len();
        out[..nc].iter_mut().for_each(|v| *v = 0.0);
        let (x, tx) = self.mesh.point_tangent(e, sigma);
        let tx = tx / tx.norm();
        let pg = self.mesh.curve().degree();
        let min = min_order(self.degree, pg);
        let max = self.cfg.regular_order;
        for f in 0..self.mesh.num_elements() {
            if f == e {
                self.own_element(kernel, e, sigma, tx, out);
                continue;
            }
            if sigma == 0.0 && self.mesh.prev(e) == Some(f) {
                self.own_element(kernel, f, 1.0, tx, out);
                continue;
            }
            if sigma == 1.0 && self.mesh.next(e) == Some(f) {
                self.own_element(kernel, f, 0.0, tx, out);
                continue;
            }
            let frame = Frame::new(self.mesh, e, f);
            if frame.is_local() {
                let xl = frame.first(sigma).0;
                self.piece(kernel, &frame, xl, tx, 0.0, 1.0, min, out, 0);
                continue;
            }
            let dist = (x - self.mesh.center(f)).norm() - self.mesh.radius(f);
            match far_order(dist, self.mesh.arclength(f), min, max) {
                Some(n) => {
                    for q in self.cache.samples(f, n) {
                        let k = q.w * kernel_value(kernel, x, tx, q.x, q.t);
                        for c in 0..nc {
                            out[c] += k * q.v[c];
                        }
                    }
                }
                None => self.piece(kernel, &frame, x, tx, 0.0, 1.0, min, out, 0),
            }
        }
    }

    /// Integral over `[t0, t1]` of the second element of `frame`, with `x`
    /// given in the coordinates of the frame.
    #[allow(clippy::too_many_arguments)]
    fn piece(&self, kernel: Kernel, frame: &Frame, x: Point, tx: Point, t0: f64, t1: f64, min: usize, out: &mut [f64], depth: usize) {
        let max = self.cfg.regular_order;
        let (c, r, len) = frame.bounds_second(t0, t1);
        let dist = (x - c).norm() - r;
        let n = match far_order(dist, len, min, max) {
            Some(n) => n,
            None if depth >= MAX_DEPTH => max,
            None => {
                let m = 0.5 * (t0 + t1);
                self.piece(kernel, frame, x, tx, t0, m, min, out, depth + 1);
                self.piece(kernel, frame, x, tx, m, t1, min, out, depth + 1);
                return;
            }
        };
        let nc = self.density.len();
        let mut v = [0.0; MAX_LOCAL];
        for (u, w) in gauss(n).iter() {
            let tau = t0 + (t1 - t0) * u;
            let (y, ty) = frame.second(tau);
            self.density.eval(frame.f, tau, &mut v[..nc]);
            let k = w * (t1 - t0) * kernel_value(kernel, x, tx, y, ty);
            for c in 0..nc {
                out[c] += k * v[c];
            }
        }
    }

    /// Element whose closure contains the point `γ_e(σ)`, split at `σ`:
    /// `τ = σ ± L u`.
    fn own_element(&self, kernel: Kernel, e: usize, sigma: f64, tx: Point, out: &mut [f64]) {
        let nc = self.density.len();
        let g = gauss(self.cfg.regular_order);
        let mut v = [0.0; MAX_LOCAL];
        for (len, dir) in [(1.0 - sigma, 1.0), (sigma, -1.0)] {
            if len <= 0.0 {
                continue;
            }
            let tau = |u: f64| sigma + dir * len * u;
            match kernel {
                Kernel::SingleLayer => {
                    for (u, w) in g.iter() {
                        let t = tau(u);
                        let d = self.mesh.chord(e, sigma, dir * len * u);
                        self.density.eval(e, t, &mut v[..nc]);
                        let k = -INV_2PI * w * len * ((d.norm() / (len * u)).ln() + len.ln());
                        for c in 0..nc {
                            out[c] += k * v[c];
                        }
                    }
                    for (u, w) in log_rule(self.cfg.singular_order).iter() {
                        let t = tau(u);
                        self.density.eval(e, t, &mut v[..nc]);
                        let k = -INV_2PI * w * len;
                        for c in 0..nc {
                            out[c] += k * v[c];
                        }
                    }
                }
                _ => {
                    for (u, w) in g.iter() {
                        let t = tau(u);
                        let d = -self.mesh.chord(e, sigma, dir * len * u);
                        self.density.eval(e, t, &mut v[..nc]);
                        let k = w * len * kernel_diff(kernel, d, tx, self.mesh.tangent(e, t));
                        for c in 0..nc {
                            out[c] += k * v[c];
                        }
                    }
                }
            }
        }
    }

    /// Scalar potential (first component) at many points.
    pub fn eval_many(&self, kernel: Kernel, pts: &[(usize, f64)]) -> Vec<f64> {
        pts.par_iter()
            .map(|&(e, s)| {
                let mut out = [0.0; MAX_LOCAL];
                self.eval(kernel, e, s, &mut out);
                out[0]
            })
            .collect()
    }
}

fn check_points(mesh: &BoundaryMesh, pts: &[(usize, f64)]) -> Result<()> {
    for &(e, s) in pts {
        if e >= mesh.num_elements() {
            return Err(Error::IndexOutOfRange {
                index: e,
                len: mesh.num_elements(),
            });
        }
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::OutOfDomain { t: s, a: 0.0, b: 1.0 });
        }
    }
    Ok(())
}

fn check_not_corner(mesh: &BoundaryMesh, pts: &[(usize, f64)]) -> Result<()> {
    for &(e, s) in pts {
        if s == 0.0 || s == 1.0 {
            let t = mesh.param(e, s);
            if mesh.is_corner(t) {
                return Err(Error::CornerEvaluation(t));
            }
        }
    }
    Ok(())
}

/// Trace point `(e, σ)` of the parameter `t`.
pub fn trace_point(mesh: &BoundaryMesh, t: f64) -> Result<(usize, f64)> {
    mesh.locate(t)
}

/// `[V ψ](γ_e(σ))` for a discrete function `ψ ∈ X★`.
pub fn eval_v_at(mesh: &BoundaryMesh, psi: &DiscreteFunction, pts: &[(usize, f64)], cfg: &QuadConfig) -> Result<Vec<f64>> {
    check_points(mesh, pts)?;
    let d = FnDensity {
        n: 1,
        f: |e: usize, s: f64, out: &mut [f64]| {
            out[0] = psi.value(mesh, e, s) * mesh.tangent(e, s).norm();
        },
    };
    let pot = Potential::new(mesh, &d, psi.space.degree(), cfg);
    Ok(pot.eval_many(Kernel::SingleLayer, pts))
}

/// `[V ψ](γ_e(σ))` for a density given as a function of the boundary point.
pub fn eval_v_data_at(mesh: &BoundaryMesh, psi: &DataFn, pts: &[(usize, f64)], cfg: &QuadConfig) -> Result<Vec<f64>> {
    check_points(mesh, pts)?;
    let d = FnDensity {
        n: 1,
        f: |e: usize, s: f64, out: &mut [f64]| {
            let (y, t) = mesh.point_tangent(e, s);
            let j = t.norm();
            out[0] = psi(y, rot(t) / j) * j;
        },
    };
    let pot = Potential::new(mesh, &d, 2, cfg);
    Ok(pot.eval_many(Kernel::SingleLayer, pts))
}

/// `[K u](γ_e(σ))` for boundary data `u`.
pub fn eval_k_at(mesh: &BoundaryMesh, u: &DataFn, pts: &[(usize, f64)], cfg: &QuadConfig) -> Result<Vec<f64>> {
    check_points(mesh, pts)?;
    let d = FnDensity {
        n: 1,
        f: |e: usize, s: f64, out: &mut [f64]| {
            let (y, t) = mesh.point_tangent(e, s);
            out[0] = u(y, rot(t) / t.norm());
        },
    };
    let pot = Potential::new(mesh, &d, 2, cfg);
    Ok(pot.eval_many(Kernel::DoubleLayer, pts))
}

/// `[K u](γ_e(σ))` for a discrete function `u`.
pub fn eval_k_discrete_at(
    mesh: &BoundaryMesh,
    u: &DiscreteFunction,
    pts: &[(usize, f64)],
    cfg: &QuadConfig,
) -> Result<Vec<f64>> {
    check_points(mesh, pts)?;
    let d = FnDensity {
        n: 1,
        f: |e: usize, s: f64, out: &mut [f64]| out[0] = u.value(mesh, e, s),
    };
    let pot = Potential::new(mesh, &d, u.space.degree(), cfg);
    Ok(pot.eval_many(Kernel::DoubleLayer, pts))
}

/// `[K' ψ](γ_e(σ))` for a piecewise polynomial `ψ`.
pub fn eval_kp_at(mesh: &BoundaryMesh, psi: &PiecewisePoly, pts: &[(usize, f64)], cfg: &QuadConfig) -> Result<Vec<f64>> {
    check_points(mesh, pts)?;
    check_not_corner(mesh, pts)?;
    let d = FnDensity {
        n: 1,
        f: |e: usize, s: f64, out: &mut [f64]| out[0] = psi.value(e, s) * mesh.tangent(e, s).norm(),
    };
    let pot = Potential::new(mesh, &d, psi.degree(), cfg);
    Ok(pot.eval_many(Kernel::AdjointDoubleLayer, pts))
}

/// Derivatives with respect to the local coordinate of the polynomial
/// interpolating `values` at the Chebyshev nodes, evaluated at `targets`.
pub struct ChebyshevDerivative {
    pub nodes: Vec<f64>,
    deriv: DMatrix<f64>,
}

impl ChebyshevDerivative {
    pub fn new(m: usize) -> Result<Self> {
        let nodes = cheby_nodes(m);
        let deriv = lagrange_deriv_matrix(&nodes)?;
        Ok(Self { nodes, deriv })
    }

    /// Matrix mapping node values to derivative values at `targets`.
    pub fn matrix(&self, targets: &[f64]) -> Result<DMatrix<f64>> {
        Ok(lagrange_interp_matrix(&self.nodes, targets)? * &self.deriv)
    }
}

/// `[W u](γ_e(σ)) = -∂_Γ V ∂_Γ u`, with `V ∂_Γ u` replaced on each element
/// by its interpolant at `cfg.interp_points` Chebyshev nodes.
pub fn eval_w_at(mesh: &BoundaryMesh, u: &DiscreteFunction, pts: &[(usize, f64)], cfg: &QuadConfig) -> Result<Vec<f64>> {
    check_points(mesh, pts)?;
    check_not_corner(mesh, pts)?;
    let d = FnDensity {
        n: 1,
        f: |e: usize, s: f64, out: &mut [f64]| out[0] = u.value_deriv(mesh, e, s).1,
    };
    let pot = Potential::new(mesh, &d, u.space.degree(), cfg);
    let cheb = ChebyshevDerivative::new(cfg.interp_points)?;
    let mut by_element: Vec<Vec<usize>> = vec![Vec::new(); mesh.num_elements()];
    for (k, &(e, _)) in pts.iter().enumerate() {
        by_element[e].push(k);
    }
    let elements: Vec<usize> = (0..mesh.num_elements()).filter(|&e| !by_element[e].is_empty()).collect();
    let nodes: Vec<(usize, f64)> = elements
        .iter()
        .flat_map(|&e| cheb.nodes.iter().map(move |&s| (e, s)))
        .collect();
    let vals = pot.eval_many(Kernel::SingleLayer, &nodes);
    let m = cheb.nodes.len();
    let mut out = vec![0.0; pts.len()];
    for (i, &e) in elements.iter().enumerate() {
        let idx = &by_element[e];
        let targets: Vec<f64> = idx.iter().map(|&k| pts[k].1).collect();
        let dm = cheb.matrix(&targets)?;
        let v = nalgebra::DVector::from_column_slice(&vals[i * m..(i + 1) * m]);
        let dv = dm * v;
        for (j, &k) in idx.iter().enumerate() {
            out[k] = -dv[j] / mesh.tangent(e, targets[j]).norm();
        }
    }
    Ok(out)
}
