//! Galerkin systems for the weakly-singular and hyper-singular integral
//! equations.

pub mod data;
pub mod matrices;
pub mod pair;
pub mod projection;
pub mod space;

use nalgebra::{DMatrix, DVector};

pub use data::DataQuadrature;
pub use matrices::{
    adjoint_double_layer_vector, assemble_v, assemble_w, assemble_w_maue, basis_integrals, double_layer_vector,
    load_vector, load_vector_poly, rhs_hyp, rhs_weak,
};
pub use pair::{brute_force_pair, integrate_pair, Density, FnDensity, Kernel, Operand, SampleCache};
pub use projection::{legendre, poly_integral, project_phi, PiecewisePoly};
pub use space::{coeffs_to_refined, initial_knots, Ansatz, AnsatzSpace, DiscreteFunction, SpaceKind};

use crate::error::{Error, Result};
use crate::geometry::{Approach, BoundaryMesh, ModelProblem, NurbsCurve};
use crate::quadrature::QuadConfig;
use crate::splines::uniform_refine;

/// Mesh and ansatz space on the same knot vector.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: BoundaryMesh,
    pub space: AnsatzSpace,
}

impl Discretization {
    pub fn new(curve: &NurbsCurve, space: AnsatzSpace) -> Result<Self> {
        let mesh = BoundaryMesh::new(curve, space.knot_vector())?;
        Ok(Self { mesh, space })
    }

    /// Every element bisected once.
    pub fn uniform_refinement(&self) -> Result<Self> {
        let (kv, _, _) = uniform_refine::<f64>(self.space.knot_vector(), self.space.weights(), None)?;
        let space = self.space.refined(&kv)?;
        Self::new(self.mesh.curve(), space)
    }
}

/// Dense symmetric system `A c = b`.
#[derive(Debug, Clone)]
pub struct GalerkinSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl GalerkinSystem {
    pub fn solve(&self) -> Result<DVector<f64>> {
        solve_spd(&self.matrix, &self.rhs)
    }

    /// `max |A - Aᵀ| / max |A|`.
    pub fn asymmetry(&self) -> f64 {
        asymmetry(&self.matrix)
    }
}

pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let diff = (a - a.transpose()).amax();
    let scale = a.amax();
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Cholesky solve; fails if `a` is not positive definite.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() != b.len() || a.ncols() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.nrows(),
            got: b.len(),
        });
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite right-hand side".into()));
    }
    let ch = a.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(ch.solve(b))
}

/// `sqrt(eᵀ A e)`.
pub fn energy_norm(a: &DMatrix<f64>, e: &[f64]) -> Result<f64> {
    if a.nrows() != e.len() {
        return Err(Error::LengthMismatch {
            expected: a.nrows(),
            got: e.len(),
        });
    }
    let v = DVector::from_column_slice(e);
    let q = v.dot(&(a * &v));
    if q.is_nan() {
        return Err(Error::InvalidData("non-finite energy".into()));
    }
    Ok(q.max(0.0).sqrt())
}

/// Weakly-singular system for `problem` on `disc`.
pub fn weak_system(problem: &ModelProblem, disc: &Discretization, cfg: &QuadConfig) -> Result<GalerkinSystem> {
    problem.validate()?;
    let data = problem
        .dirichlet
        .as_ref()
        .ok_or_else(|| Error::InvalidData("missing Dirichlet data".into()))?;
    let dq = DataQuadrature::for_problem(problem, cfg.regular_order);
    let matrix = assemble_v(&disc.mesh, &disc.space, cfg)?;
    let rhs = rhs_weak(
        &disc.mesh,
        &disc.space,
        data,
        problem.approach == Approach::Direct,
        &dq,
        cfg,
    )?;
    Ok(GalerkinSystem { matrix, rhs })
}

/// Hyper-singular system for `problem` on `disc` together with the
/// projected Neumann datum `Π★φ`.
pub fn hyp_system(
    problem: &ModelProblem,
    disc: &Discretization,
    cfg: &QuadConfig,
) -> Result<(GalerkinSystem, PiecewisePoly)> {
    problem.validate()?;
    let phi = problem
        .neumann
        .as_ref()
        .ok_or_else(|| Error::InvalidData("missing Neumann data".into()))?;
    let dq = DataQuadrature::for_problem(problem, cfg.regular_order);
    let psi = project_phi(&disc.mesh, disc.space.degree(), phi, &dq)?;
    let matrix = assemble_w(&disc.mesh, &disc.space, cfg)?;
    let rhs = rhs_hyp(
        &disc.mesh,
        &disc.space,
        &psi,
        problem.approach == Approach::Direct,
        cfg,
    )?;
    Ok((GalerkinSystem { matrix, rhs }, psi))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::matrices::{BasisDensity, BasisMode};
    use super::*;
    use crate::geometry::{builtin_problem, circle, heart, pacman, slit, DataFn};
    use crate::quadrature::gauss;

    fn disc(curve: &NurbsCurve, kind: SpaceKind, ansatz: Ansatz, p: usize, refinements: usize) -> Discretization {
        let (kv, w) = initial_knots(curve, kind, ansatz, p).unwrap();
        let mut d = Discretization::new(curve, AnsatzSpace::new(kind, kv, w).unwrap()).unwrap();
        for _ in 0..refinements {
            d = d.uniform_refinement().unwrap();
        }
        d
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn circle_single_layer_of_constant() {
        let r = 0.4;
        let c = circle(r);
        let cfg = QuadConfig::default();
        for (p, ansatz) in [(0, Ansatz::PcwPoly), (2, Ansatz::Nurbs)] {
            let d = disc(&c, SpaceKind::Weak, ansatz, p, 2);
            let a = assemble_v(&d.mesh, &d.space, &cfg).unwrap();
            let total = a.sum();
            let exact = -2.0 * PI * r * r * r.ln();
            assert!(rel(total, exact) < 1e-8, "p={p}: {total} vs {exact}");
            assert!(asymmetry(&a) <= 1e-12);
        }
    }

    #[test]
    fn far_pairs_match_brute_force() {
        let c = circle(0.4);
        let cfg = QuadConfig::default();
        let d = disc(&c, SpaceKind::Weak, Ansatz::Nurbs, 2, 2);
        let dens = BasisDensity {
            mesh: &d.mesh,
            space: &d.space,
            mode: BasisMode::Jacobian,
        };
        let cache = SampleCache::new(&d.mesh, &dens, cfg.regular_order);
        let op = Operand::new(&dens, Some(&cache), 2);
        let mut fast = [0.0; 9];
        let mut slow = [0.0; 9];
        for (e, f) in [(0, 2), (0, 5), (1, 9), (3, 12)] {
            integrate_pair(&d.mesh, Kernel::SingleLayer, e, f, &op, &op, &cfg, &mut fast);
            brute_force_pair(&d.mesh, Kernel::SingleLayer, e, f, &dens, &dens, 64, &mut slow);
            for (a, b) in fast.iter().zip(&slow) {
                assert!(rel(*a, *b) < 1e-10, "({e},{f}) {a} {b}");
            }
            integrate_pair(&d.mesh, Kernel::DoubleLayer, e, f, &op, &op, &cfg, &mut fast);
            brute_force_pair(&d.mesh, Kernel::DoubleLayer, e, f, &dens, &dens, 64, &mut slow);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-10 * b.abs().max(1e-3), "({e},{f}) {a} {b}");
            }
        }
    }

    #[test]
    fn singular_pairs_against_subdivided_oracle() {
        // Near-singular quadrature on small pieces away from the diagonal
        // converges to the same value as the Duffy rules.
        let c = pacman();
        let cfg = QuadConfig::default();
        let d = disc(&c, SpaceKind::Weak, Ansatz::Nurbs, 2, 0);
        let dens = BasisDensity {
            mesh: &d.mesh,
            space: &d.space,
            mode: BasisMode::Jacobian,
        };
        let op = Operand::new(&dens, None, 2);
        let mut fast = [0.0; 9];
        let n = d.mesh.num_elements();
        for (e, f) in [(0, 0), (2, 3), (3, 2), (0, n - 1), (3, 3)] {
            integrate_pair(&d.mesh, Kernel::SingleLayer, e, f, &op, &op, &cfg, &mut fast);
            let oracle = graded_oracle(&d, e, f);
            for (a, b) in fast.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-9 * b.abs().max(1e-2), "({e},{f}) {a} {b}");
            }
        }
    }

    /// Composite Gauss on geometrically graded cells with a log-corrected
    /// diagonal: accurate to about 1e-11 for the logarithmic kernel.
    fn graded_oracle(d: &Discretization, e: usize, f: usize) -> [f64; 9] {
        let dens = BasisDensity {
            mesh: &d.mesh,
            space: &d.space,
            mode: BasisMode::Jacobian,
        };
        let mut out = [0.0; 9];
        let g = gauss(20);
        // graded partition of [0,1] towards both ends
        let mut pts = vec![0.0, 1.0];
        for k in 1..40 {
            let t = 0.5f64.powi(k) * 0.5;
            pts.push(t);
            pts.push(1.0 - t);
        }
        pts.push(0.5);
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mesh = &d.mesh;
        let mut a = [0.0; 8];
        let mut b = [0.0; 8];
        let cells: Vec<(f64, f64)> = pts.windows(2).map(|w| (w[0], w[1])).collect();
        if e == f {
            // split the diagonal: integrate over s < t and double by symmetry
            // of the kernel, using the substitution t = s + (1 - s) v with
            // graded v to resolve log|s - t|.
            let mut vcells: Vec<(f64, f64)> = Vec::new();
            let mut hi = 1.0;
            for _ in 0..40 {
                vcells.push((hi * 0.5, hi));
                hi *= 0.5;
            }
            for &(s0, s1) in &cells {
                for (sx, sw) in g.iter() {
                    let s = s0 + (s1 - s0) * sx;
                    let (x, _) = mesh.point_tangent(e, s);
                    dens.eval(e, s, &mut a[..3]);
                    for &(v0, v1) in &vcells {
                        for (vx, vw) in g.iter() {
                            let v = v0 + (v1 - v0) * vx;
                            let w = sw * (s1 - s0) * vw * (v1 - v0);
                            for (t, jac) in [(s + (1.0 - s) * v, 1.0 - s), (s - s * v, s)] {
                                let (y, _) = mesh.point_tangent(f, t);
                                if x == y {
                                    continue;
                                }
                                dens.eval(f, t, &mut b[..3]);
                                let k = -(x - y).norm().ln() / (2.0 * PI);
                                for i in 0..3 {
                                    for j in 0..3 {
                                        out[i * 3 + j] += w * jac * a[i] * b[j] * k;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            return out;
        }
        for &(s0, s1) in &cells {
            for &(t0, t1) in &cells {
                for (sx, sw) in g.iter() {
                    let s = s0 + (s1 - s0) * sx;
                    let (x, _) = mesh.point_tangent(e, s);
                    dens.eval(e, s, &mut a[..3]);
                    for (tx, tw) in g.iter() {
                        let t = t0 + (t1 - t0) * tx;
                        let (y, _) = mesh.point_tangent(f, t);
                        dens.eval(f, t, &mut b[..3]);
                        let k = -(x - y).norm().ln() / (2.0 * PI);
                        let w = sw * tw * (s1 - s0) * (t1 - t0);
                        for i in 0..3 {
                            for j in 0..3 {
                                out[i * 3 + j] += w * a[i] * b[j] * k;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn hyper_singular_kills_constants_on_circle() {
        let c = circle(0.4);
        let cfg = QuadConfig::default();
        let d = disc(&c, SpaceKind::Hyp, Ansatz::Nurbs, 2, 2);
        let a = assemble_w(&d.mesh, &d.space, &cfg).unwrap();
        assert!(asymmetry(&a) <= 1e-12);
        let one = DVector::from_vec(d.space.constant_one().unwrap());
        let m = basis_integrals(&d.mesh, &d.space, 16).unwrap();
        let len = d.mesh.total_length();
        let lhs = &a * &one;
        for (x, y) in lhs.iter().zip(m.iter()) {
            assert!(rel(*x, len * y) < 1e-8, "{x} {}", len * y);
        }
        let maue = assemble_w_maue(&d.mesh, &d.space, &cfg).unwrap();
        assert!((&maue * &one).amax() < 1e-8 * maue.amax());
    }

    #[test]
    fn matrices_positive_definite_on_builtins() {
        let cfg = QuadConfig::default();
        for (curve, p) in [(circle(0.4), 2), (pacman(), 2), (heart(), 2), (slit(1.0), 1)] {
            let d = disc(&curve, SpaceKind::Weak, Ansatz::Nurbs, p, 0);
            let v = assemble_v(&d.mesh, &d.space, &cfg).unwrap();
            assert!(asymmetry(&v) <= 1e-12);
            assert!(v.clone().cholesky().is_some());
            let d = disc(&curve, SpaceKind::Hyp, Ansatz::Nurbs, p, 0);
            let w = assemble_w(&d.mesh, &d.space, &cfg).unwrap();
            assert!(asymmetry(&w) <= 1e-12);
            assert!(w.clone().cholesky().is_some());
        }
    }

    #[test]
    fn direct_rhs_of_constant_vanishes() {
        let c = circle(0.4);
        let cfg = QuadConfig::default();
        for (p, ansatz) in [(0, Ansatz::PcwPoly), (2, Ansatz::Nurbs)] {
            let d = disc(&c, SpaceKind::Weak, ansatz, p, 1);
            let one: DataFn = Arc::new(|_, _| 1.0);
            let b = rhs_weak(&d.mesh, &d.space, &one, true, &DataQuadrature::plain(16), &cfg).unwrap();
            let mass = basis_integrals(&d.mesh, &d.space, 16).unwrap();
            assert!(b.amax() < 1e-8 * mass.norm(), "{}", b.amax());
            let b = rhs_weak(&d.mesh, &d.space, &one, false, &DataQuadrature::plain(16), &cfg).unwrap();
            assert!((b - mass).amax() < 1e-15);
        }
        // also on a geometry with corners
        let h = heart();
        let d = disc(&h, SpaceKind::Weak, Ansatz::Nurbs, 2, 1);
        let one: DataFn = Arc::new(|_, _| 1.0);
        let b = rhs_weak(&d.mesh, &d.space, &one, true, &DataQuadrature::plain(16), &cfg).unwrap();
        let mass = basis_integrals(&d.mesh, &d.space, 16).unwrap();
        assert!(b.amax() < 1e-8 * mass.norm(), "{}", b.amax());
    }

    #[test]
    fn slit_rhs_matches_brute_force() {
        let p = builtin_problem("slit").unwrap();
        let cfg = QuadConfig::default();
        let d = disc(&p.curve, SpaceKind::Weak, Ansatz::Spline, 1, 1);
        let f = p.dirichlet.clone().unwrap();
        let b = rhs_weak(&d.mesh, &d.space, &f, false, &DataQuadrature::for_problem(&p, 16), &cfg).unwrap();
        let b64 = load_vector(&d.mesh, &d.space, &f, &DataQuadrature::plain(64)).unwrap();
        for (x, y) in b.iter().zip(b64.iter()) {
            assert!((x - y).abs() <= 1e-10 * b64.amax(), "{x} {y}");
        }
    }

    #[test]
    fn adjoint_vector_matches_double_layer_of_basis() {
        let h = heart();
        let cfg = QuadConfig::default();
        let d = disc(&h, SpaceKind::Hyp, Ansatz::Nurbs, 2, 1);
        let n = d.mesh.num_elements();
        let psi = PiecewisePoly::new(2, (0..3 * n).map(|k| ((k * 3 % 5) as f64) * 0.3 - 0.5).collect()).unwrap();
        let kp = adjoint_double_layer_vector(&d.mesh, &d.space, &psi, &cfg).unwrap();
        // ⟨ψ, K R_i⟩ element pair by element pair
        let test = super::projection::PolyDensity {
            mesh: &d.mesh,
            poly: &psi,
            jacobian: true,
        };
        let trial = BasisDensity {
            mesh: &d.mesh,
            space: &d.space,
            mode: BasisMode::Value,
        };
        let a = Operand::new(&test, None, 2);
        let b = Operand::new(&trial, None, 2);
        let mut other = DVector::<f64>::zeros(d.space.dim());
        let mut buf = [0.0; 3];
        for e in 0..n {
            for f in 0..n {
                integrate_pair(&d.mesh, Kernel::DoubleLayer, e, f, &a, &b, &cfg, &mut buf);
                let dofs = d.space.local_dofs(&d.mesh, f);
                for r in 0..3 {
                    if let Some(i) = dofs[r] {
                        other[i] += buf[r];
                    }
                }
            }
        }
        assert!((&kp - &other).amax() < 1e-8 * other.amax(), "{}", (&kp - &other).amax());
    }

    #[test]
    fn solve_identity_and_random_spd() {
        let a = DMatrix::<f64>::identity(5, 5);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(solve_spd(&a, &b).unwrap(), b);
        let n = 50;
        let m = DMatrix::from_fn(n, n, |i, j| (((i * 31 + j * 17) % 13) as f64 - 6.0) / 7.0);
        let a = &m * m.transpose() + DMatrix::identity(n, n);
        let b = DVector::from_fn(n, |i, _| (i as f64).sin());
        let x = solve_spd(&a, &b).unwrap();
        let y = a.clone().try_inverse().unwrap() * &b;
        assert!((&x - &y).norm() < 1e-10 * y.norm());
        assert!((&a * &x - &b).norm() < 1e-10 * b.norm());
        let bad = -DMatrix::<f64>::identity(3, 3);
        assert_eq!(solve_spd(&bad, &DVector::zeros(3)), Err(Error::NotPositiveDefinite));
    }

    #[test]
    fn circle_recovers_constant_density() {
        let r = 0.4;
        let c = circle(r);
        let cfg = QuadConfig::default();
        let d = disc(&c, SpaceKind::Weak, Ansatz::PcwPoly, 0, 1);
        let one: DataFn = Arc::new(|_, _| 1.0);
        let b = rhs_weak(&d.mesh, &d.space, &one, false, &DataQuadrature::plain(16), &cfg).unwrap();
        let sys = GalerkinSystem {
            matrix: assemble_v(&d.mesh, &d.space, &cfg).unwrap(),
            rhs: b,
        };
        let x = sys.solve().unwrap();
        let exact = -1.0 / (r * r.ln());
        for v in x.iter() {
            assert!(rel(*v, exact) < 1e-8, "{v} {exact}");
        }
    }

    #[test]
    fn galerkin_orthogonality_and_energy() {
        let p = builtin_problem("circle").unwrap();
        let cfg = QuadConfig::default();
        let coarse = disc(&p.curve, SpaceKind::Weak, Ansatz::Nurbs, 2, 0);
        let fine = coarse.uniform_refinement().unwrap();
        let sc = weak_system(&p, &coarse, &cfg).unwrap();
        let sf = weak_system(&p, &fine, &cfg).unwrap();
        let xc = sc.solve().unwrap();
        let xf = sf.solve().unwrap();
        let fc = DiscreteFunction::new(coarse.space.clone(), xc.as_slice().to_vec()).unwrap();
        let moved = fc.to_refined(&fine.space).unwrap();
        let c_hat = DVector::from_vec(moved.coeffs.clone());
        let e = &xf - &c_hat;
        let ip = (&sf.matrix * &e).dot(&c_hat);
        let scale = energy_norm(&sf.matrix, c_hat.as_slice()).unwrap().powi(2);
        assert!(ip.abs() <= 1e-8 * scale, "{ip} {scale}");
        assert_eq!(energy_norm(&sf.matrix, &vec![0.0; xf.len()]).unwrap(), 0.0);
        assert!(energy_norm(&sf.matrix, e.as_slice()).unwrap() > 0.0);
        // Galerkin solution converges to the exact Neumann datum
        let exact = p.exact.clone().unwrap();
        let mut err: f64 = 0.0;
        for el in 0..fine.mesh.num_elements() {
            for s in [0.1, 0.5, 0.9] {
                let (x, t) = fine.mesh.point_tangent(el, s);
                let n = crate::geometry::rot(t).normalize();
                let v = DiscreteFunction::new(fine.space.clone(), xf.as_slice().to_vec())
                    .unwrap()
                    .value(&fine.mesh, el, s);
                err = err.max((v - exact(x, n)).abs());
            }
        }
        assert!(err < 2e-2, "{err}");
    }

    #[test]
    fn hyp_system_heart_solves() {
        let p = builtin_problem("heart").unwrap();
        let cfg = QuadConfig::default();
        let d = disc(&p.curve, SpaceKind::Hyp, Ansatz::Nurbs, 2, 1);
        let (sys, psi) = hyp_system(&p, &d, &cfg).unwrap();
        assert!(poly_integral(&d.mesh, &psi, 16).abs() < 1e-10);
        let x = sys.solve().unwrap();
        assert!(x.iter().all(|v| v.is_finite()));
    }
}
