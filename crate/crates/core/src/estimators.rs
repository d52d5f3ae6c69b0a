//! Node-based a-posteriori error indicators.
//!
//! Every indicator `η(x)` lives on a mesh node `x` and measures the error on
//! the node patch `ω(x)`, the union of the (one or two) elements containing
//! `x`. The weight `h` is the arclength of the element.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{DataQuadrature, DiscreteFunction, PiecewisePoly};
use crate::error::{Error, Result};
use crate::evaluation::{eval_k_at, eval_kp_at, eval_v_at, eval_w_at, ChebyshevDerivative};
use crate::geometry::{rot, Approach, BoundaryMesh, DataFn, ModelProblem};
use crate::quadrature::{cheby_nodes, gauss, lagrange_interp_matrix, QuadConfig};
use crate::splines::uniform_refine;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorKind {
    Hh2Weak,
    FaermannWeak,
    ResidualWeak,
    Hh2Hyp,
    ResidualHyp,
    Oscillation,
    Combined,
}

/// Nonnegative per-node values aligned with the mesh nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorField {
    pub kind: IndicatorKind,
    node_params: Vec<f64>,
    values: Vec<f64>,
}

impl IndicatorField {
    pub fn new(kind: IndicatorKind, mesh: &BoundaryMesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(Error::LengthMismatch {
                expected: mesh.num_nodes(),
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidData(format!("indicator value {v}")));
        }
        let node_params = (0..mesh.num_nodes()).map(|i| mesh.node_param(i)).collect();
        Ok(Self {
            kind,
            node_params,
            values,
        })
    }

    /// Field from squared node values.
    pub fn from_squares(kind: IndicatorKind, mesh: &BoundaryMesh, squares: Vec<f64>) -> Result<Self> {
        Self::new(kind, mesh, squares.into_iter().map(|s| if s < 0.0 { 0.0 } else { s.sqrt() }).collect())
    }

    /// Field from squared element contributions, each counted on both end
    /// nodes of its element.
    pub fn from_element_squares(kind: IndicatorKind, mesh: &BoundaryMesh, per_element: &[f64]) -> Result<Self> {
        Self::from_squares(kind, mesh, mesh.patch_sum(per_element))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node_params(&self) -> &[f64] {
        &self.node_params
    }

    pub fn total_squared(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn total(&self) -> f64 {
        self.total_squared().sqrt()
    }

    /// `(node parameter, value)` pairs.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.node_params.iter().copied().zip(self.values.iter().copied())
    }
}

/// Nodewise `(η² + osc²)^{1/2}`.
pub fn combine_hyp(eta: &IndicatorField, osc: &IndicatorField) -> Result<IndicatorField> {
    if eta.len() != osc.len() || eta.node_params != osc.node_params {
        return Err(Error::LengthMismatch {
            expected: eta.len(),
            got: osc.len(),
        });
    }
    Ok(IndicatorField {
        kind: IndicatorKind::Combined,
        node_params: eta.node_params.clone(),
        values: eta.values.iter().zip(&osc.values).map(|(a, b)| a.hypot(*b)).collect(),
    })
}

fn check_uniform_refinement(coarse: &DiscreteFunction, fine: &DiscreteFunction) -> Result<()> {
    let (kv, _, _) = uniform_refine::<f64>(coarse.space.knot_vector(), coarse.space.weights(), None)?;
    if &kv != fine.space.knot_vector() || coarse.space.kind() != fine.space.kind() {
        return Err(Error::NotARefinement("fine space is not the uniform refinement".into()));
    }
    Ok(())
}

/// Squared element contributions `h_Q ∫_Q g²` of the difference `fine - coarse`
/// where `g` is the value (`deriv = false`) or the arclength derivative.
fn hh2_elements(
    coarse_mesh: &BoundaryMesh,
    coarse: &DiscreteFunction,
    fine_mesh: &BoundaryMesh,
    fine: &DiscreteFunction,
    deriv: bool,
    order: usize,
) -> Result<Vec<f64>> {
    check_uniform_refinement(coarse, fine)?;
    if fine_mesh.num_elements() != 2 * coarse_mesh.num_elements() {
        return Err(Error::InvalidMesh("fine mesh does not bisect every element".into()));
    }
    let moved = coarse.to_refined(&fine.space)?;
    let diff: Vec<f64> = fine.coeffs.iter().zip(&moved.coeffs).map(|(a, b)| a - b).collect();
    let d = DiscreteFunction::new(fine.space.clone(), diff)?;
    let g = gauss(order);
    let fine_sq: Vec<f64> = (0..fine_mesh.num_elements())
        .into_par_iter()
        .map(|j| {
            g.iter()
                .map(|(s, w)| {
                    let (v, dv) = d.value_deriv(fine_mesh, j, s);
                    let jac = fine_mesh.tangent(j, s).norm();
                    let x = if deriv { dv / jac } else { v };
                    w * x * x * jac
                })
                .sum::<f64>()
        })
        .collect();
    Ok((0..coarse_mesh.num_elements())
        .map(|e| coarse_mesh.arclength(e) * (fine_sq[2 * e] + fine_sq[2 * e + 1]))
        .collect())
}

/// `‖h^{1/2}(Φ₊ - Φ)‖_{L²(ω(x))}` with `Φ₊` on the uniform refinement.
pub fn est_hh2_weak(
    coarse_mesh: &BoundaryMesh,
    coarse: &DiscreteFunction,
    fine_mesh: &BoundaryMesh,
    fine: &DiscreteFunction,
    cfg: &QuadConfig,
) -> Result<IndicatorField> {
    let el = hh2_elements(coarse_mesh, coarse, fine_mesh, fine, false, cfg.regular_order)?;
    IndicatorField::from_element_squares(IndicatorKind::Hh2Weak, coarse_mesh, &el)
}

/// `‖h^{1/2}∂_Γ(U₊ - U)‖_{L²(ω(x))}` with `U₊` on the uniform refinement.
pub fn est_hh2_hyp(
    coarse_mesh: &BoundaryMesh,
    coarse: &DiscreteFunction,
    fine_mesh: &BoundaryMesh,
    fine: &DiscreteFunction,
    cfg: &QuadConfig,
) -> Result<IndicatorField> {
    let el = hh2_elements(coarse_mesh, coarse, fine_mesh, fine, true, cfg.regular_order)?;
    IndicatorField::from_element_squares(IndicatorKind::Hh2Hyp, coarse_mesh, &el)
}

/// Residual `f - VΦ` of the weakly-singular equation at trace points.
pub fn weak_residual_at(
    problem: &ModelProblem,
    mesh: &BoundaryMesh,
    phi: &DiscreteFunction,
    pts: &[(usize, f64)],
    cfg: &QuadConfig,
) -> Result<Vec<f64>> {
    let u = problem
        .dirichlet
        .as_ref()
        .ok_or_else(|| Error::InvalidData("missing Dirichlet data".into()))?;
    let vphi = eval_v_at(mesh, phi, pts, cfg)?;
    let data: Vec<f64> = pts
        .iter()
        .map(|&(e, s)| {
            let (x, t) = mesh.point_tangent(e, s);
            u(x, rot(t) / t.norm())
        })
        .collect();
    let f = match problem.approach {
        Approach::Indirect => data,
        Approach::Direct => {
            let ku = eval_k_at(mesh, u, pts, cfg)?;
            data.iter().zip(&ku).map(|(a, b)| 0.5 * a + b).collect()
        }
    };
    Ok(f.iter().zip(&vphi).map(|(a, b)| a - b).collect())
}

/// Residual values at the Chebyshev nodes of every element, element-major.
fn residual_samples(
    problem: &ModelProblem,
    mesh: &BoundaryMesh,
    phi: &DiscreteFunction,
    cfg: &QuadConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let nodes = cheby_nodes(cfg.interp_points);
    let pts: Vec<(usize, f64)> = (0..mesh.num_elements())
        .flat_map(|e| nodes.iter().map(move |&s| (e, s)))
        .collect();
    Ok((nodes, weak_residual_at(problem, mesh, phi, &pts, cfg)?))
}

/// Element contributions `h_Q ∫_Q |∂_Γ r|²` for a residual given by its values
/// at the Chebyshev nodes of each element.
pub fn residual_derivative_squares(mesh: &BoundaryMesh, samples: &[f64], interp_points: usize, order: usize) -> Result<Vec<f64>> {
    let m = interp_points;
    if samples.len() != m * mesh.num_elements() {
        return Err(Error::LengthMismatch {
            expected: m * mesh.num_elements(),
            got: samples.len(),
        });
    }
    let g = gauss(order);
    let targets: Vec<f64> = g.iter().map(|(s, _)| s).collect();
    let dm = ChebyshevDerivative::new(m)?.matrix(&targets)?;
    Ok((0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let dv = &dm * DVector::from_column_slice(&samples[e * m..(e + 1) * m]);
            let integral: f64 = g
                .iter()
                .zip(dv.iter())
                .map(|((s, w), d)| {
                    let jac = mesh.tangent(e, s).norm();
                    w * d * d / jac
                })
                .sum();
            mesh.arclength(e) * integral
        })
        .collect())
}

/// `‖h^{1/2}∂_Γ(f - VΦ)‖_{L²(ω(x))}` with the residual interpolated on every
/// element.
pub fn est_res_weak(
    problem: &ModelProblem,
    mesh: &BoundaryMesh,
    phi: &DiscreteFunction,
    cfg: &QuadConfig,
) -> Result<IndicatorField> {
    let (_, samples) = residual_samples(problem, mesh, phi, cfg)?;
    let el = residual_derivative_squares(mesh, &samples, cfg.interp_points, cfg.regular_order)?;
    IndicatorField::from_element_squares(IndicatorKind::ResidualWeak, mesh, &el)
}

/// Fixed local point sets and interpolation matrices for the Faermann
/// double integrals.
struct FaermannRule {
    /// `(a, b, weight)` on `[0, 1]²` for the element seminorm, `a < b`.
    self_pts: Vec<(f64, f64, f64)>,
    self_a: DMatrix<f64>,
    self_b: DMatrix<f64>,
    /// `(1 - s, t, weight)`: local coordinates on the left and right element.
    cross_pts: Vec<(f64, f64, f64)>,
    cross_l: DMatrix<f64>,
    cross_r: DMatrix<f64>,
}

impl FaermannRule {
    fn new(nodes: &[f64], order: usize) -> Result<Self> {
        let g = gauss(order);
        let mut self_pts = Vec::new();
        let mut cross_pts = Vec::new();
        for (d, wd) in g.iter() {
            for (w, ww) in g.iter() {
                let a = w * (1.0 - d);
                self_pts.push((a, a + d, 2.0 * wd * ww * (1.0 - d)));
            }
        }
        for (u, wu) in g.iter() {
            for (v, wv) in g.iter() {
                let weight = wu * wv * u;
                cross_pts.push((1.0 - u, u * v, weight));
                cross_pts.push((1.0 - u * v, u, weight));
            }
        }
        let col = |pts: &[(f64, f64, f64)], k: usize| -> Vec<f64> {
            pts.iter().map(|p| if k == 0 { p.0 } else { p.1 }).collect()
        };
        Ok(Self {
            self_a: lagrange_interp_matrix(nodes, &col(&self_pts, 0))?,
            self_b: lagrange_interp_matrix(nodes, &col(&self_pts, 1))?,
            cross_l: lagrange_interp_matrix(nodes, &col(&cross_pts, 0))?,
            cross_r: lagrange_interp_matrix(nodes, &col(&cross_pts, 1))?,
            self_pts,
            cross_pts,
        })
    }
}

fn quotient_sum(
    mesh: &BoundaryMesh,
    (e, f): (usize, usize),
    pts: &[(f64, f64, f64)],
    re: &DVector<f64>,
    rf: &DVector<f64>,
) -> f64 {
    pts.iter()
        .enumerate()
        .map(|(k, &(a, b, w))| {
            let (ty, tz) = (mesh.tangent(e, a), mesh.tangent(f, b));
            // same element, or `e` ends where `f` starts
            let d = if e == f {
                mesh.chord(e, a, b - a)
            } else {
                mesh.chord(e, a, 1.0 - a) + mesh.chord(f, 0.0, b)
            };
            let dr = re[k] - rf[k];
            w * dr * dr / d.norm_squared() * ty.norm() * tz.norm()
        })
        .sum()
}

/// Squared Faermann indicators `|r|²_{H^{1/2}(ω(x))}` for a residual given by
/// its values at the Chebyshev nodes of every element.
pub fn faermann_from_samples(mesh: &BoundaryMesh, samples: &[f64], interp_points: usize, order: usize) -> Result<Vec<f64>> {
    let m = interp_points;
    let ne = mesh.num_elements();
    if samples.len() != m * ne {
        return Err(Error::LengthMismatch {
            expected: m * ne,
            got: samples.len(),
        });
    }
    let rule = FaermannRule::new(&cheby_nodes(m), order)?;
    let local = |e: usize| DVector::from_column_slice(&samples[e * m..(e + 1) * m]);
    let selfs: Vec<f64> = (0..ne)
        .into_par_iter()
        .map(|e| {
            let r = local(e);
            quotient_sum(mesh, (e, e), &rule.self_pts, &(&rule.self_a * &r), &(&rule.self_b * &r))
        })
        .collect();
    Ok((0..mesh.num_nodes())
        .into_par_iter()
        .map(|i| match mesh.node_patch(i) {
            (Some(l), Some(r)) if l != r => {
                let rl = &rule.cross_l * local(l);
                let rr = &rule.cross_r * local(r);
                selfs[l] + selfs[r] + 2.0 * quotient_sum(mesh, (l, r), &rule.cross_pts, &rl, &rr)
            }
            (Some(l), _) => selfs[l],
            (None, Some(r)) => selfs[r],
            (None, None) => 0.0,
        })
        .collect())
}

/// `|f - VΦ|_{H^{1/2}(ω(x))}`.
pub fn est_faermann(
    problem: &ModelProblem,
    mesh: &BoundaryMesh,
    phi: &DiscreteFunction,
    cfg: &QuadConfig,
) -> Result<IndicatorField> {
    let (_, samples) = residual_samples(problem, mesh, phi, cfg)?;
    let sq = faermann_from_samples(mesh, &samples, cfg.interp_points, cfg.singular_order)?;
    IndicatorField::from_squares(IndicatorKind::FaermannWeak, mesh, sq)
}

/// Right-hand side `g` of the hyper-singular equation at trace points:
/// `ψ` (indirect) or `ψ/2 - K'ψ` (direct).
pub fn hyp_data_at(
    mesh: &BoundaryMesh,
    psi: &PiecewisePoly,
    approach: Approach,
    pts: &[(usize, f64)],
    cfg: &QuadConfig,
) -> Result<Vec<f64>> {
    let vals: Vec<f64> = pts.iter().map(|&(e, s)| psi.value(e, s)).collect();
    match approach {
        Approach::Indirect => Ok(vals),
        Approach::Direct => {
            let kp = eval_kp_at(mesh, psi, pts, cfg)?;
            Ok(vals.iter().zip(&kp).map(|(a, b)| 0.5 * a - b).collect())
        }
    }
}

/// `‖h^{1/2}(g - WU)‖_{L²(ω(x))}` with `g` from [`hyp_data_at`].
pub fn est_res_hyp(
    mesh: &BoundaryMesh,
    u: &DiscreteFunction,
    psi: &PiecewisePoly,
    approach: Approach,
    cfg: &QuadConfig,
) -> Result<IndicatorField> {
    let g = gauss(cfg.regular_order);
    let pts: Vec<(usize, f64)> = (0..mesh.num_elements())
        .flat_map(|e| g.iter().map(move |(s, _)| (e, s)))
        .collect();
    let data = hyp_data_at(mesh, psi, approach, &pts, cfg)?;
    let wu = eval_w_at(mesh, u, &pts, cfg)?;
    let n = g.len();
    let el: Vec<f64> = (0..mesh.num_elements())
        .map(|e| {
            let integral: f64 = g
                .iter()
                .enumerate()
                .map(|(k, (s, w))| {
                    let r = data[e * n + k] - wu[e * n + k];
                    w * r * r * mesh.tangent(e, s).norm()
                })
                .sum();
            mesh.arclength(e) * integral
        })
        .collect();
    IndicatorField::from_element_squares(IndicatorKind::ResidualHyp, mesh, &el)
}

/// `‖h^{1/2}(φ - Πφ)‖_{L²(ω(x))}`.
pub fn oscillations(mesh: &BoundaryMesh, phi: &DataFn, psi: &PiecewisePoly, dq: &DataQuadrature) -> Result<IndicatorField> {
    if psi.num_elements() != mesh.num_elements() {
        return Err(Error::LengthMismatch {
            expected: mesh.num_elements(),
            got: psi.num_elements(),
        });
    }
    let el: Vec<f64> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let integral: f64 = dq
                .rule(mesh, e)
                .into_iter()
                .map(|(s, w)| {
                    let (x, t) = mesh.point_tangent(e, s);
                    let jac = t.norm();
                    let d = phi(x, rot(t) / jac) - psi.value(e, s);
                    w * d * d * jac
                })
                .sum();
            mesh.arclength(e) * integral
        })
        .collect();
    IndicatorField::from_element_squares(IndicatorKind::Oscillation, mesh, &el)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::assembly::{
        initial_knots, project_phi, weak_system, Ansatz, AnsatzSpace, Discretization, SpaceKind,
    };
    use crate::geometry::{builtin_problem, circle, slit, NurbsCurve};
    use crate::quadrature::gauss_legendre;

    fn disc(curve: &NurbsCurve, kind: SpaceKind, ansatz: Ansatz, p: usize, refinements: usize) -> Discretization {
        let (kv, w) = initial_knots(curve, kind, ansatz, p).unwrap();
        let mut d = Discretization::new(curve, AnsatzSpace::new(kind, kv, w).unwrap()).unwrap();
        for _ in 0..refinements {
            d = d.uniform_refinement().unwrap();
        }
        d
    }

    fn samples_of(mesh: &BoundaryMesh, m: usize, r: impl Fn(usize, f64) -> f64) -> Vec<f64> {
        let nodes = cheby_nodes(m);
        (0..mesh.num_elements())
            .flat_map(|e| nodes.iter().map(|&s| r(e, s)).collect::<Vec<_>>())
            .collect()
    }

    #[test]
    fn field_totals_and_combination() {
        let d = disc(&circle(0.4), SpaceKind::Weak, Ansatz::Nurbs, 2, 0);
        let n = d.mesh.num_nodes();
        let a = IndicatorField::new(IndicatorKind::Hh2Hyp, &d.mesh, (0..n).map(|i| 3.0 * i as f64).collect()).unwrap();
        let b = IndicatorField::new(IndicatorKind::Oscillation, &d.mesh, (0..n).map(|i| 4.0 * i as f64).collect()).unwrap();
        let c = combine_hyp(&a, &b).unwrap();
        for (i, v) in c.values().iter().enumerate() {
            assert!((v - 5.0 * i as f64).abs() < 1e-13);
        }
        assert_eq!(combine_hyp(&b, &a).unwrap().values(), c.values());
        let z = IndicatorField::new(IndicatorKind::Oscillation, &d.mesh, vec![0.0; n]).unwrap();
        assert_eq!(combine_hyp(&a, &z).unwrap().values(), a.values());
        let sum: f64 = a.values().iter().map(|v| v * v).sum();
        assert!((a.total_squared() - sum).abs() <= 1e-14 * sum);
        assert!(IndicatorField::new(IndicatorKind::Oscillation, &d.mesh, vec![-1.0; n]).is_err());
        assert!(IndicatorField::new(IndicatorKind::Oscillation, &d.mesh, vec![1.0; n + 1]).is_err());
    }

    #[test]
    fn hh2_of_transported_function_vanishes() {
        let d = disc(&circle(0.4), SpaceKind::Weak, Ansatz::Nurbs, 2, 1);
        let f = d.uniform_refinement().unwrap();
        let coarse = DiscreteFunction::new(d.space.clone(), (0..d.space.dim()).map(|i| (i as f64).sin()).collect()).unwrap();
        let fine = coarse.to_refined(&f.space).unwrap();
        let cfg = QuadConfig::default();
        let eta = est_hh2_weak(&d.mesh, &coarse, &f.mesh, &fine, &cfg).unwrap();
        assert!(eta.total() < 1e-13);
        // the coarse space itself is not an admissible fine space
        assert!(est_hh2_weak(&d.mesh, &coarse, &d.mesh, &coarse, &cfg).is_err());
    }

    #[test]
    fn hh2_slit_hand_case() {
        // straight slit of length 2: four elements of arclength 1/2, p = 0
        let c = slit(1.0);
        let d = disc(&c, SpaceKind::Weak, Ansatz::PcwPoly, 0, 0);
        assert_eq!(d.mesh.num_elements(), 4);
        let f = d.uniform_refinement().unwrap();
        let coarse = DiscreteFunction::zero(d.space.clone());
        let fine = DiscreteFunction::new(f.space.clone(), (1..=8).map(|k| k as f64).collect()).unwrap();
        let cfg = QuadConfig::default();
        let eta = est_hh2_weak(&d.mesh, &coarse, &f.mesh, &fine, &cfg).unwrap();
        // element k: h = 1/2, ∫ diff² = (a² + b²) / 4
        let el: Vec<f64> = (0..4)
            .map(|k| {
                let (a, b) = ((2 * k + 1) as f64, (2 * k + 2) as f64);
                0.125 * (a * a + b * b)
            })
            .collect();
        let expect = [el[0], el[0] + el[1], el[1] + el[2], el[2] + el[3], el[3]];
        for (v, x) in eta.values().iter().zip(expect) {
            assert!((v * v - x).abs() < 1e-12, "{v} {x}");
        }
        // interior elements count once per adjacent node
        let s: f64 = eta.total_squared();
        assert!((s - 2.0 * el.iter().sum::<f64>()).abs() < 1e-12);
        // scaling the difference scales the indicators
        let small = DiscreteFunction::new(f.space.clone(), fine.coeffs.iter().map(|c| c * 1e-6).collect()).unwrap();
        let eta2 = est_hh2_weak(&d.mesh, &coarse, &f.mesh, &small, &cfg).unwrap();
        assert!((eta2.total() - 1e-6 * eta.total()).abs() < 1e-18);
    }

    #[test]
    fn hh2_hyp_hand_case() {
        // p = 1 hats on the straight slit, U₊ - U = hat at the midpoint of element 0
        let c = slit(1.0);
        let d = disc(&c, SpaceKind::Hyp, Ansatz::PcwPoly, 1, 0);
        let f = d.uniform_refinement().unwrap();
        let coarse = DiscreteFunction::zero(d.space.clone());
        let mut coeffs = vec![0.0; f.space.dim()];
        coeffs[0] = 1.0;
        let fine = DiscreteFunction::new(f.space.clone(), coeffs).unwrap();
        let eta = est_hh2_hyp(&d.mesh, &coarse, &f.mesh, &fine, &QuadConfig::default()).unwrap();
        // fine element length 1/4, slope ±4: ∫ |∂u|² = 8; h = 1/2
        let v = eta.values();
        assert!((v[0] * v[0] - 4.0).abs() < 1e-12 && (v[1] * v[1] - 4.0).abs() < 1e-12, "{v:?}");
        assert!(v[2..].iter().all(|x| *x == 0.0));
    }

    #[test]
    fn residual_derivative_of_square() {
        // straight slit (|γ'| = 2 per unit parameter), residual t²
        let c = slit(1.0);
        let d = disc(&c, SpaceKind::Weak, Ansatz::PcwPoly, 0, 0);
        let mesh = &d.mesh;
        let m = 8;
        let samples = samples_of(mesh, m, |e, s| {
            let t = mesh.param(e, s);
            t * t
        });
        let el = residual_derivative_squares(mesh, &samples, m, 16).unwrap();
        // ∂_Γ r = 2t / 2 = t, ds = 2 dt, h = 1/2: Σ = 1/2 · ∫_0^1 t² · 2 dt = 1/3
        let total: f64 = el.iter().sum();
        assert!((total - 1.0 / 3.0).abs() < 1e-12, "{total}");
        // first element: 1/2 · ∫_0^{1/4} 2t² dt
        assert!((el[0] - 1.0 / 192.0).abs() < 1e-14);
        let samples2: Vec<f64> = samples.iter().map(|v| 2.0 * v).collect();
        let el2 = residual_derivative_squares(mesh, &samples2, m, 16).unwrap();
        assert!((el2[3] - 4.0 * el[3]).abs() < 1e-12);
        let flat = vec![3.0; samples.len()];
        assert!(residual_derivative_squares(mesh, &flat, m, 16).unwrap()[0].abs() < 1e-20);
    }

    /// `∫∫ |r(y) - r(z)|² / |y - z|²` over two elements on a graded composite
    /// tensor rule; for `e == f` two different Gauss orders avoid the diagonal.
    fn brute_force_quotient(mesh: &BoundaryMesh, e: usize, f: usize, r: &dyn Fn(usize, f64) -> f64) -> f64 {
        let cells = |graded_at: Option<f64>| -> Vec<(f64, f64)> {
            match graded_at {
                None => vec![(0.0, 1.0)],
                Some(x) => (0..40)
                    .map(|k| {
                        let (lo, hi) = (0.5f64.powi(k + 1), 0.5f64.powi(k));
                        if x == 0.0 { (lo, hi) } else { (1.0 - hi, 1.0 - lo) }
                    })
                    .chain(std::iter::once(if x == 0.0 { (0.0, 0.5f64.powi(40)) } else { (1.0 - 0.5f64.powi(40), 1.0) }))
                    .collect(),
            }
        };
        let (ga, gb, ca, cb) = if e == f {
            (gauss_legendre(64).unwrap(), gauss_legendre(63).unwrap(), cells(None), cells(None))
        } else {
            (gauss_legendre(16).unwrap(), gauss_legendre(16).unwrap(), cells(Some(1.0)), cells(Some(0.0)))
        };
        let mut sum = 0.0;
        for &(a0, a1) in &ca {
            for &(b0, b1) in &cb {
                for (u, wu) in ga.iter() {
                    let a = a0 + (a1 - a0) * u;
                    let (y, ty) = mesh.point_tangent(e, a);
                    for (v, wv) in gb.iter() {
                        let b = b0 + (b1 - b0) * v;
                        let (z, tz) = mesh.point_tangent(f, b);
                        let dr = r(e, a) - r(f, b);
                        sum += wu * wv * (a1 - a0) * (b1 - b0) * dr * dr / (y - z).norm_squared() * ty.norm() * tz.norm();
                    }
                }
            }
        }
        sum
    }

    #[test]
    fn faermann_patch_matches_brute_force() {
        let d = disc(&circle(0.4), SpaceKind::Weak, Ansatz::Nurbs, 2, 1);
        let mesh = &d.mesh;
        let m = 8;
        // a continuous residual, polynomial in the parameter on each element
        let r = |e: usize, s: f64| {
            let t = mesh.param(e, s);
            (t - 0.3).powi(3) + 0.5 * t * t - (0.2 - t).powi(6)
        };
        let samples = samples_of(mesh, m, r);
        let sq = faermann_from_samples(mesh, &samples, m, 16).unwrap();
        for i in [0, 3] {
            let (l, rr) = mesh.node_patch(i);
            let (l, rr) = (l.unwrap(), rr.unwrap());
            let expect = brute_force_quotient(mesh, l, l, &r)
                + brute_force_quotient(mesh, rr, rr, &r)
                + 2.0 * brute_force_quotient(mesh, l, rr, &r);
            assert!(((sq[i] - expect) / expect).abs() < 1e-4, "node {i}: {} vs {expect}", sq[i]);
        }
        // constants are annihilated, scaling is quadratic
        let zero = faermann_from_samples(mesh, &vec![2.5; samples.len()], m, 16).unwrap();
        assert!(zero.iter().all(|v| v.abs() < 1e-25));
        let doubled: Vec<f64> = samples.iter().map(|v| 2.0 * v).collect();
        let sq2 = faermann_from_samples(mesh, &doubled, m, 16).unwrap();
        for (a, b) in sq.iter().zip(&sq2) {
            assert!((b - 4.0 * a).abs() <= 1e-12 * b.abs());
        }
    }

    #[test]
    fn faermann_open_endpoint_patch() {
        let d = disc(&slit(1.0), SpaceKind::Weak, Ansatz::PcwPoly, 0, 2);
        let mesh = &d.mesh;
        let r = |e: usize, s: f64| mesh.param(e, s).powi(2);
        let sq = faermann_from_samples(mesh, &samples_of(mesh, 8, r), 8, 16).unwrap();
        let expect = brute_force_quotient(mesh, 0, 0, &r);
        assert!(((sq[0] - expect) / expect).abs() < 1e-6);
        assert_eq!(sq.len(), mesh.num_elements() + 1);
    }

    #[test]
    fn oscillations_of_polynomial_data_vanish() {
        let d = disc(&circle(0.4), SpaceKind::Hyp, Ansatz::Nurbs, 2, 1);
        let dq = DataQuadrature::plain(16);
        let one: DataFn = Arc::new(|_, _| 1.0);
        let psi = project_phi(&d.mesh, 2, &one, &dq).unwrap();
        assert!(oscillations(&d.mesh, &one, &psi, &dq).unwrap().total() < 1e-13);
        // hand case: Πφ = 0, φ = 1 gives h_Q · |Q| per element
        let zero = PiecewisePoly::zero(2, d.mesh.num_elements());
        let osc = oscillations(&d.mesh, &one, &zero, &dq).unwrap();
        let expect: f64 = (0..d.mesh.num_elements()).map(|e| 2.0 * d.mesh.arclength(e).powi(2)).sum();
        assert!((osc.total_squared() - expect).abs() < 1e-12);
    }

    #[test]
    fn residual_hyp_vanishes_for_constants() {
        // W kills constants and φ = 0
        let d = disc(&circle(0.4), SpaceKind::Hyp, Ansatz::Nurbs, 2, 1);
        let one = d.space.constant_one().unwrap();
        let u = DiscreteFunction::new(d.space.clone(), one).unwrap();
        let psi = PiecewisePoly::zero(2, d.mesh.num_elements());
        let cfg = QuadConfig::default();
        let eta = est_res_hyp(&d.mesh, &u, &psi, Approach::Direct, &cfg).unwrap();
        assert!(eta.total() < 1e-8, "{}", eta.total());
    }

    #[test]
    fn residual_hyp_homogeneous() {
        let d = disc(&circle(0.4), SpaceKind::Hyp, Ansatz::Nurbs, 2, 1);
        let coeffs: Vec<f64> = (0..d.space.dim()).map(|i| (0.7 * i as f64).cos()).collect();
        let u = DiscreteFunction::new(d.space.clone(), coeffs.clone()).unwrap();
        let u2 = DiscreteFunction::new(d.space.clone(), coeffs.iter().map(|c| 2.0 * c).collect()).unwrap();
        let psi = PiecewisePoly::zero(2, d.mesh.num_elements());
        let cfg = QuadConfig::default();
        let a = est_res_hyp(&d.mesh, &u, &psi, Approach::Indirect, &cfg).unwrap();
        let b = est_res_hyp(&d.mesh, &u2, &psi, Approach::Indirect, &cfg).unwrap();
        assert!(a.total() > 0.0);
        assert!((b.total_squared() - 4.0 * a.total_squared()).abs() < 1e-10 * b.total_squared());
    }

    #[test]
    fn weak_estimators_decrease_on_circle() {
        let p = builtin_problem("circle").unwrap();
        let cfg = QuadConfig::default();
        let mut prev: Option<(f64, f64)> = None;
        for lev in 1..3 {
            let d = disc(&p.curve, SpaceKind::Weak, Ansatz::Nurbs, 2, lev);
            let sys = weak_system(&p, &d, &cfg).unwrap();
            let phi = DiscreteFunction::new(d.space.clone(), sys.solve().unwrap().as_slice().to_vec()).unwrap();
            let res = est_res_weak(&p, &d.mesh, &phi, &cfg).unwrap().total();
            let fae = est_faermann(&p, &d.mesh, &phi, &cfg).unwrap().total();
            assert!(res > 0.0 && fae > 0.0);
            if let Some((r0, f0)) = prev {
                assert!(res < r0 && fae < f0, "{res} {r0} {fae} {f0}");
            }
            prev = Some((res, fae));
        }
    }
}
