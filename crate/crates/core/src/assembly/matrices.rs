use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::data::{data_at, DataQuadrature};
use super::pair::{integrate_pair, Density, Kernel, Operand, SampleCache};
use super::projection::{poly_integral, PiecewisePoly, PolyDensity};
use super::space::AnsatzSpace;
use crate::error::{Error, Result};
use crate::geometry::{BoundaryMesh, DataFn};
use crate::quadrature::{gauss, QuadConfig};
use crate::splines::MAX_LOCAL;

const CHUNK: usize = 64;

/// What a basis density returns for each local basis function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BasisMode {
    /// `R(σ)`
    Value,
    /// `R(σ) |γ_e'(σ)|`
    Jacobian,
    /// `dR/dσ`, i.e. the arclength derivative times the Jacobian.
    Deriv,
}

pub(crate) struct BasisDensity<'a> {
    pub mesh: &'a BoundaryMesh,
    pub space: &'a AnsatzSpace,
    pub mode: BasisMode,
}

impl Density for BasisDensity<'_> {
    fn len(&self) -> usize {
        self.space.degree() + 1
    }

    fn eval(&self, e: usize, sigma: f64, out: &mut [f64]) {
        let mut d = [0.0; MAX_LOCAL];
        let n = self.len();
        self.space.local(self.mesh, e, sigma, &mut out[..n], &mut d);
        match self.mode {
            BasisMode::Value => {}
            BasisMode::Jacobian => {
                let j = self.mesh.tangent(e, sigma).norm();
                out[..n].iter_mut().for_each(|v| *v *= j);
            }
            BasisMode::Deriv => out[..n].copy_from_slice(&d[..n]),
        }
    }
}

/// `σ ↦ f(γ_e(σ))`, optionally times `|γ_e'(σ)|`.
pub(crate) struct DataDensity<'a> {
    pub mesh: &'a BoundaryMesh,
    pub f: &'a DataFn,
    pub jacobian: bool,
}

impl Density for DataDensity<'_> {
    fn len(&self) -> usize {
        1
    }
    fn eval(&self, e: usize, sigma: f64, out: &mut [f64]) {
        let (v, _, jac) = data_at(self.mesh, self.f, e, sigma);
        out[0] = if self.jacobian { v * jac } else { v };
    }
}

fn check_mesh(mesh: &BoundaryMesh, space: &AnsatzSpace) -> Result<()> {
    if mesh.knot_vector() != space.knot_vector() {
        return Err(Error::InvalidMesh("mesh and space use different knot vectors".into()));
    }
    Ok(())
}

/// Symmetric single-layer matrix `∫∫ a_i(x) a_j(y) G(x - y)` for a basis
/// density `a`, scattered through the space's degrees of freedom.
fn assemble_symmetric(
    mesh: &BoundaryMesh,
    space: &AnsatzSpace,
    density: &dyn Density,
    degree: usize,
    cfg: &QuadConfig,
) -> DMatrix<f64> {
    let n = mesh.num_elements();
    let nl = density.len();
    let cache = SampleCache::new(mesh, density, cfg.regular_order);
    let op = Operand::new(density, Some(&cache), degree);
    let dofs: Vec<[Option<usize>; MAX_LOCAL]> = (0..n).map(|e| space.local_dofs(mesh, e)).collect();
    let dim = space.dim();
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    let bs = nl * nl;
    for start in (0..n).step_by(CHUNK) {
        let end = (start + CHUNK).min(n);
        let rows: Vec<Vec<f64>> = (start..end)
            .into_par_iter()
            .map(|e| {
                let mut buf = vec![0.0; (n - e) * bs];
                for f in e..n {
                    let k = f - e;
                    integrate_pair(mesh, Kernel::SingleLayer, e, f, &op, &op, cfg, &mut buf[k * bs..(k + 1) * bs]);
                }
                buf
            })
            .collect();
        for (e, buf) in (start..end).zip(rows) {
            for f in e..n {
                let blk = &buf[(f - e) * bs..(f - e + 1) * bs];
                for r in 0..nl {
                    let Some(i) = dofs[e][r] else { continue };
                    for s in 0..nl {
                        let Some(j) = dofs[f][s] else { continue };
                        let v = blk[r * nl + s];
                        m[(i, j)] += v;
                        if f != e {
                            m[(j, i)] += v;
                        }
                    }
                }
            }
        }
    }
    let mt = m.transpose();
    (m + mt) * 0.5
}

/// Galerkin matrix of the single-layer operator on `X★`.
pub fn assemble_v(mesh: &BoundaryMesh, space: &AnsatzSpace, cfg: &QuadConfig) -> Result<DMatrix<f64>> {
    check_mesh(mesh, space)?;
    cfg.validate()?;
    let d = BasisDensity {
        mesh,
        space,
        mode: BasisMode::Jacobian,
    };
    Ok(assemble_symmetric(mesh, space, &d, space.degree(), cfg))
}

/// `⟨V ∂R_j, ∂R_i⟩` (Maue's formula without stabilization).
pub fn assemble_w_maue(mesh: &BoundaryMesh, space: &AnsatzSpace, cfg: &QuadConfig) -> Result<DMatrix<f64>> {
    check_mesh(mesh, space)?;
    cfg.validate()?;
    let d = BasisDensity {
        mesh,
        space,
        mode: BasisMode::Deriv,
    };
    Ok(assemble_symmetric(mesh, space, &d, space.degree(), cfg))
}

/// Galerkin matrix of the hyper-singular operator on `Y★`, including the
/// rank-one term `⟨R_j, 1⟩⟨R_i, 1⟩` on closed curves.
pub fn assemble_w(mesh: &BoundaryMesh, space: &AnsatzSpace, cfg: &QuadConfig) -> Result<DMatrix<f64>> {
    let mut a = assemble_w_maue(mesh, space, cfg)?;
    if mesh.is_closed() {
        let m = basis_integrals(mesh, space, cfg.regular_order)?;
        a += &m * m.transpose();
    }
    Ok(a)
}

/// `⟨R_i, 1⟩_Γ` for every degree of freedom.
pub fn basis_integrals(mesh: &BoundaryMesh, space: &AnsatzSpace, order: usize) -> Result<DVector<f64>> {
    let dq = DataQuadrature::plain(order);
    let one: DataFn = std::sync::Arc::new(|_, _| 1.0);
    load_vector(mesh, space, &one, &dq)
}

/// `⟨f, R_i⟩_Γ` with the graded data quadrature.
pub fn load_vector(mesh: &BoundaryMesh, space: &AnsatzSpace, f: &DataFn, dq: &DataQuadrature) -> Result<DVector<f64>> {
    check_mesh(mesh, space)?;
    let mut b = DVector::<f64>::zeros(space.dim());
    let nl = space.degree() + 1;
    let mut v = [0.0; MAX_LOCAL];
    let mut d = [0.0; MAX_LOCAL];
    for e in 0..mesh.num_elements() {
        let dofs = space.local_dofs(mesh, e);
        for (s, w) in dq.rule(mesh, e) {
            let (fv, _, jac) = data_at(mesh, f, e, s);
            space.local(mesh, e, s, &mut v[..nl], &mut d);
            for r in 0..nl {
                if let Some(i) = dofs[r] {
                    b[i] += w * jac * fv * v[r];
                }
            }
        }
    }
    Ok(b)
}

/// `⟨ψ, R_i⟩_Γ` for a piecewise polynomial `ψ`.
pub fn load_vector_poly(
    mesh: &BoundaryMesh,
    space: &AnsatzSpace,
    psi: &PiecewisePoly,
    order: usize,
) -> Result<DVector<f64>> {
    check_mesh(mesh, space)?;
    let g = gauss(order);
    let mut b = DVector::<f64>::zeros(space.dim());
    let nl = space.degree() + 1;
    let mut v = [0.0; MAX_LOCAL];
    let mut d = [0.0; MAX_LOCAL];
    for e in 0..mesh.num_elements() {
        let dofs = space.local_dofs(mesh, e);
        for (s, w) in g.iter() {
            let jac = mesh.tangent(e, s).norm();
            let pv = psi.value(e, s);
            space.local(mesh, e, s, &mut v[..nl], &mut d);
            for r in 0..nl {
                if let Some(i) = dofs[r] {
                    b[i] += w * jac * pv * v[r];
                }
            }
        }
    }
    Ok(b)
}

/// `Σ_f ∫∫ a_i(x) k(x, y) c(y)` for a basis density `a` (test side) and
/// a scalar density `c` (trial side), scattered through the space.
fn pair_vector(
    mesh: &BoundaryMesh,
    space: &AnsatzSpace,
    kernel: Kernel,
    test: &dyn Density,
    trial: &dyn Density,
    trial_degree: usize,
    cfg: &QuadConfig,
) -> DVector<f64> {
    let n = mesh.num_elements();
    let na = test.len();
    let nb = trial.len();
    let ctest = SampleCache::new(mesh, test, cfg.regular_order);
    let ctrial = SampleCache::new(mesh, trial, cfg.regular_order);
    let a = Operand::new(test, Some(&ctest), space.degree());
    let b = Operand::new(trial, Some(&ctrial), trial_degree);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|e| {
            let mut acc = vec![0.0; na * nb];
            let mut buf = vec![0.0; na * nb];
            for f in 0..n {
                integrate_pair(mesh, kernel, e, f, &a, &b, cfg, &mut buf);
                acc.iter_mut().zip(&buf).for_each(|(x, y)| *x += y);
            }
            acc
        })
        .collect();
    let mut out = DVector::<f64>::zeros(space.dim());
    for (e, acc) in rows.iter().enumerate() {
        let dofs = space.local_dofs(mesh, e);
        for r in 0..na {
            if let Some(i) = dofs[r] {
                out[i] += acc[r * nb..(r + 1) * nb].iter().sum::<f64>();
            }
        }
    }
    out
}

/// `⟨K u, R_i⟩_Γ` for boundary data `u`.
pub fn double_layer_vector(
    mesh: &BoundaryMesh,
    space: &AnsatzSpace,
    u: &DataFn,
    cfg: &QuadConfig,
) -> Result<DVector<f64>> {
    check_mesh(mesh, space)?;
    let test = BasisDensity {
        mesh,
        space,
        mode: BasisMode::Jacobian,
    };
    let trial = DataDensity {
        mesh,
        f: u,
        jacobian: false,
    };
    Ok(pair_vector(mesh, space, Kernel::DoubleLayer, &test, &trial, space.degree().max(2), cfg))
}

/// `⟨K' ψ, R_i⟩_Γ` for a piecewise polynomial `ψ`.
pub fn adjoint_double_layer_vector(
    mesh: &BoundaryMesh,
    space: &AnsatzSpace,
    psi: &PiecewisePoly,
    cfg: &QuadConfig,
) -> Result<DVector<f64>> {
    check_mesh(mesh, space)?;
    let test = BasisDensity {
        mesh,
        space,
        mode: BasisMode::Value,
    };
    let trial = PolyDensity {
        mesh,
        poly: psi,
        jacobian: true,
    };
    Ok(pair_vector(
        mesh,
        space,
        Kernel::AdjointDoubleLayer,
        &test,
        &trial,
        psi.degree(),
        cfg,
    ))
}

/// Right-hand side of the weakly-singular system:
/// `⟨u/2 + K u, R_i⟩` (direct) or `⟨f, R_i⟩` (indirect).
pub fn rhs_weak(
    mesh: &BoundaryMesh,
    space: &AnsatzSpace,
    data: &DataFn,
    direct: bool,
    dq: &DataQuadrature,
    cfg: &QuadConfig,
) -> Result<DVector<f64>> {
    let mut b = load_vector(mesh, space, data, dq)?;
    if direct {
        b *= 0.5;
        b += double_layer_vector(mesh, space, data, cfg)?;
    }
    Ok(b)
}

/// Right-hand side of the hyper-singular system with the projected datum
/// `ψ = Π★φ`: `⟨ψ/2 - K'ψ, R_i⟩` (direct) or `⟨ψ, R_i⟩` (indirect).
pub fn rhs_hyp(
    mesh: &BoundaryMesh,
    space: &AnsatzSpace,
    psi: &PiecewisePoly,
    direct: bool,
    cfg: &QuadConfig,
) -> Result<DVector<f64>> {
    if psi.num_elements() != mesh.num_elements() {
        return Err(Error::LengthMismatch {
            expected: mesh.num_elements(),
            got: psi.num_elements(),
        });
    }
    if mesh.is_closed() {
        let mean = poly_integral(mesh, psi, cfg.regular_order);
        let scale = abs_integral(mesh, psi, cfg.regular_order);
        if mean.abs() > 1e-8 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidData(format!("Neumann datum has nonzero mean {mean:e}")));
        }
    }
    let mut b = load_vector_poly(mesh, space, psi, cfg.regular_order)?;
    if direct {
        b *= 0.5;
        b -= adjoint_double_layer_vector(mesh, space, psi, cfg)?;
    }
    Ok(b)
}

fn abs_integral(mesh: &BoundaryMesh, psi: &PiecewisePoly, order: usize) -> f64 {
    let g = gauss(order);
    (0..mesh.num_elements())
        .map(|e| {
            g.iter()
                .map(|(s, w)| w * psi.value(e, s).abs() * mesh.tangent(e, s).norm())
                .sum::<f64>()
        })
        .sum()
}
