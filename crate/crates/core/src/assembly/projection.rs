use nalgebra::{DMatrix, DVector};

use super::data::{data_at, DataQuadrature};
use super::pair::Density;
use crate::error::{Error, Result};
use crate::geometry::{BoundaryMesh, DataFn};
use crate::splines::MAX_LOCAL;

/// Shifted Legendre polynomials `P_k(2σ - 1)`, `k = 0..=p`.
#[inline]
pub fn legendre(p: usize, sigma: f64, out: &mut [f64]) {
    let x = 2.0 * sigma - 1.0;
    out[0] = 1.0;
    if p >= 1 {
        out[1] = x;
    }
    for k in 1..p {
        let kf = k as f64;
        out[k + 1] = ((2.0 * kf + 1.0) * x * out[k] - kf * out[k - 1]) / (kf + 1.0);
    }
}

/// Discontinuous piecewise polynomial of degree `p` in the local
/// coordinates, stored as Legendre coefficients per element.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePoly {
    degree: usize,
    coeffs: Vec<f64>,
}

impl PiecewisePoly {
    pub fn new(degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        if degree + 1 > MAX_LOCAL || coeffs.len() % (degree + 1) != 0 {
            return Err(Error::InvalidParameter("piecewise polynomial layout".into()));
        }
        Ok(Self { degree, coeffs })
    }

    pub fn zero(degree: usize, elements: usize) -> Self {
        Self {
            degree,
            coeffs: vec![0.0; elements * (degree + 1)],
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_elements(&self) -> usize {
        self.coeffs.len() / (self.degree + 1)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn element_coeffs(&self, e: usize) -> &[f64] {
        let n = self.degree + 1;
        &self.coeffs[e * n..(e + 1) * n]
    }

    #[inline]
    pub fn value(&self, e: usize, sigma: f64) -> f64 {
        let mut l = [0.0; MAX_LOCAL];
        legendre(self.degree, sigma, &mut l);
        self.element_coeffs(e).iter().zip(&l).map(|(c, v)| c * v).sum()
    }
}

/// `σ ↦ ψ(σ) |γ_e'(σ)|` for a piecewise polynomial `ψ`.
pub(crate) struct PolyDensity<'a> {
    pub mesh: &'a BoundaryMesh,
    pub poly: &'a PiecewisePoly,
    pub jacobian: bool,
}

impl Density for PolyDensity<'_> {
    fn len(&self) -> usize {
        1
    }
    fn eval(&self, e: usize, sigma: f64, out: &mut [f64]) {
        let v = self.poly.value(e, sigma);
        out[0] = if self.jacobian {
            v * self.mesh.tangent(e, sigma).norm()
        } else {
            v
        };
    }
}

/// Elementwise `L²(Γ)` projection onto transported polynomials of degree `p`.
pub fn project_phi(mesh: &BoundaryMesh, p: usize, phi: &DataFn, dq: &DataQuadrature) -> Result<PiecewisePoly> {
    if p + 1 > MAX_LOCAL {
        return Err(Error::InvalidParameter(format!("projection degree {p} too large")));
    }
    let n = p + 1;
    let mut coeffs = Vec::with_capacity(mesh.num_elements() * n);
    let mut l = [0.0; MAX_LOCAL];
    for e in 0..mesh.num_elements() {
        let mut mass = DMatrix::<f64>::zeros(n, n);
        let mut rhs = DVector::<f64>::zeros(n);
        for (s, w) in dq.rule(mesh, e) {
            let (v, _, jac) = data_at(mesh, phi, e, s);
            legendre(p, s, &mut l);
            for i in 0..n {
                rhs[i] += w * jac * v * l[i];
                for j in 0..n {
                    mass[(i, j)] += w * jac * l[i] * l[j];
                }
            }
        }
        let c = mass.cholesky().ok_or(Error::NotPositiveDefinite)?.solve(&rhs);
        coeffs.extend(c.iter());
    }
    PiecewisePoly::new(p, coeffs)
}

/// `∫_Γ ψ ds`.
pub fn poly_integral(mesh: &BoundaryMesh, poly: &PiecewisePoly, order: usize) -> f64 {
    let g = crate::quadrature::gauss(order);
    (0..mesh.num_elements())
        .map(|e| {
            g.iter()
                .map(|(s, w)| w * poly.value(e, s) * mesh.tangent(e, s).norm())
                .sum::<f64>()
        })
        .sum()
}
