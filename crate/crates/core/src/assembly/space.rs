use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryMesh, NurbsCurve};
use crate::splines::{check_weights, rational_basis_deriv_offset, refine_to, refine_weights, KnotVector, MAX_LOCAL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    /// All rational splines `R_i`, a subspace of `L²`.
    Weak,
    /// Continuous rational splines; closed curves merge the first and last
    /// basis function, open curves drop both.
    Hyp,
}

/// Family of initial discrete spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ansatz {
    /// The geometry's own knots and weights.
    Nurbs,
    /// Splines of maximal smoothness on the geometry nodes, unit weights.
    Spline,
    /// Piecewise polynomials on the geometry nodes (continuous for `Hyp`).
    PcwPoly,
}

/// Initial knot vector and weights for a curve.
pub fn initial_knots(curve: &NurbsCurve, kind: SpaceKind, ansatz: Ansatz, p: usize) -> Result<(KnotVector, Vec<f64>)> {
    let gkv = curve.knot_vector();
    let (a, b) = (gkv.a(), gkv.b());
    let nodes = gkv.nodes();
    let interior = &nodes[1..nodes.len() - 1];
    match ansatz {
        Ansatz::Nurbs => {
            if p != curve.degree() {
                return Err(Error::InvalidParameter(format!(
                    "nurbs ansatz requires p = {} (geometry degree)",
                    curve.degree()
                )));
            }
            Ok((gkv.clone(), curve.weights().to_vec()))
        }
        Ansatz::Spline => {
            let kv = KnotVector::from_nodes(p, a, b, interior, 1, gkv.kind())?;
            let n = kv.num_basis();
            Ok((kv, vec![1.0; n]))
        }
        Ansatz::PcwPoly => {
            let mult = match kind {
                SpaceKind::Weak => p + 1,
                SpaceKind::Hyp => p.max(1),
            };
            let kv = KnotVector::from_nodes(p, a, b, interior, mult, gkv.kind())?;
            let n = kv.num_basis();
            Ok((kv, vec![1.0; n]))
        }
    }
}

/// Discrete ansatz space on a knot vector with weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzSpace {
    kind: SpaceKind,
    kv: KnotVector,
    weights: Vec<f64>,
    dofmap: Vec<Option<usize>>,
    dim: usize,
}

impl AnsatzSpace {
    pub fn new(kind: SpaceKind, kv: KnotVector, weights: Vec<f64>) -> Result<Self> {
        check_weights(&kv, &weights)?;
        let n = kv.num_basis();
        let (dofmap, dim) = match kind {
            SpaceKind::Weak => ((0..n).map(Some).collect(), n),
            SpaceKind::Hyp => {
                let p = kv.degree();
                if p == 0 {
                    return Err(Error::InvalidSpace("continuous spaces need p >= 1".into()));
                }
                let nodes = kv.nodes();
                for &x in &nodes[1..nodes.len() - 1] {
                    if kv.multiplicity(x) > p {
                        return Err(Error::InvalidSpace(format!(
                            "interior knot {x} has multiplicity above {p}"
                        )));
                    }
                }
                if kv.is_closed() {
                    if weights[0] != weights[n - 1] {
                        return Err(Error::InvalidSpace("first and last weight differ".into()));
                    }
                    let mut map: Vec<Option<usize>> = (0..n - 1).map(Some).collect();
                    map.push(Some(0));
                    (map, n - 1)
                } else {
                    if n < 3 {
                        return Err(Error::InvalidSpace("open continuous space is empty".into()));
                    }
                    let mut map = vec![None];
                    map.extend((0..n - 2).map(Some));
                    map.push(None);
                    (map, n - 2)
                }
            }
        };
        Ok(Self {
            kind,
            kv,
            weights,
            dofmap,
            dim,
        })
    }

    pub fn weak(kv: KnotVector, weights: Vec<f64>) -> Result<Self> {
        Self::new(SpaceKind::Weak, kv, weights)
    }

    pub fn hyp(kv: KnotVector, weights: Vec<f64>) -> Result<Self> {
        Self::new(SpaceKind::Hyp, kv, weights)
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn knot_vector(&self) -> &KnotVector {
        &self.kv
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn degree(&self) -> usize {
        self.kv.degree()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Degree of freedom of basis function `m`.
    pub fn dof(&self, m: usize) -> Option<usize> {
        self.dofmap[m]
    }

    /// Rational basis functions `R_{m0..=m0+p}` nonzero on element `e` and
    /// their derivatives with respect to the local coordinate; returns `m0`.
    #[inline]
    pub fn local(&self, mesh: &BoundaryMesh, e: usize, sigma: f64, vals: &mut [f64], ders: &mut [f64]) -> usize {
        debug_assert_eq!(mesh.knot_vector().len(), self.kv.len());
        let k = mesh.span(e);
        let h = mesh.param_length(e);
        rational_basis_deriv_offset(&self.kv, &self.weights, k, sigma * h, vals, ders);
        for d in ders.iter_mut().take(self.kv.degree() + 1) {
            *d *= h;
        }
        k - self.kv.degree()
    }

    /// Degrees of freedom of the local basis functions of element `e`.
    pub fn local_dofs(&self, mesh: &BoundaryMesh, e: usize) -> [Option<usize>; MAX_LOCAL] {
        let p = self.kv.degree();
        let m0 = mesh.span(e) - p;
        let mut out = [None; MAX_LOCAL];
        for r in 0..=p {
            out[r] = self.dofmap[m0 + r];
        }
        out
    }

    /// Coefficients with respect to all basis functions `R_m`.
    pub fn expand(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.dim {
            return Err(Error::LengthMismatch {
                expected: self.dim,
                got: coeffs.len(),
            });
        }
        Ok(self.dofmap.iter().map(|d| d.map_or(0.0, |i| coeffs[i])).collect())
    }

    /// Inverse of [`Self::expand`] on functions of the space.
    pub fn restrict(&self, basis: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (m, d) in self.dofmap.iter().enumerate() {
            if let Some(i) = d {
                out[*i] = basis[m];
            }
        }
        out
    }

    /// Same space type on a finer knot vector; weights are transferred so the
    /// weight function is unchanged.
    pub fn refined(&self, fine: &KnotVector) -> Result<Self> {
        let w = refine_weights(&self.kv, &self.weights, fine)?;
        Self::new(self.kind, fine.clone(), w)
    }

    /// Coefficients in `fine` of the function with coefficients `coeffs`.
    pub fn transfer(&self, coeffs: &[f64], fine: &AnsatzSpace) -> Result<Vec<f64>> {
        if fine.kind != self.kind || !fine.kv.is_refinement_of(&self.kv) {
            return Err(Error::NotARefinement("fine space does not contain the coarse space".into()));
        }
        let basis = self.expand(coeffs)?;
        let (w, c) = refine_to(&self.kv, &self.weights, &basis, &fine.kv)?;
        debug_assert!(w.iter().zip(&fine.weights).all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs()));
        Ok(fine.restrict(&c))
    }

    /// Coefficients of the constant function 1, if it belongs to the space.
    pub fn constant_one(&self) -> Option<Vec<f64>> {
        if self.kind == SpaceKind::Hyp && !self.kv.is_closed() {
            return None;
        }
        Some(vec![1.0; self.dim])
    }
}

/// Coefficient vector with respect to an ansatz space.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteFunction {
    pub space: AnsatzSpace,
    pub coeffs: Vec<f64>,
}

impl DiscreteFunction {
    pub fn new(space: AnsatzSpace, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.dim() {
            return Err(Error::LengthMismatch {
                expected: space.dim(),
                got: coeffs.len(),
            });
        }
        Ok(Self { space, coeffs })
    }

    pub fn zero(space: AnsatzSpace) -> Self {
        let n = space.dim();
        Self {
            space,
            coeffs: vec![0.0; n],
        }
    }

    /// Value and local-coordinate derivative on element `e`.
    #[inline]
    pub fn value_deriv(&self, mesh: &BoundaryMesh, e: usize, sigma: f64) -> (f64, f64) {
        let mut v = [0.0; MAX_LOCAL];
        let mut d = [0.0; MAX_LOCAL];
        self.space.local(mesh, e, sigma, &mut v, &mut d);
        let dofs = self.space.local_dofs(mesh, e);
        let mut val = 0.0;
        let mut der = 0.0;
        for r in 0..=self.space.degree() {
            if let Some(i) = dofs[r] {
                val += self.coeffs[i] * v[r];
                der += self.coeffs[i] * d[r];
            }
        }
        (val, der)
    }

    pub fn value(&self, mesh: &BoundaryMesh, e: usize, sigma: f64) -> f64 {
        self.value_deriv(mesh, e, sigma).0
    }

    /// Refined representation (the function is unchanged).
    pub fn to_refined(&self, fine: &AnsatzSpace) -> Result<DiscreteFunction> {
        let c = self.space.transfer(&self.coeffs, fine)?;
        DiscreteFunction::new(fine.clone(), c)
    }
}

/// Coefficients of `coarse` with respect to the space on `fine_kv`.
pub fn coeffs_to_refined(coarse: &DiscreteFunction, fine_kv: &KnotVector) -> Result<DiscreteFunction> {
    let fine = coarse.space.refined(fine_kv)?;
    coarse.to_refined(&fine)
}
