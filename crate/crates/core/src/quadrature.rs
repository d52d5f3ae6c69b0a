//! Quadrature on the unit interval.
//!
//! All rules live on `[0, 1]` and keep their nodes strictly inside the
//! interval, so integrands with endpoint singularities are never evaluated
//! at the singular point. Two weight functions are provided:
//!
//! * `Unit`: plain Gauss–Legendre, `sum(w) = 1`.
//! * `Log`: Gauss rules for `∫ f(τ) log(τ) dτ`, `sum(w) = -1`.
//!
//! Rules are cached per `(order, kind)`; repeated lookups return the same
//! shared rule.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WeightKind {
    Unit,
    Log,
}

/// Nodes and weights on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub kind: WeightKind,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_k f(x_k)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Quadrature orders used across assembly, evaluation and estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadConfig {
    /// Gauss points per direction for regular (and Duffy-regularized) integrals.
    /// Far-field element pairs may use fewer points, never more.
    pub regular_order: usize,
    /// Points of the log-weighted rule for singular parts.
    pub singular_order: usize,
    /// Chebyshev interpolation points per element.
    pub interp_points: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            regular_order: 16,
            singular_order: 16,
            interp_points: 8,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.regular_order == 0 || self.singular_order == 0 {
            return Err(Error::InvalidOrder);
        }
        if self.interp_points < 2 {
            return Err(Error::InvalidParameter(
                "interp_points must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

/// Gauss–Legendre rule with `n` points on `[0, 1]`, exact up to degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(Error::InvalidOrder);
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Newton on P_n starting from the asymptotic root location.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x is the i-th largest root on [-1, 1].
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        nodes[i] = 0.5 * (1.0 - x);
        weights[n - 1 - i] = 0.5 * w;
        weights[i] = 0.5 * w;
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        kind: WeightKind::Unit,
    })
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let (p, pm1) = if n == 1 { (x, 1.0) } else { (p1, p0) };
    let d = n as f64 * (x * p - pm1) / (x * x - 1.0);
    (p, d)
}

/// Gauss rule for the weight `log(τ)` on `[0, 1]` with `n` points.
///
/// Recurrence coefficients of `-log(τ)` come from the modified Chebyshev
/// algorithm with shifted Legendre modified moments, which is well
/// conditioned. Nodes are the eigenvalues of the Jacobi matrix, polished by
/// Newton steps; weights use the Christoffel formula. The returned weights
/// carry the sign of `log`, so `Σ w_k τ_k^j = -1/(j+1)²`.
pub fn log_gauss(n: usize) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(Error::InvalidOrder);
    }
    let (alpha, beta) = log_weight_recurrence(n);

    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        jacobi[(k, k)] = alpha[k];
        if k + 1 < n {
            let off = beta[k + 1].sqrt();
            jacobi[(k, k + 1)] = off;
            jacobi[(k + 1, k)] = off;
        }
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, dp, _) = monic_eval(&alpha, &beta, *x);
            if dp != 0.0 {
                *x -= p / dp;
            }
        }
        let (_, _, christoffel) = monic_eval(&alpha, &beta, *x);
        weights.push(-1.0 / christoffel);
    }
    if nodes.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
        return Err(Error::InvalidParameter(format!(
            "log-Gauss construction failed for n = {n}"
        )));
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        kind: WeightKind::Log,
    })
}

/// Evaluates `p_n(x)`, `p_n'(x)` and `Σ_{k<n} p_k(x)² / ‖p_k‖²` for the
/// monic orthogonal polynomials with the given recurrence.
fn monic_eval(alpha: &[f64], beta: &[f64], x: f64) -> (f64, f64, f64) {
    let n = alpha.len();
    let (mut pm1, mut p) = (0.0, 1.0);
    let (mut dpm1, mut dp) = (0.0, 0.0);
    let mut norm = beta[0];
    let mut sum = p * p / norm;
    for k in 0..n {
        let b = if k == 0 { 0.0 } else { beta[k] };
        let pn = (x - alpha[k]) * p - b * pm1;
        let dpn = p + (x - alpha[k]) * dp - b * dpm1;
        pm1 = p;
        p = pn;
        dpm1 = dp;
        dp = dpn;
        if k + 1 < n {
            norm *= beta[k + 1];
            sum += p * p / norm;
        }
    }
    (p, dp, sum)
}

/// Recurrence coefficients `(α_k, β_k)`, `k < n`, of the weight `-log(τ)`
/// on `[0, 1]`; `β_0` is the total mass 1.
fn log_weight_recurrence(n: usize) -> (Vec<f64>, Vec<f64>) {
    let m = 2 * n;
    // Modified moments against monic shifted Legendre polynomials:
    // m_0 = 1, m_k = (-1)^k (k!)² / (k (k+1) (2k)!).
    let mut moments = vec![0.0; m];
    moments[0] = 1.0;
    let mut ratio = 1.0; // (k!)² / (2k)!
    for k in 1..m {
        let kf = k as f64;
        ratio *= kf * kf / ((2.0 * kf - 1.0) * (2.0 * kf));
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        moments[k] = sign * ratio / (kf * (kf + 1.0));
    }
    let a = |_: usize| 0.5;
    let b = |k: usize| {
        if k == 0 {
            0.0
        } else {
            let kf = k as f64;
            kf * kf / (4.0 * (4.0 * kf * kf - 1.0))
        }
    };

    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    let mut sigma_prev = vec![0.0; m + 1];
    let mut sigma: Vec<f64> = moments.clone();
    sigma.push(0.0);
    alpha[0] = a(0) + moments[1] / moments[0];
    beta[0] = moments[0];
    for k in 1..n {
        let mut next = vec![0.0; m + 1];
        for l in k..(m - k) {
            next[l] = sigma[l + 1] - (alpha[k - 1] - a(l)) * sigma[l] - beta[k - 1] * sigma_prev[l]
                + b(l) * sigma[l - 1];
        }
        alpha[k] = a(k) + next[k + 1] / next[k] - sigma[k] / sigma[k - 1];
        beta[k] = next[k] / sigma[k - 1];
        sigma_prev = sigma;
        sigma = next;
    }
    (alpha, beta)
}

type RuleCache = RwLock<HashMap<(usize, WeightKind), Arc<QuadratureRule>>>;

fn cache() -> &'static RuleCache {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

fn cached(n: usize, kind: WeightKind) -> Arc<QuadratureRule> {
    if let Some(rule) = cache().read().unwrap().get(&(n, kind)) {
        return Arc::clone(rule);
    }
    let rule = match kind {
        WeightKind::Unit => gauss_legendre(n),
        WeightKind::Log => log_gauss(n),
    }
    .expect("quadrature order must be positive");
    let mut guard = cache().write().unwrap();
    Arc::clone(guard.entry((n, kind)).or_insert_with(|| Arc::new(rule)))
}

/// Cached Gauss–Legendre rule. Panics for `n == 0`.
pub fn gauss(n: usize) -> Arc<QuadratureRule> {
    cached(n, WeightKind::Unit)
}

/// Cached log-weighted rule. Panics for `n == 0`.
pub fn log_rule(n: usize) -> Arc<QuadratureRule> {
    cached(n, WeightKind::Log)
}

/// Product rule on the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorRule {
    /// `(σ, τ)` pairs, first coordinate from the first rule.
    pub points: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

impl TensorRule {
    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&(s, t), &w)| w * f(s, t))
            .sum()
    }
}

pub fn tensor_rule(first: &QuadratureRule, second: &QuadratureRule) -> TensorRule {
    let mut points = Vec::with_capacity(first.len() * second.len());
    let mut weights = Vec::with_capacity(first.len() * second.len());
    for (s, ws) in first.iter() {
        for (t, wt) in second.iter() {
            points.push((s, t));
            weights.push(ws * wt);
        }
    }
    TensorRule { points, weights }
}

/// Chebyshev points of the first kind on `[0, 1]`, ascending.
pub fn cheby_nodes(m: usize) -> Vec<f64> {
    let mf = m as f64;
    (0..m)
        .map(|k| {
            let theta = std::f64::consts::PI * (2.0 * (m - k) as f64 - 1.0) / (2.0 * mf);
            0.5 * (1.0 + theta.cos())
        })
        .collect()
}

fn barycentric_weights(nodes: &[f64]) -> Result<Vec<f64>> {
    let m = nodes.len();
    let mut w = vec![1.0; m];
    for j in 0..m {
        for k in 0..m {
            if j != k {
                let d = nodes[j] - nodes[k];
                if d == 0.0 {
                    return Err(Error::DuplicateNodes);
                }
                w[j] /= d;
            }
        }
    }
    Ok(w)
}

/// Differentiation matrix `D` with `(D v)_k = q'(x_k)` for the interpolant
/// `q` of the values `v` at `nodes`.
pub fn lagrange_deriv_matrix(nodes: &[f64]) -> Result<DMatrix<f64>> {
    let m = nodes.len();
    let w = barycentric_weights(nodes)?;
    let mut d = DMatrix::zeros(m, m);
    for i in 0..m {
        let mut diag = 0.0;
        for j in 0..m {
            if i != j {
                let v = (w[j] / w[i]) / (nodes[i] - nodes[j]);
                d[(i, j)] = v;
                diag -= v;
            }
        }
        d[(i, i)] = diag;
    }
    Ok(d)
}

/// Matrix evaluating the interpolant at `targets`: `(E v)_k = q(y_k)`.
pub fn lagrange_interp_matrix(nodes: &[f64], targets: &[f64]) -> Result<DMatrix<f64>> {
    let w = barycentric_weights(nodes)?;
    let mut e = DMatrix::zeros(targets.len(), nodes.len());
    for (k, &y) in targets.iter().enumerate() {
        if let Some(j) = nodes.iter().position(|&x| x == y) {
            e[(k, j)] = 1.0;
            continue;
        }
        let terms: Vec<f64> = nodes.iter().zip(&w).map(|(&x, &wj)| wj / (y - x)).collect();
        let denom: f64 = terms.iter().sum();
        for (j, t) in terms.iter().enumerate() {
            e[(k, j)] = t / denom;
        }
    }
    Ok(e)
}
