//! Univariate B-splines and NURBS on clamped knot vectors.
//!
//! A [`KnotVector`] stores the knots `t_1 <= ... <= t_N` in `(a, b]`, the last
//! `p + 1` of which equal `b`. Internally `p + 1` copies of `a` are prepended,
//! so the extended sequence has `N + p + 1` entries and there are exactly `N`
//! basis functions. Basis index `m` (0-based) refers to the B-spline supported
//! on `[ext[m], ext[m + p + 1]]`.
//!
//! Evaluation is right-continuous on `[a, b)`; the left limit (in particular
//! at `b`) is requested with [`Side::Left`].

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported polynomial degree.
pub const MAX_DEGREE: usize = 7;
/// Upper bound on the number of basis functions that are nonzero on a span.
pub const MAX_LOCAL: usize = MAX_DEGREE + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Closed,
    Open,
}

/// Which one-sided limit to take at a knot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Right,
    Left,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    p: usize,
    a: f64,
    b: f64,
    ext: Vec<f64>,
    kind: BoundaryKind,
}

impl KnotVector {
    pub fn new(p: usize, a: f64, b: f64, knots: Vec<f64>, kind: BoundaryKind) -> Result<Self> {
        if p > MAX_DEGREE {
            return Err(Error::InvalidKnots(format!("degree {p} exceeds {MAX_DEGREE}")));
        }
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidKnots(format!("invalid interval [{a}, {b}]")));
        }
        if knots.len() < p + 1 {
            return Err(Error::InvalidKnots(format!(
                "need at least {} knots, got {}",
                p + 1,
                knots.len()
            )));
        }
        if knots.iter().any(|t| !t.is_finite() || *t <= a || *t > b) {
            return Err(Error::InvalidKnots("knots must lie in (a, b]".into()));
        }
        if knots.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidKnots("knots must be nondecreasing".into()));
        }
        let n = knots.len();
        if knots[n - p - 1..].iter().any(|&t| t != b) {
            return Err(Error::InvalidKnots(format!("last {} knots must equal b", p + 1)));
        }
        let mut ext = vec![a; p + 1];
        ext.extend_from_slice(&knots);
        let kv = Self { p, a, b, ext, kind };
        let mut run = 0;
        for (k, &t) in knots.iter().enumerate() {
            run = if k > 0 && knots[k - 1] == t { run + 1 } else { 1 };
            if run > p + 1 {
                return Err(Error::MultiplicityExceeded { knot: t, max: p + 1 });
            }
        }
        if kv.multiplicity(b) != p + 1 {
            return Err(Error::InvalidKnots(format!("b must have multiplicity {}", p + 1)));
        }
        Ok(kv)
    }

    /// Open knot vector with the given distinct interior nodes of uniform
    /// multiplicity and `b` repeated `p + 1` times.
    pub fn from_nodes(
        p: usize,
        a: f64,
        b: f64,
        interior: &[f64],
        mult: usize,
        kind: BoundaryKind,
    ) -> Result<Self> {
        let mut knots = Vec::with_capacity(interior.len() * mult + p + 1);
        for &x in interior {
            knots.extend(std::iter::repeat_n(x, mult));
        }
        knots.extend(std::iter::repeat_n(b, p + 1));
        Self::new(p, a, b, knots, kind)
    }

    /// Uniform knot vector with `elements` elements and interior multiplicity `mult`.
    pub fn uniform(p: usize, a: f64, b: f64, elements: usize, mult: usize, kind: BoundaryKind) -> Result<Self> {
        let h = (b - a) / elements as f64;
        let interior: Vec<f64> = (1..elements).map(|j| a + j as f64 * h).collect();
        Self::from_nodes(p, a, b, &interior, mult, kind)
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn kind(&self) -> BoundaryKind {
        self.kind
    }

    pub fn is_closed(&self) -> bool {
        self.kind == BoundaryKind::Closed
    }

    /// The knots `t_1..t_N` (without the clamped copies of `a`).
    pub fn knots(&self) -> &[f64] {
        &self.ext[self.p + 1..]
    }

    /// Extended sequence with `p + 1` leading copies of `a`.
    pub fn extended(&self) -> &[f64] {
        &self.ext
    }

    /// Number of knots `N`, which equals the number of basis functions.
    pub fn len(&self) -> usize {
        self.ext.len() - self.p - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_basis(&self) -> usize {
        self.len()
    }

    /// Distinct nodes `a = x_0 < x_1 < ... < x_n = b`.
    pub fn nodes(&self) -> Vec<f64> {
        let mut out = vec![self.a];
        for &t in self.knots() {
            if *out.last().unwrap() != t {
                out.push(t);
            }
        }
        out
    }

    pub fn num_elements(&self) -> usize {
        self.nodes().len() - 1
    }

    /// `(x_{j-1}, x_j)` for every element.
    pub fn elements(&self) -> Vec<(f64, f64)> {
        self.nodes().windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Number of occurrences of `t` among `t_1..t_N` (exact comparison).
    pub fn multiplicity(&self, t: f64) -> usize {
        self.knots().iter().filter(|&&x| x == t).count()
    }

    /// Span index `k` with `ext[k] <= t < ext[k+1]` (right) or
    /// `ext[k] < t <= ext[k+1]` (left), restricted to `p..N`.
    pub fn find_span(&self, t: f64, side: Side) -> Result<usize> {
        let n = self.len();
        match side {
            Side::Right => {
                if !(t >= self.a && t < self.b) {
                    return Err(Error::OutOfDomain { t, a: self.a, b: self.b });
                }
                let k = self.ext.partition_point(|&x| x <= t) - 1;
                Ok(k.min(n - 1))
            }
            Side::Left => {
                if !(t > self.a && t <= self.b) {
                    return Err(Error::OutOfDomain { t, a: self.a, b: self.b });
                }
                let k = self.ext.partition_point(|&x| x < t) - 1;
                Ok(k.max(self.p))
            }
        }
    }

    /// Span of every element; the element's polynomial piece is evaluated
    /// with this span on the closed interval.
    pub fn element_spans(&self) -> Vec<usize> {
        let nodes = self.nodes();
        nodes[..nodes.len() - 1]
            .iter()
            .map(|&x| self.ext.partition_point(|&y| y <= x) - 1)
            .collect()
    }

    /// Knot vector with `t` inserted `times` times.
    pub fn with_knot(&self, t: f64, times: usize) -> Result<Self> {
        if !(t > self.a && t <= self.b) {
            return Err(Error::OutOfDomain { t, a: self.a, b: self.b });
        }
        if self.multiplicity(t) + times > self.p + 1 {
            return Err(Error::MultiplicityExceeded { knot: t, max: self.p + 1 });
        }
        let mut knots = self.knots().to_vec();
        let pos = knots.partition_point(|&x| x <= t);
        for _ in 0..times {
            knots.insert(pos, t);
        }
        Self::new(self.p, self.a, self.b, knots, self.kind)
    }

    /// True if `self` contains every knot of `coarse` with at least the same
    /// multiplicity and shares degree, interval and kind.
    pub fn is_refinement_of(&self, coarse: &KnotVector) -> bool {
        if self.p != coarse.p || self.a != coarse.a || self.b != coarse.b || self.kind != coarse.kind {
            return false;
        }
        self.missing_from(coarse).is_some()
    }

    /// Knots of `self` not present in `coarse` (with multiplicity), or `None`
    /// if `coarse` has a knot that `self` lacks.
    fn missing_from(&self, coarse: &KnotVector) -> Option<Vec<f64>> {
        let fine = self.knots();
        let coarse = coarse.knots();
        let mut extra = Vec::new();
        let mut j = 0;
        for &t in fine {
            if j < coarse.len() && coarse[j] == t {
                j += 1;
            } else {
                if j < coarse.len() && coarse[j] < t {
                    return None;
                }
                extra.push(t);
            }
        }
        (j == coarse.len()).then_some(extra)
    }

    /// Elementwise midpoints.
    pub fn midpoints(&self) -> Vec<f64> {
        self.elements().iter().map(|(l, r)| 0.5 * (l + r)).collect()
    }

    /// Largest ratio of parameter lengths of adjacent elements, wrapping
    /// around for closed knot vectors.
    pub fn mesh_ratio(&self) -> f64 {
        let h: Vec<f64> = self.elements().iter().map(|(l, r)| r - l).collect();
        let ratio = |x: f64, y: f64| (x / y).max(y / x);
        let mut k = 1.0f64;
        for w in h.windows(2) {
            k = k.max(ratio(w[0], w[1]));
        }
        if self.is_closed() && h.len() > 1 {
            k = k.max(ratio(h[0], h[h.len() - 1]));
        }
        k
    }
}

/// Serializable knot-vector record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotRecord {
    pub p: usize,
    pub a: f64,
    pub b: f64,
    pub knots: Vec<f64>,
    pub weights: Vec<f64>,
}

impl KnotRecord {
    pub fn new(kv: &KnotVector, weights: &[f64]) -> Self {
        Self {
            p: kv.degree(),
            a: kv.a(),
            b: kv.b(),
            knots: kv.knots().to_vec(),
            weights: weights.to_vec(),
        }
    }

    pub fn into_parts(self, kind: BoundaryKind) -> Result<(KnotVector, Vec<f64>)> {
        let kv = KnotVector::new(self.p, self.a, self.b, self.knots, kind)?;
        check_weights(&kv, &self.weights)?;
        Ok((kv, self.weights))
    }
}

pub fn check_weights(kv: &KnotVector, weights: &[f64]) -> Result<()> {
    if weights.len() != kv.num_basis() {
        return Err(Error::LengthMismatch {
            expected: kv.num_basis(),
            got: weights.len(),
        });
    }
    if let Some(&w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(Error::NonPositiveWeight(w));
    }
    Ok(())
}

fn check_index(kv: &KnotVector, i: usize) -> Result<()> {
    if i >= kv.num_basis() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: kv.num_basis(),
        });
    }
    Ok(())
}

fn check_domain(kv: &KnotVector, t: f64, side: Side) -> Result<()> {
    let ok = match side {
        Side::Right => t >= kv.a && t < kv.b,
        Side::Left => t > kv.a && t <= kv.b,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::OutOfDomain { t, a: kv.a, b: kv.b })
    }
}

/// `x / y` with the convention `x / 0 = 0`.
#[inline]
fn guarded_div(x: f64, y: f64) -> f64 {
    if y == 0.0 {
        0.0
    } else {
        x / y
    }
}

/// Cox–de Boor recursion for `B_{i,q}` on the extended knots.
fn cox_de_boor(ext: &[f64], i: usize, q: usize, t: f64, side: Side) -> f64 {
    let mut vals: Vec<f64> = (i..=i + q)
        .map(|j| {
            let inside = match side {
                Side::Right => ext[j] <= t && t < ext[j + 1],
                Side::Left => ext[j] < t && t <= ext[j + 1],
            };
            if inside {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for deg in 1..=q {
        for k in 0..=(q - deg) {
            let j = i + k;
            let left = guarded_div(t - ext[j], ext[j + deg] - ext[j]) * vals[k];
            let right = guarded_div(ext[j + deg + 1] - t, ext[j + deg + 1] - ext[j + 1]) * vals[k + 1];
            vals[k] = left + right;
        }
    }
    vals[0]
}

/// `B_{i,p}(t)` by the Cox–de Boor recursion, right-continuous on `[a, b)`.
pub fn eval_bspline(kv: &KnotVector, i: usize, t: f64) -> Result<f64> {
    eval_bspline_side(kv, i, t, Side::Right)
}

pub fn eval_bspline_side(kv: &KnotVector, i: usize, t: f64, side: Side) -> Result<f64> {
    check_index(kv, i)?;
    check_domain(kv, t, side)?;
    Ok(cox_de_boor(&kv.ext, i, kv.p, t, side))
}

/// One-sided derivative of `B_{i,p}` from the two-term lower-degree formula.
pub fn eval_bspline_deriv(kv: &KnotVector, i: usize, t: f64) -> Result<f64> {
    eval_bspline_deriv_side(kv, i, t, Side::Right)
}

pub fn eval_bspline_deriv_side(kv: &KnotVector, i: usize, t: f64, side: Side) -> Result<f64> {
    check_index(kv, i)?;
    check_domain(kv, t, side)?;
    let p = kv.p;
    if p == 0 {
        return Err(Error::DegreeZeroDerivative);
    }
    let e = &kv.ext;
    let pf = p as f64;
    let left = guarded_div(pf, e[i + p] - e[i]) * cox_de_boor(e, i, p - 1, t, side);
    let right = guarded_div(pf, e[i + p + 1] - e[i + 1]) * cox_de_boor(e, i + 1, p - 1, t, side);
    Ok(left - right)
}

/// `R_{i,p}(t) = w_i B_{i,p}(t) / W(t)`.
pub fn eval_nurbs(kv: &KnotVector, weights: &[f64], i: usize, t: f64) -> Result<f64> {
    eval_nurbs_side(kv, weights, i, t, Side::Right)
}

pub fn eval_nurbs_side(kv: &KnotVector, weights: &[f64], i: usize, t: f64, side: Side) -> Result<f64> {
    check_weights(kv, weights)?;
    check_index(kv, i)?;
    let k = kv.find_span(t, side)?;
    if i + kv.p < k || i > k {
        return Ok(0.0);
    }
    let mut n = [0.0; MAX_LOCAL];
    basis_funs(kv, k, t, &mut n);
    let p = kv.p;
    let denom: f64 = (0..=p).map(|r| weights[k - p + r] * n[r]).sum();
    Ok(weights[i] * n[i + p - k] / denom)
}

/// Weight function `W(t) = Σ w_i B_i(t)`.
pub fn weight_function(kv: &KnotVector, weights: &[f64], t: f64, side: Side) -> Result<f64> {
    check_weights(kv, weights)?;
    let k = kv.find_span(t, side)?;
    let mut n = [0.0; MAX_LOCAL];
    basis_funs(kv, k, t, &mut n);
    Ok((0..=kv.p).map(|r| weights[k - kv.p + r] * n[r]).sum())
}

/// `Σ c_i B_i(t)`.
pub fn eval_comb(kv: &KnotVector, coeffs: &[f64], t: f64) -> Result<f64> {
    eval_comb_side(kv, coeffs, t, Side::Right)
}

pub fn eval_comb_side(kv: &KnotVector, coeffs: &[f64], t: f64, side: Side) -> Result<f64> {
    check_len(kv, coeffs.len())?;
    let k = kv.find_span(t, side)?;
    let mut n = [0.0; MAX_LOCAL];
    basis_funs(kv, k, t, &mut n);
    Ok((0..=kv.p).map(|r| coeffs[k - kv.p + r] * n[r]).sum())
}

/// One-sided derivative of `Σ c_i B_i`.
pub fn eval_comb_deriv(kv: &KnotVector, coeffs: &[f64], t: f64) -> Result<f64> {
    eval_comb_deriv_side(kv, coeffs, t, Side::Right)
}

pub fn eval_comb_deriv_side(kv: &KnotVector, coeffs: &[f64], t: f64, side: Side) -> Result<f64> {
    check_len(kv, coeffs.len())?;
    if kv.p == 0 {
        return Err(Error::DegreeZeroDerivative);
    }
    let k = kv.find_span(t, side)?;
    let mut n = [0.0; MAX_LOCAL];
    let mut d = [0.0; MAX_LOCAL];
    basis_funs_deriv(kv, k, t, &mut n, &mut d);
    Ok((0..=kv.p).map(|r| coeffs[k - kv.p + r] * d[r]).sum())
}

fn check_len(kv: &KnotVector, got: usize) -> Result<()> {
    if got != kv.num_basis() {
        return Err(Error::LengthMismatch {
            expected: kv.num_basis(),
            got,
        });
    }
    Ok(())
}

/// Values of the `p + 1` B-splines `B_{k-p}, ..., B_k` that are nonzero on
/// span `k`, evaluated with that span's polynomial piece at `t`.
pub fn basis_funs(kv: &KnotVector, k: usize, t: f64, out: &mut [f64]) {
    basis_funs_offset(&kv.ext, kv.p, k, t - kv.ext[k], out);
}

/// Values and first derivatives of the B-splines nonzero on span `k`.
pub fn basis_funs_deriv(kv: &KnotVector, k: usize, t: f64, vals: &mut [f64], ders: &mut [f64]) {
    basis_funs_deriv_offset(kv, k, t - kv.ext[k], vals, ders);
}

/// [`basis_funs_deriv`] at `t = ext[k] + s`; all knot differences are
/// taken relative to `ext[k]`, so tiny spans keep full relative accuracy.
pub fn basis_funs_deriv_offset(kv: &KnotVector, k: usize, s: f64, vals: &mut [f64], ders: &mut [f64]) {
    let p = kv.p;
    basis_funs_offset(&kv.ext, p, k, s, vals);
    if p == 0 {
        ders[0] = 0.0;
        return;
    }
    let e = &kv.ext;
    let mut low = [0.0; MAX_LOCAL];
    basis_funs_offset(e, p - 1, k, s, &mut low);
    // low[r] = B_{k-p+1+r, p-1}, r = 0..p-1
    let pf = p as f64;
    for r in 0..=p {
        let j = k - p + r;
        let a = if r >= 1 {
            guarded_div(pf, e[j + p] - e[j]) * low[r - 1]
        } else {
            0.0
        };
        let b = if r < p {
            guarded_div(pf, e[j + p + 1] - e[j + 1]) * low[r]
        } else {
            0.0
        };
        ders[r] = a - b;
    }
}

fn basis_funs_offset(e: &[f64], q: usize, k: usize, s: f64, out: &mut [f64]) {
    let mut left = [0.0; MAX_LOCAL];
    let mut right = [0.0; MAX_LOCAL];
    let x0 = e[k];
    out[0] = 1.0;
    for j in 1..=q {
        left[j] = s - (e[k + 1 - j] - x0);
        right[j] = (e[k + j] - x0) - s;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
}

/// Rational basis `R_{k-p..=k}` and its parameter derivative on span `k`.
pub fn rational_basis_deriv(
    kv: &KnotVector,
    weights: &[f64],
    k: usize,
    t: f64,
    vals: &mut [f64],
    ders: &mut [f64],
) {
    rational_basis_deriv_offset(kv, weights, k, t - kv.ext[k], vals, ders);
}

/// [`rational_basis_deriv`] at `t = ext[k] + s`.
pub fn rational_basis_deriv_offset(
    kv: &KnotVector,
    weights: &[f64],
    k: usize,
    s: f64,
    vals: &mut [f64],
    ders: &mut [f64],
) {
    let p = kv.p;
    let mut n = [0.0; MAX_LOCAL];
    let mut dn = [0.0; MAX_LOCAL];
    basis_funs_deriv_offset(kv, k, s, &mut n, &mut dn);
    let mut w = 0.0;
    let mut dw = 0.0;
    for r in 0..=p {
        let wr = weights[k - p + r];
        w += wr * n[r];
        dw += wr * dn[r];
    }
    for r in 0..=p {
        let wr = weights[k - p + r];
        vals[r] = wr * n[r] / w;
        ders[r] = wr * (dn[r] * w - n[r] * dw) / (w * w);
    }
}

/// Coefficient types that knot insertion can combine.
pub trait Coefficient: Copy {
    /// `(1 - alpha) * a + alpha * b`
    fn affine(a: Self, b: Self, alpha: f64) -> Self;
    fn scale(self, s: f64) -> Self;
}

impl Coefficient for f64 {
    fn affine(a: Self, b: Self, alpha: f64) -> Self {
        (1.0 - alpha) * a + alpha * b
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

impl Coefficient for Vector2<f64> {
    fn affine(a: Self, b: Self, alpha: f64) -> Self {
        a * (1.0 - alpha) + b * alpha
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

/// Inserts `t` once into a B-spline coefficient vector.
///
/// With `k` the span of `t` and `s` its current multiplicity:
/// * `m <= k - p`: `Q_m = P_m`
/// * `k - p < m <= k - s`: `Q_m = α_m P_m + (1 - α_m) P_{m-1}`,
///   `α_m = (t - ext[m]) / (ext[m+p] - ext[m])`
/// * `m > k - s`: `Q_m = P_{m-1}`
fn insert_once<C: Coefficient>(kv: &KnotVector, coeffs: &[C], t: f64) -> Result<(KnotVector, Vec<C>)> {
    let p = kv.p;
    let s = kv.multiplicity(t);
    if s + 1 > p + 1 {
        return Err(Error::MultiplicityExceeded { knot: t, max: p + 1 });
    }
    if !(t > kv.a && t < kv.b) {
        return Err(Error::OutOfDomain { t, a: kv.a, b: kv.b });
    }
    let k = kv.find_span(t, Side::Right)?;
    let e = &kv.ext;
    let n = coeffs.len();
    let mut out = Vec::with_capacity(n + 1);
    for m in 0..=n {
        let c = if m + p <= k {
            coeffs[m]
        } else if m + s <= k {
            let alpha = (t - e[m]) / (e[m + p] - e[m]);
            C::affine(coeffs[m - 1], coeffs[m], alpha)
        } else {
            coeffs[m - 1]
        };
        out.push(c);
    }
    Ok((kv.with_knot(t, 1)?, out))
}

/// Inserts `t` `times` times into a plain B-spline coefficient vector; the
/// function `Σ c_i B_i` is unchanged.
pub fn insert_knot_bspline<C: Coefficient>(
    kv: &KnotVector,
    coeffs: &[C],
    t: f64,
    times: usize,
) -> Result<(KnotVector, Vec<C>)> {
    check_len(kv, coeffs.len())?;
    if kv.multiplicity(t) + times > kv.p + 1 {
        return Err(Error::MultiplicityExceeded { knot: t, max: kv.p + 1 });
    }
    let mut kv = kv.clone();
    let mut c = coeffs.to_vec();
    for _ in 0..times {
        let (k2, c2) = insert_once(&kv, &c, t)?;
        kv = k2;
        c = c2;
    }
    Ok((kv, c))
}

/// Knot insertion for rational splines `Σ c_i R_i`: the weights are inserted
/// as coefficients of `W`, so `W` is unchanged, and the coefficients are
/// transferred homogeneously, so the rational spline is unchanged.
pub fn insert_knot<C: Coefficient>(
    kv: &KnotVector,
    weights: &[f64],
    coeffs: &[C],
    t: f64,
    times: usize,
) -> Result<(KnotVector, Vec<f64>, Vec<C>)> {
    check_weights(kv, weights)?;
    check_len(kv, coeffs.len())?;
    let homog: Vec<C> = coeffs.iter().zip(weights).map(|(c, &w)| c.scale(w)).collect();
    let (kv2, w2) = insert_knot_bspline(kv, weights, t, times)?;
    let (_, h2) = insert_knot_bspline(kv, &homog, t, times)?;
    let c2 = h2.iter().zip(&w2).map(|(c, &w)| c.scale(1.0 / w)).collect();
    Ok((kv2, w2, c2))
}

/// Transfers weights and rational coefficients to a finer knot vector.
pub fn refine_to<C: Coefficient>(
    kv: &KnotVector,
    weights: &[f64],
    coeffs: &[C],
    fine: &KnotVector,
) -> Result<(Vec<f64>, Vec<C>)> {
    check_weights(kv, weights)?;
    check_len(kv, coeffs.len())?;
    if fine.p != kv.p || fine.a != kv.a || fine.b != kv.b {
        return Err(Error::NotARefinement("degree or interval differ".into()));
    }
    let extra = fine
        .missing_from(kv)
        .ok_or_else(|| Error::NotARefinement("coarse knot missing from fine knot vector".into()))?;
    let mut cur = kv.clone();
    let mut w: Vec<f64> = weights.to_vec();
    let mut h: Vec<C> = coeffs.iter().zip(weights).map(|(c, &wi)| c.scale(wi)).collect();
    for t in extra {
        let (k2, w2) = insert_once(&cur, &w, t)?;
        let (_, h2) = insert_once(&cur, &h, t)?;
        cur = k2;
        w = w2;
        h = h2;
    }
    let c = h.iter().zip(&w).map(|(c, &wi)| c.scale(1.0 / wi)).collect();
    Ok((w, c))
}

/// Transfers only the weights to a finer knot vector.
pub fn refine_weights(kv: &KnotVector, weights: &[f64], fine: &KnotVector) -> Result<Vec<f64>> {
    let ones = vec![0.0; weights.len()];
    Ok(refine_to(kv, weights, &ones, fine)?.0)
}

/// Bisects every element once; midpoints are inserted with multiplicity one.
pub fn uniform_refine<C: Coefficient>(
    kv: &KnotVector,
    weights: &[f64],
    coeffs: Option<&[C]>,
) -> Result<(KnotVector, Vec<f64>, Option<Vec<C>>)> {
    let mut knots = kv.knots().to_vec();
    knots.extend(kv.midpoints());
    knots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let fine = KnotVector::new(kv.p, kv.a, kv.b, knots, kv.kind)?;
    match coeffs {
        Some(c) => {
            let (w, c2) = refine_to(kv, weights, c, &fine)?;
            Ok((fine, w, Some(c2)))
        }
        None => {
            let w = refine_weights(kv, weights, &fine)?;
            Ok((fine, w, None))
        }
    }
}
