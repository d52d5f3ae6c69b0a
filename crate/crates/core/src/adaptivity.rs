//! Dörfler marking, refinement with multiplicity increase, and the adaptive
//! loops for both integral equations.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble_v, assemble_w, energy_norm, hyp_system, solve_spd, initial_knots, weak_system, Ansatz, AnsatzSpace, DataQuadrature, Discretization,
    DiscreteFunction, GalerkinSystem, SpaceKind,
};
use crate::error::{Error, Result};
use crate::estimators::{
    combine_hyp, est_faermann, est_hh2_hyp, est_hh2_weak, est_res_hyp, est_res_weak, oscillations, IndicatorField,
};
use crate::geometry::{BoundaryMesh, ModelProblem, ProblemKind};
use crate::quadrature::QuadConfig;
use crate::splines::{refine_weights, KnotRecord, KnotVector};

const RATIO_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefinementStrategy {
    MultiplicityIncrease,
    HOnlyFullRegularity,
    HOnlyLowestRegularity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    #[serde(alias = "hh2")]
    Hh2,
    #[serde(alias = "fae")]
    Faermann,
    #[serde(alias = "res")]
    Residual,
}

/// Marked nodes and what to do with them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MarkingOutcome {
    pub marked_nodes: Vec<usize>,
    pub marked_elements: Vec<usize>,
    pub multiplicity_increase: Vec<usize>,
}

/// Minimal set of nodes whose squared indicators carry a `θ`-fraction of the
/// total, as the shortest prefix of the nodes sorted by (value desc, index
/// asc). Returned in ascending order; empty if all indicators vanish.
pub fn doerfler_mark(values: &[f64], theta: f64) -> Result<Vec<usize>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidParameter(format!("theta = {theta} not in (0, 1]")));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    let total: f64 = order.iter().map(|&i| values[i] * values[i]).sum();
    if total == 0.0 {
        return Ok(Vec::new());
    }
    let threshold = theta * total;
    let mut sum = 0.0;
    let mut marked = Vec::new();
    for &i in &order {
        sum += values[i] * values[i];
        marked.push(i);
        if sum >= threshold {
            break;
        }
    }
    marked.sort_unstable();
    Ok(marked)
}

/// Largest multiplicity a single marked node may be raised to.
pub fn multiplicity_cap(kind: SpaceKind, p: usize) -> usize {
    match kind {
        SpaceKind::Weak => p + 1,
        SpaceKind::Hyp => p,
    }
}

/// Marked elements (both nodes marked), multiplicity increases and the
/// elements marked instead.
pub fn classify_marks(
    mesh: &BoundaryMesh,
    kv: &KnotVector,
    marked: &[usize],
    strategy: RefinementStrategy,
    kind: SpaceKind,
) -> MarkingOutcome {
    let nn = mesh.num_nodes();
    let mut is_marked = vec![false; nn];
    for &i in marked {
        is_marked[i] = true;
    }
    let mut element = vec![false; mesh.num_elements()];
    let mut covered = vec![false; nn];
    for (j, el) in element.iter_mut().enumerate() {
        if let (Some(l), Some(r)) = mesh.element_nodes(j) {
            if is_marked[l] && is_marked[r] {
                *el = true;
                covered[l] = true;
                covered[r] = true;
            }
        }
    }
    let cap = multiplicity_cap(kind, kv.degree());
    let mut mult = Vec::new();
    for i in (0..nn).filter(|&i| is_marked[i] && !covered[i]) {
        let t = mesh.node_param(i);
        let interior = t > kv.a() && t < kv.b();
        if strategy == RefinementStrategy::MultiplicityIncrease && interior && kv.multiplicity(t) < cap {
            mult.push(i);
        } else {
            let (l, r) = mesh.node_patch(i);
            for j in [l, r].into_iter().flatten() {
                element[j] = true;
            }
        }
    }
    let mut nodes = marked.to_vec();
    nodes.sort_unstable();
    nodes.dedup();
    MarkingOutcome {
        marked_nodes: nodes,
        marked_elements: (0..element.len()).filter(|&j| element[j]).collect(),
        multiplicity_increase: mult,
    }
}

/// Largest ratio of parameter lengths of neighbouring elements.
pub fn mesh_ratio(h: &[f64], closed: bool) -> f64 {
    worst_pair(h, closed).map_or(1.0, |(_, _, r)| r)
}

fn worst_pair(h: &[f64], closed: bool) -> Option<(usize, usize, f64)> {
    let n = h.len();
    let pairs = (0..n.saturating_sub(1)).map(|j| (j, j + 1));
    let wrap = (closed && n > 1).then_some((n - 1, 0));
    pairs
        .chain(wrap)
        .map(|(i, j)| (i, j, (h[i] / h[j]).max(h[j] / h[i])))
        .fold(None, |best: Option<(usize, usize, f64)>, c| match best {
            Some(b) if b.2 >= c.2 => Some(b),
            _ => Some(c),
        })
}

/// Applies a marking outcome: multiplicity increases, bisection of the
/// marked elements and further bisections until the mesh ratio is at most
/// `2 κ₀`. New midpoints get multiplicity one, or the cap for the
/// lowest-regularity strategy. The weight function is unchanged.
pub fn refine(
    kv: &KnotVector,
    weights: &[f64],
    outcome: &MarkingOutcome,
    kappa0: f64,
    strategy: RefinementStrategy,
    kind: SpaceKind,
) -> Result<(KnotVector, Vec<f64>)> {
    let p = kv.degree();
    let nodes = kv.nodes();
    let ne = nodes.len() - 1;
    let closed = kv.is_closed();
    let mut knots = kv.knots().to_vec();
    for &i in &outcome.multiplicity_increase {
        let t = if closed { nodes[i + 1] } else { nodes[i] };
        if kv.multiplicity(t) + 1 > multiplicity_cap(kind, p) {
            return Err(Error::MultiplicityExceeded {
                knot: t,
                max: multiplicity_cap(kind, p),
            });
        }
        knots.push(t);
    }
    // elements as parameter intervals; bisect, then close the ratio
    let mut intervals: Vec<(f64, f64)> = Vec::with_capacity(2 * ne);
    let mut marked = vec![false; ne];
    for &j in &outcome.marked_elements {
        if j >= ne {
            return Err(Error::IndexOutOfRange { index: j, len: ne });
        }
        marked[j] = true;
    }
    let mut midpoints = Vec::new();
    for j in 0..ne {
        let (l, r) = (nodes[j], nodes[j + 1]);
        if marked[j] {
            let m = 0.5 * (l + r);
            midpoints.push(m);
            intervals.push((l, m));
            intervals.push((m, r));
        } else {
            intervals.push((l, r));
        }
    }
    let limit = 2.0 * kappa0 * (1.0 + RATIO_SLACK);
    loop {
        let h: Vec<f64> = intervals.iter().map(|(l, r)| r - l).collect();
        match worst_pair(&h, closed) {
            Some((i, j, ratio)) if ratio > limit => {
                let k = if h[i] >= h[j] { i } else { j };
                let (l, r) = intervals[k];
                let m = 0.5 * (l + r);
                midpoints.push(m);
                intervals.splice(k..=k, [(l, m), (m, r)]);
            }
            _ => break,
        }
    }
    let mid_mult = match strategy {
        RefinementStrategy::HOnlyLowestRegularity => multiplicity_cap(kind, p).max(1),
        _ => 1,
    };
    for m in midpoints {
        knots.extend(std::iter::repeat_n(m, mid_mult));
    }
    knots.sort_by(f64::total_cmp);
    let fine = KnotVector::new(p, kv.a(), kv.b(), knots, kv.kind())?;
    let w = refine_weights(kv, weights, &fine)?;
    Ok((fine, w))
}

/// Parameters of an adaptive run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub p: usize,
    pub theta: f64,
    pub estimator: EstimatorKind,
    pub strategy: RefinementStrategy,
    pub ansatz: Ansatz,
    #[serde(rename = "N_max")]
    pub n_max: usize,
    pub eta_tol: f64,
    #[serde(default)]
    pub quad: QuadConfig,
    #[serde(default)]
    pub with_error_proxy: bool,
    #[serde(default)]
    pub keep_indicators: bool,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            p: 0,
            theta: 0.5,
            estimator: EstimatorKind::Residual,
            strategy: RefinementStrategy::MultiplicityIncrease,
            ansatz: Ansatz::Spline,
            n_max: 2048,
            eta_tol: 1e-6,
            quad: QuadConfig::default(),
            with_error_proxy: false,
            keep_indicators: false,
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self, kind: ProblemKind) -> Result<()> {
        self.quad.validate()?;
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::InvalidParameter(format!("theta = {} not in (0, 1]", self.theta)));
        }
        if !(self.eta_tol >= 0.0) {
            return Err(Error::InvalidParameter("eta_tol must be nonnegative".into()));
        }
        if self.n_max == 0 {
            return Err(Error::InvalidParameter("N_max must be positive".into()));
        }
        if kind == ProblemKind::HyperSingular {
            if self.p == 0 {
                return Err(Error::InvalidParameter("hyper-singular problems need p >= 1".into()));
            }
            if self.estimator == EstimatorKind::Faermann {
                return Err(Error::InvalidParameter(
                    "the Faermann estimator is only available for the weakly-singular equation".into(),
                ));
            }
        }
        Ok(())
    }
}

/// One level of an adaptive run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub elements: usize,
    pub dofs: usize,
    pub eta: f64,
    pub error_proxy: Option<f64>,
    pub kappa: f64,
    pub seconds: f64,
    #[serde(skip)]
    pub indicators: Option<IndicatorField>,
    #[serde(skip)]
    pub knots: Option<KnotRecord>,
}

/// Per-level records of an adaptive run and the final knot vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveRunLog {
    pub problem: String,
    pub kappa0: f64,
    pub levels: Vec<LevelRecord>,
    pub final_knots: KnotRecord,
}

impl AdaptiveRunLog {
    pub fn ns(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.n).collect()
    }

    pub fn etas(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.eta).collect()
    }

    /// Least-squares slope of `log η` against `log N` over the default window.
    pub fn slope(&self) -> Option<f64> {
        let ns: Vec<f64> = self.levels.iter().map(|l| l.n as f64).collect();
        let w = default_window(&ns);
        fit_slope(&ns[ns.len() - w..], &self.etas()[ns.len() - w..])
    }
}

/// Number of trailing levels used for slope fits: the last 8 levels or the
/// last decade of `N`, whichever is larger (never more than available).
pub fn default_window(ns: &[f64]) -> usize {
    let Some(&last) = ns.last() else {
        return 0;
    };
    let decade = ns.iter().rev().take_while(|&&n| n >= last / 10.0).count();
    decade.max(8).min(ns.len())
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Solution, estimator and optional proxy on one level.
struct LevelResult {
    indicators: IndicatorField,
    error_proxy: Option<f64>,
}

fn solve_function(disc: &Discretization, sys: &GalerkinSystem) -> Result<DiscreteFunction> {
    let c = sys.solve()?;
    DiscreteFunction::new(disc.space.clone(), c.as_slice().to_vec())
}

/// Fine solution and `‖Φ₊ - Φ‖` in the energy norm of the fine matrix.
fn fine_comparison(
    problem: &ModelProblem,
    disc: &Discretization,
    coarse: &DiscreteFunction,
    cfg: &QuadConfig,
) -> Result<(Discretization, DiscreteFunction, f64)> {
    let fine = disc.uniform_refinement()?;
    let sys = match problem.kind {
        ProblemKind::WeaklySingular => weak_system(problem, &fine, cfg)?,
        ProblemKind::HyperSingular => hyp_system(problem, &fine, cfg)?.0,
    };
    let f = solve_function(&fine, &sys)?;
    let moved = coarse.to_refined(&fine.space)?;
    let diff: Vec<f64> = f.coeffs.iter().zip(&moved.coeffs).map(|(a, b)| a - b).collect();
    let err = energy_norm(&sys.matrix, &diff)?;
    Ok((fine, f, err))
}

fn level_weak(
    problem: &ModelProblem,
    disc: &Discretization,
    cfg: &AdaptiveConfig,
) -> Result<LevelResult> {
    let q = &cfg.quad;
    let sys = weak_system(problem, disc, q)?;
    let phi = solve_function(disc, &sys)?;
    let need_fine = cfg.with_error_proxy || cfg.estimator == EstimatorKind::Hh2;
    let fine = if need_fine {
        Some(fine_comparison(problem, disc, &phi, q)?)
    } else {
        None
    };
    let indicators = match cfg.estimator {
        EstimatorKind::Hh2 => {
            let (fd, f, _) = fine.as_ref().expect("fine solution");
            est_hh2_weak(&disc.mesh, &phi, &fd.mesh, f, q)?
        }
        EstimatorKind::Faermann => est_faermann(problem, &disc.mesh, &phi, q)?,
        EstimatorKind::Residual => est_res_weak(problem, &disc.mesh, &phi, q)?,
    };
    Ok(LevelResult {
        indicators,
        error_proxy: fine.filter(|_| cfg.with_error_proxy).map(|f| f.2),
    })
}

fn level_hyp(
    problem: &ModelProblem,
    disc: &Discretization,
    cfg: &AdaptiveConfig,
) -> Result<LevelResult> {
    let q = &cfg.quad;
    let (sys, psi) = hyp_system(problem, disc, q)?;
    let u = solve_function(disc, &sys)?;
    let need_fine = cfg.with_error_proxy || cfg.estimator == EstimatorKind::Hh2;
    let fine = if need_fine {
        Some(fine_comparison(problem, disc, &u, q)?)
    } else {
        None
    };
    let eta = match cfg.estimator {
        EstimatorKind::Hh2 => {
            let (fd, f, _) = fine.as_ref().expect("fine solution");
            est_hh2_hyp(&disc.mesh, &u, &fd.mesh, f, q)?
        }
        EstimatorKind::Residual => est_res_hyp(&disc.mesh, &u, &psi, problem.approach, q)?,
        EstimatorKind::Faermann => {
            return Err(Error::InvalidParameter("Faermann estimator for the hyper-singular equation".into()))
        }
    };
    let phi = problem
        .neumann
        .as_ref()
        .ok_or_else(|| Error::InvalidData("missing Neumann data".into()))?;
    let osc = oscillations(&disc.mesh, phi, &psi, &DataQuadrature::for_problem(problem, q.regular_order))?;
    Ok(LevelResult {
        indicators: combine_hyp(&eta, &osc)?,
        error_proxy: fine.filter(|_| cfg.with_error_proxy).map(|f| f.2),
    })
}

/// `‖Φ₊ - Φ‖` on `disc`, with `Φ₊` the solution on the uniform refinement.
pub fn error_proxy(problem: &ModelProblem, disc: &Discretization, cfg: &QuadConfig) -> Result<f64> {
    let sys = match problem.kind {
        ProblemKind::WeaklySingular => weak_system(problem, disc, cfg)?,
        ProblemKind::HyperSingular => hyp_system(problem, disc, cfg)?.0,
    };
    let coarse = solve_function(disc, &sys)?;
    Ok(fine_comparison(problem, disc, &coarse, cfg)?.2)
}

/// Initial discretization of a problem for a configuration.
pub fn initial_discretization(problem: &ModelProblem, cfg: &AdaptiveConfig) -> Result<Discretization> {
    let kind = space_kind(problem);
    let (kv, w) = initial_knots(&problem.curve, kind, cfg.ansatz, cfg.p)?;
    Discretization::new(&problem.curve, AnsatzSpace::new(kind, kv, w)?)
}

pub fn space_kind(problem: &ModelProblem) -> SpaceKind {
    match problem.kind {
        ProblemKind::WeaklySingular => SpaceKind::Weak,
        ProblemKind::HyperSingular => SpaceKind::Hyp,
    }
}

/// Solve, estimate, mark and refine until `N > N_max` or `η ≤ eta_tol`.
/// `observer` sees every level as soon as it is complete.
pub fn adaptive_loop(
    problem: &ModelProblem,
    cfg: &AdaptiveConfig,
    mut observer: impl FnMut(&LevelRecord),
) -> Result<AdaptiveRunLog> {
    problem.validate()?;
    cfg.validate(problem.kind)?;
    let kind = space_kind(problem);
    let mut disc = initial_discretization(problem, cfg)?;
    let kappa0 = disc.space.knot_vector().mesh_ratio();
    let mut levels = Vec::new();
    for level in 0.. {
        let start = Instant::now();
        let kv = disc.space.knot_vector().clone();
        let res = match kind {
            SpaceKind::Weak => level_weak(problem, &disc, cfg)?,
            SpaceKind::Hyp => level_hyp(problem, &disc, cfg)?,
        };
        let eta = res.indicators.total();
        if !eta.is_finite() {
            return Err(Error::InvalidData(format!("estimator is {eta} on level {level}")));
        }
        let marked = doerfler_mark(res.indicators.values(), cfg.theta)?;
        let next = if eta > cfg.eta_tol && !marked.is_empty() {
            let outcome = classify_marks(&disc.mesh, &kv, &marked, cfg.strategy, kind);
            let (kv1, w1) = refine(&kv, disc.space.weights(), &outcome, kappa0, cfg.strategy, kind)?;
            Some((kv1, w1))
        } else {
            None
        };
        let record = LevelRecord {
            level,
            n: kv.len(),
            elements: disc.mesh.num_elements(),
            dofs: disc.space.dim(),
            eta,
            error_proxy: res.error_proxy,
            kappa: kv.mesh_ratio(),
            seconds: start.elapsed().as_secs_f64(),
            indicators: cfg.keep_indicators.then_some(res.indicators),
            knots: Some(KnotRecord::new(&kv, disc.space.weights())),
        };
        observer(&record);
        levels.push(record);
        match next {
            Some((kv1, w1)) if kv1.len() <= cfg.n_max => {
                disc = Discretization::new(&problem.curve, AnsatzSpace::new(kind, kv1, w1)?)?;
            }
            _ => break,
        }
    }
    let final_knots = KnotRecord::new(disc.space.knot_vector(), disc.space.weights());
    Ok(AdaptiveRunLog {
        problem: problem.name.clone(),
        kappa0,
        levels,
        final_knots,
    })
}

/// `|⟨A₊(c₊ - ĉ), ĉ⟩| / ⟨A₊ĉ, ĉ⟩` for the coarse solution `ĉ` transported to
/// the uniform refinement. The coarse matrix is assembled on the coarse mesh;
/// the coarse load vector is the fine one restricted to the coarse space, so
/// both levels solve with the same data.
pub fn galerkin_orthogonality(problem: &ModelProblem, disc: &Discretization, cfg: &QuadConfig) -> Result<f64> {
    let fine = disc.uniform_refinement()?;
    let (coarse_matrix, fine_sys) = match problem.kind {
        ProblemKind::WeaklySingular => (assemble_v(&disc.mesh, &disc.space, cfg)?, weak_system(problem, &fine, cfg)?),
        ProblemKind::HyperSingular => (assemble_w(&disc.mesh, &disc.space, cfg)?, hyp_system(problem, &fine, cfg)?.0),
    };
    let n = disc.space.dim();
    let mut prolong = DMatrix::zeros(fine.space.dim(), n);
    let mut unit = vec![0.0; n];
    for j in 0..n {
        unit[j] = 1.0;
        prolong.set_column(j, &DVector::from_vec(disc.space.transfer(&unit, &fine.space)?));
        unit[j] = 0.0;
    }
    let coarse_rhs = prolong.transpose() * &fine_sys.rhs;
    let coarse = solve_spd(&coarse_matrix, &coarse_rhs)?;
    let f = fine_sys.solve()?;
    let moved = &prolong * coarse;
    let diff = f - &moved;
    let a_moved = &fine_sys.matrix * &moved;
    Ok((diff.dot(&a_moved) / moved.dot(&a_moved)).abs())
}
