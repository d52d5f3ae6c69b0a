use std::sync::Arc;

use igabem::adaptivity::{adaptive_loop, doerfler_mark, AdaptiveConfig};
use igabem::assembly::{
    assemble_v, assemble_w, asymmetry, initial_knots, Ansatz, AnsatzSpace, Discretization, DiscreteFunction, SpaceKind,
};
use igabem::evaluation::{eval_k_at, eval_v_at};
use igabem::geometry::{builtin_geometry, builtin_problem, circle, DataFn, GEOMETRY_NAMES};
use igabem::quadrature::{gauss_legendre, log_gauss, QuadConfig};
use igabem::splines::{eval_bspline, eval_comb, insert_knot_bspline, BoundaryKind, KnotVector};
use igabem::Result;

type Check = fn() -> Result<Option<String>>;

fn fail(cond: bool, msg: impl FnOnce() -> String) -> Option<String> {
    (!cond).then(msg)
}

fn quadrature_moments() -> Result<Option<String>> {
    for n in [2, 4, 8, 16] {
        let g = gauss_legendre(n)?;
        for k in 0..2 * n {
            let m = g.integrate(|x| x.powi(k as i32));
            let exact = 1.0 / (k as f64 + 1.0);
            if (m - exact).abs() > 1e-14 {
                return Ok(Some(format!("gauss({n}) moment {k}: {m}")));
            }
        }
        let l = log_gauss(n)?;
        for k in 0..2 * n {
            let m = l.integrate(|x| x.powi(k as i32));
            let exact = -1.0 / (k as f64 + 1.0).powi(2);
            if (m - exact).abs() > 1e-12 {
                return Ok(Some(format!("log_gauss({n}) moment {k}: {m}")));
            }
        }
    }
    Ok(None)
}

fn spline_partition_and_insertion() -> Result<Option<String>> {
    for p in 0..4 {
        let mut knots = vec![0.1, 0.3, 0.7, 0.9];
        knots.extend(std::iter::repeat_n(0.45, p + 1));
        knots.sort_by(f64::total_cmp);
        knots.extend(std::iter::repeat_n(1.0, p + 1));
        let kv = KnotVector::new(p, 0.0, 1.0, knots, BoundaryKind::Open)?;
        let coeffs: Vec<f64> = (0..kv.num_basis()).map(|i| (i as f64 * 0.7).sin()).collect();
        let (kv2, c2) = insert_knot_bspline(&kv, &coeffs, 0.61, 1)?;
        for j in 0..200 {
            let t = j as f64 / 200.0;
            let s: f64 = (0..kv.num_basis()).map(|i| eval_bspline(&kv, i, t)).sum::<Result<f64>>()?;
            if (s - 1.0).abs() > 1e-13 {
                return Ok(Some(format!("p = {p}: sum of basis at {t} is {s}")));
            }
            let (a, b) = (eval_comb(&kv, &coeffs, t)?, eval_comb(&kv2, &c2, t)?);
            if (a - b).abs() > 1e-12 {
                return Ok(Some(format!("p = {p}: insertion changed value at {t}: {a} vs {b}")));
            }
        }
    }
    Ok(None)
}

fn circle_identities() -> Result<Option<String>> {
    let r = 0.4;
    let c = circle(r);
    let cfg = QuadConfig::default();
    let (kv, w) = initial_knots(&c, SpaceKind::Weak, Ansatz::Nurbs, 2)?;
    let d = Discretization::new(&c, AnsatzSpace::new(SpaceKind::Weak, kv, w)?)?.uniform_refinement()?;
    let pts: Vec<(usize, f64)> = (0..d.mesh.num_elements()).flat_map(|e| [(e, 0.0), (e, 0.37)]).collect();
    let one = DiscreteFunction::new(d.space.clone(), vec![1.0; d.space.dim()])?;
    let exact = -r * r.ln();
    for v in eval_v_at(&d.mesh, &one, &pts, &cfg)? {
        if ((v - exact) / exact).abs() > 1e-8 {
            return Ok(Some(format!("V1 = {v}, expected {exact}")));
        }
    }
    let unit: DataFn = Arc::new(|_, _| 1.0);
    for v in eval_k_at(&d.mesh, &unit, &pts, &cfg)? {
        if (v + 0.5).abs() > 1e-7 {
            return Ok(Some(format!("K1 = {v}, expected -1/2")));
        }
    }
    Ok(None)
}

fn galerkin_matrices() -> Result<Option<String>> {
    let cfg = QuadConfig::default();
    for name in GEOMETRY_NAMES {
        let c = builtin_geometry(name)?;
        for (kind, p) in [(SpaceKind::Weak, 0), (SpaceKind::Weak, 1), (SpaceKind::Hyp, 1)] {
            let (kv, w) = initial_knots(&c, kind, Ansatz::Spline, p)?;
            let d = Discretization::new(&c, AnsatzSpace::new(kind, kv, w)?)?.uniform_refinement()?;
            let a = match kind {
                SpaceKind::Weak => assemble_v(&d.mesh, &d.space, &cfg)?,
                SpaceKind::Hyp => assemble_w(&d.mesh, &d.space, &cfg)?,
            };
            let asym = asymmetry(&a);
            if asym > 1e-12 {
                return Ok(Some(format!("{name} {kind:?} p = {p}: asymmetry {asym:e}")));
            }
            if a.clone().cholesky().is_none() {
                return Ok(Some(format!("{name} {kind:?} p = {p}: not positive definite")));
            }
        }
    }
    Ok(None)
}

fn doerfler_minimality() -> Result<Option<String>> {
    let values = [0.3, 1.2, 0.0, 0.7, 0.7, 2.5, 0.05, 0.9, 1.1];
    for theta in [0.1, 0.25, 0.5, 0.75, 0.9, 1.0] {
        let m = doerfler_mark(&values, theta)?;
        let total: f64 = values.iter().map(|v| v * v).sum();
        let sum = |set: &[usize]| set.iter().map(|&i| values[i] * values[i]).sum::<f64>();
        if sum(&m) < theta * total * (1.0 - 1e-12) {
            return Ok(Some(format!("theta = {theta}: marked set too small")));
        }
        let best = (0u32..1 << values.len())
            .filter(|mask| {
                let set: Vec<usize> = (0..values.len()).filter(|i| mask & (1 << i) != 0).collect();
                sum(&set) >= theta * total * (1.0 - 1e-12)
            })
            .map(u32::count_ones)
            .min()
            .unwrap_or(0) as usize;
        if m.len() != best {
            return Ok(Some(format!("theta = {theta}: {} marked, minimum is {best}", m.len())));
        }
    }
    Ok(None)
}

fn mesh_ratio_bound() -> Result<Option<String>> {
    let problem = builtin_problem("pacman")?;
    let cfg = AdaptiveConfig {
        theta: 0.5,
        n_max: 60,
        ..Default::default()
    };
    let log = adaptive_loop(&problem, &cfg, |_| {})?;
    let worst = log.levels.iter().map(|l| l.kappa).fold(0.0, f64::max);
    Ok(fail(worst <= 2.0 * log.kappa0 * (1.0 + 1e-12), || {
        format!("mesh ratio {worst} exceeds 2 * {}", log.kappa0)
    }))
}

const CHECKS: [(&str, Check); 6] = [
    ("quadrature moments", quadrature_moments),
    ("spline partition of unity and knot insertion", spline_partition_and_insertion),
    ("single and double layer of constants on a circle", circle_identities),
    ("Galerkin matrices symmetric positive definite", galerkin_matrices),
    ("Doerfler marking minimal", doerfler_minimality),
    ("adaptive mesh ratio bounded", mesh_ratio_bound),
];

/// Runs all checks, printing one line each; true iff all pass.
pub fn cmd_selftest() -> bool {
    let mut ok = true;
    for (name, check) in CHECKS {
        match check() {
            Ok(None) => println!("ok    {name}"),
            Ok(Some(msg)) => {
                ok = false;
                println!("FAIL  {name}: {msg}");
            }
            Err(e) => {
                ok = false;
                println!("FAIL  {name}: {e}");
            }
        }
    }
    ok
}
