use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::builtin::{HEART_SCALE, PACMAN_HALF_ANGLE};
use super::{builtin_geometry, circle, slit, NurbsCurve, Point};
use crate::error::{Error, Result};

/// Boundary data as a function of the boundary point and the outward unit
/// normal there.
pub type DataFn = Arc<dyn Fn(Point, Point) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    WeaklySingular,
    HyperSingular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    Direct,
    Indirect,
}

pub const PROBLEM_NAMES: [&str; 6] = ["pacman", "slit", "heart", "circle", "circle-hyp", "slit-hyp"];

/// Model problem with data and, where known, the exact solution.
///
/// * weakly singular, direct: `V φ = (1/2 + K) u` with `u = dirichlet`.
/// * weakly singular, indirect: `V φ = f` with `f = dirichlet`.
/// * hyper-singular, direct: `W u = (1/2 - K') φ` with `φ = neumann`.
/// * hyper-singular, indirect: `W u = φ` with `φ = neumann`.
#[derive(Clone)]
pub struct ModelProblem {
    pub name: String,
    pub curve: NurbsCurve,
    pub kind: ProblemKind,
    pub approach: Approach,
    pub dirichlet: Option<DataFn>,
    pub neumann: Option<DataFn>,
    /// Exact solution of the integral equation (`φ` resp. `u`), if known.
    /// For closed hyper-singular problems it is determined up to a constant.
    pub exact: Option<DataFn>,
    /// Parameters where the data is singular.
    pub singular_params: Vec<f64>,
    /// Exponent `q` of the substitution `σ = u^q` used for data integrals on
    /// elements touching a singular parameter.
    pub grading: usize,
}

impl fmt::Debug for ModelProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelProblem")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("approach", &self.approach)
            .field("singular_params", &self.singular_params)
            .field("grading", &self.grading)
            .finish()
    }
}

impl ModelProblem {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ProblemKind::WeaklySingular if self.dirichlet.is_none() => {
                Err(Error::InvalidData("weakly-singular problem needs Dirichlet data".into()))
            }
            ProblemKind::HyperSingular if self.neumann.is_none() => {
                Err(Error::InvalidData("hyper-singular problem needs Neumann data".into()))
            }
            _ => Ok(()),
        }
    }
}

/// `r^τ cos(τβ)` and its gradient, with `β` from `branch`.
#[derive(Clone, Copy)]
struct PowerHarmonic {
    tau: f64,
    branch: fn(f64, f64) -> f64,
}

impl PowerHarmonic {
    fn value(&self, x: Point) -> f64 {
        let r = x.norm();
        if r == 0.0 {
            return 0.0;
        }
        r.powf(self.tau) * (self.tau * (self.branch)(x.y, x.x)).cos()
    }

    fn gradient(&self, x: Point) -> Point {
        let r = x.norm();
        if r == 0.0 {
            return Point::zeros();
        }
        let beta = (self.branch)(x.y, x.x);
        let a = (1.0 - self.tau) * beta;
        Point::new(a.cos(), a.sin()) * (self.tau * r.powf(self.tau - 1.0))
    }
}

fn atan2_principal(y: f64, x: f64) -> f64 {
    y.atan2(x)
}

/// `β ∈ (-3π/2, π/2]`.
fn atan2_heart(y: f64, x: f64) -> f64 {
    let b = y.atan2(x);
    if b > PI / 2.0 {
        b - 2.0 * PI
    } else {
        b
    }
}

pub fn builtin_problem(name: &str) -> Result<ModelProblem> {
    builtin_problem_scaled(name, 1.0)
}

/// Built-in problem; `scale` only affects the slit problems.
pub fn builtin_problem_scaled(name: &str, scale: f64) -> Result<ModelProblem> {
    match name {
        "pacman" => {
            let tau = 4.0 / 7.0;
            debug_assert!((tau * PACMAN_HALF_ANGLE - PI / 2.0).abs() < 1e-15);
            let p = PowerHarmonic {
                tau,
                branch: atan2_principal,
            };
            Ok(ModelProblem {
                name: name.into(),
                curve: builtin_geometry("pacman")?,
                kind: ProblemKind::WeaklySingular,
                approach: Approach::Direct,
                dirichlet: Some(Arc::new(move |x, _| p.value(x))),
                neumann: Some(Arc::new(move |x, n| p.gradient(x).dot(&n))),
                exact: Some(Arc::new(move |x, n| p.gradient(x).dot(&n))),
                singular_params: vec![0.5],
                grading: 7,
            })
        }
        "heart" => {
            let p = PowerHarmonic {
                tau: 2.0 / 3.0,
                branch: atan2_heart,
            };
            let _ = HEART_SCALE;
            Ok(ModelProblem {
                name: name.into(),
                curve: builtin_geometry("heart")?,
                kind: ProblemKind::HyperSingular,
                approach: Approach::Direct,
                dirichlet: Some(Arc::new(move |x, _| p.value(x))),
                neumann: Some(Arc::new(move |x, n| p.gradient(x).dot(&n))),
                exact: Some(Arc::new(move |x, _| p.value(x))),
                singular_params: vec![0.5],
                grading: 3,
            })
        }
        "slit" => {
            if !(scale > 0.0) {
                return Err(Error::InvalidParameter("slit scale must be positive".into()));
            }
            let c = scale;
            Ok(ModelProblem {
                name: name.into(),
                curve: slit(c),
                kind: ProblemKind::WeaklySingular,
                approach: Approach::Indirect,
                dirichlet: Some(Arc::new(move |x, _| -0.5 * x.x / c)),
                neumann: None,
                exact: Some(Arc::new(move |x, _| {
                    let s = (x.x / c).clamp(-1.0, 1.0);
                    -s / (1.0 - s * s).sqrt() / c
                })),
                singular_params: vec![0.0, 1.0],
                grading: 2,
            })
        }
        "slit-hyp" => {
            if !(scale > 0.0) {
                return Err(Error::InvalidParameter("slit scale must be positive".into()));
            }
            let c = scale;
            Ok(ModelProblem {
                name: name.into(),
                curve: slit(c),
                kind: ProblemKind::HyperSingular,
                approach: Approach::Indirect,
                dirichlet: None,
                neumann: Some(Arc::new(move |_, _| 0.5 / c)),
                exact: Some(Arc::new(move |x, _| {
                    let s = (x.x / c).clamp(-1.0, 1.0);
                    (1.0 - s * s).sqrt()
                })),
                singular_params: vec![],
                grading: 1,
            })
        }
        "circle" | "circle-hyp" => {
            let value = |x: Point| x.x.exp() * x.y.cos();
            let grad = |x: Point| Point::new(x.x.exp() * x.y.cos(), -x.x.exp() * x.y.sin());
            let weak = name == "circle";
            Ok(ModelProblem {
                name: name.into(),
                curve: circle(super::builtin::CIRCLE_RADIUS),
                kind: if weak {
                    ProblemKind::WeaklySingular
                } else {
                    ProblemKind::HyperSingular
                },
                approach: Approach::Direct,
                dirichlet: Some(Arc::new(move |x, _| value(x))),
                neumann: Some(Arc::new(move |x, n| grad(x).dot(&n))),
                exact: Some(if weak {
                    Arc::new(move |x, n| grad(x).dot(&n))
                } else {
                    Arc::new(move |x, _| value(x))
                }),
                singular_params: vec![],
                grading: 1,
            })
        }
        _ => Err(Error::UnknownName(name.to_string())),
    }
}
