use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::{NurbsCurve, Point};
use crate::error::{Error, Result};
use crate::splines::{BoundaryKind, KnotVector};

pub const GEOMETRY_NAMES: [&str; 4] = ["circle", "slit", "pacman", "heart"];

/// Radius of the built-in circle.
pub const CIRCLE_RADIUS: f64 = 0.4;
/// Radius of the pacman sector.
pub const PACMAN_RADIUS: f64 = 0.25;
/// Half opening angle of the pacman body: the body covers `(-7π/8, 7π/8)`.
pub const PACMAN_HALF_ANGLE: f64 = 7.0 * PI / 8.0;
/// Length unit of the heart.
pub const HEART_SCALE: f64 = 0.15;

pub fn builtin_geometry(name: &str) -> Result<NurbsCurve> {
    match name {
        "circle" => Ok(circle(CIRCLE_RADIUS)),
        "slit" => Ok(slit(1.0)),
        "pacman" => Ok(pacman()),
        "heart" => Ok(heart()),
        _ => Err(Error::UnknownName(name.to_string())),
    }
}

/// Circle of radius `r` around the origin from four rational quadratic arcs,
/// starting at `(r, 0)`.
pub fn circle(r: f64) -> NurbsCurve {
    let knots = vec![0.25, 0.25, 0.5, 0.5, 0.75, 0.75, 1.0, 1.0, 1.0];
    let kv = KnotVector::new(2, 0.0, 1.0, knots, BoundaryKind::Closed).unwrap();
    let pts = [
        (1.0, 0.0),
        (1.0, 1.0),
        (0.0, 1.0),
        (-1.0, 1.0),
        (-1.0, 0.0),
        (-1.0, -1.0),
        (0.0, -1.0),
        (1.0, -1.0),
        (1.0, 0.0),
    ]
    .iter()
    .map(|&(x, y)| Point::new(r * x, r * y))
    .collect();
    let w = FRAC_1_SQRT_2;
    let weights = vec![1.0, w, 1.0, w, 1.0, w, 1.0, w, 1.0];
    NurbsCurve::new(kv, weights, pts).unwrap()
}

/// The slit `[-scale, scale] × {0}` as an open linear spline.
pub fn slit(scale: f64) -> NurbsCurve {
    let kv = KnotVector::new(1, 0.0, 1.0, vec![0.25, 0.5, 0.75, 1.0, 1.0], BoundaryKind::Open).unwrap();
    let pts = [-1.0, -0.5, 0.0, 0.5, 1.0]
        .iter()
        .map(|&x| Point::new(scale * x, 0.0))
        .collect();
    NurbsCurve::new(kv, vec![1.0; 5], pts).unwrap()
}

/// Rational quadratic Bézier pieces on the six parameter intervals
/// `[k/6, (k+1)/6]`, glued with double knots.
struct Pieces {
    points: Vec<Point>,
    weights: Vec<f64>,
}

impl Pieces {
    fn start(p: Point) -> Self {
        Self {
            points: vec![p],
            weights: vec![1.0],
        }
    }

    fn line_to(&mut self, q: Point) {
        let p = *self.points.last().unwrap();
        self.points.push(0.5 * (p + q));
        self.points.push(q);
        self.weights.extend([1.0, 1.0]);
    }

    /// Counterclockwise arc around `center` from the current point by `delta`.
    fn arc(&mut self, center: Point, delta: f64) {
        let p = *self.points.last().unwrap();
        let v = p - center;
        let r = v.norm();
        let theta = v.y.atan2(v.x);
        let mid = theta + 0.5 * delta;
        let half = (0.5 * delta).cos();
        let ctrl = center + Point::new(mid.cos(), mid.sin()) * (r / half);
        let end = center + Point::new((theta + delta).cos(), (theta + delta).sin()) * r;
        self.points.push(ctrl);
        self.points.push(end);
        self.weights.extend([half, 1.0]);
    }

    fn finish(mut self, close_to: Point) -> NurbsCurve {
        *self.points.last_mut().unwrap() = close_to;
        let mut knots = Vec::new();
        for k in 1..6 {
            let t = k as f64 / 6.0;
            knots.extend([t, t]);
        }
        knots.extend([1.0; 3]);
        let kv = KnotVector::new(2, 0.0, 1.0, knots, BoundaryKind::Closed).unwrap();
        NurbsCurve::new(kv, self.weights, self.points).unwrap()
    }
}

/// Circular sector of radius 0.25 with the mouth `|β| > 7π/8`. The
/// reentrant corner at the origin is `γ(1/2)`; the arms meet the arc at
/// `γ(1/3)` and `γ(2/3)`.
pub fn pacman() -> NurbsCurve {
    let r = PACMAN_RADIUS;
    let o = Point::zeros();
    let quarter = PACMAN_HALF_ANGLE / 2.0;
    let at = |angle: f64| Point::new(r * angle.cos(), r * angle.sin());
    let mut c = Pieces::start(at(0.0));
    c.arc(o, quarter);
    c.arc(o, quarter);
    c.line_to(o);
    c.line_to(at(-PACMAN_HALF_ANGLE));
    c.arc(o, quarter);
    c.arc(o, quarter);
    c.finish(at(0.0))
}

/// Heart built from two semicircular lobes of radius `s√2` centered at
/// `(±s, -s)` and two tangent segments meeting at the tip `(0, -4s)`. The
/// notch is the origin `γ(1/2)` with interior angle `3π/2`; the tip is
/// `γ(0) = γ(1)`.
pub fn heart() -> NurbsCurve {
    let s = HEART_SCALE;
    let tip = Point::new(0.0, -4.0 * s);
    let right = Point::new(s, -s);
    let left = Point::new(-s, -s);
    let mut c = Pieces::start(tip);
    c.line_to(Point::new(2.0 * s, -2.0 * s));
    c.arc(right, PI / 2.0);
    c.arc(right, PI / 2.0);
    // snap the notch to the exact origin
    *c.points.last_mut().unwrap() = Point::zeros();
    c.arc(left, PI / 2.0);
    c.arc(left, PI / 2.0);
    c.line_to(tip);
    c.finish(tip)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn on_circle(c: &NurbsCurve, lo: f64, hi: f64, center: Point, r: f64) {
        for k in 0..=100 {
            let t = lo + (hi - lo) * k as f64 / 100.0;
            let t = t.min(c.b());
            let p = c.eval(t).unwrap();
            assert!(((p - center).norm() - r).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn pacman_arcs_lie_on_circle() {
        let c = pacman();
        on_circle(&c, 0.0, 1.0 / 3.0, Point::zeros(), PACMAN_RADIUS);
        on_circle(&c, 2.0 / 3.0, 1.0, Point::zeros(), PACMAN_RADIUS);
        let arm = c.eval(1.0 / 3.0).unwrap();
        assert!((arm.y.atan2(arm.x) - PACMAN_HALF_ANGLE).abs() < 1e-14);
        assert!(c.diameter_sampled(64) < 1.0);
    }

    #[test]
    fn heart_arcs_lie_on_circles() {
        let s = HEART_SCALE;
        let c = heart();
        let r = s * 2f64.sqrt();
        on_circle(&c, 1.0 / 6.0, 0.5, Point::new(s, -s), r);
        on_circle(&c, 0.5, 5.0 / 6.0, Point::new(-s, -s), r);
        assert!(c.eval(0.5).unwrap().norm() < 1e-15);
        assert!((c.eval(0.0).unwrap() - Point::new(0.0, -4.0 * s)).norm() < 1e-15);
        // tangent continuity where the segments meet the lobes
        for t in [1.0 / 6.0, 1.0 / 3.0, 2.0 / 3.0, 5.0 / 6.0] {
            assert!(!c.is_corner(t), "t={t}");
        }
        assert!(c.diameter_sampled(64) < 1.0);
    }
}
