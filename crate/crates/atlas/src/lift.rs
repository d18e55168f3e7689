//! Inverse-branch continuation of curves under a rational map.

use crate::error::{Error, Result};
use crate::rational::RationalMap;
use crate::sphere::{chordal, segment_chart, segment_point, Chart, Point, C64};

/// A polyline on the sphere with a potential value per point.
///
/// `g` is the Green potential in the basin the curve lives in (log2 of the
/// Böttcher radius in the immediate basin); `NaN` where unknown.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Curve {
    pub pts: Vec<Point>,
    pub g: Vec<f64>,
}

impl Curve {
    pub fn new(pts: Vec<Point>, g: Vec<f64>) -> Self {
        debug_assert_eq!(pts.len(), g.len());
        Curve { pts, g }
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    pub fn push(&mut self, p: Point, g: f64) {
        self.pts.push(p);
        self.g.push(g);
    }

    pub fn reversed(&self) -> Curve {
        Curve { pts: self.pts.iter().rev().copied().collect(), g: self.g.iter().rev().copied().collect() }
    }

    pub fn length(&self) -> f64 {
        crate::sphere::polyline_length(&self.pts)
    }

    /// Index of a point whose potential equals `g` to relative 1e-12.
    pub fn anchor_index(&self, g: f64) -> Option<usize> {
        self.g.iter().position(|&x| (x - g).abs() <= 1e-12 * g.abs().max(1e-300))
    }
}

/// True when `g = -k^i` for an integer `i`, to relative 1e-12.
pub fn is_anchor(g: f64, k: usize) -> bool {
    if !(g < 0.0) || !g.is_finite() {
        return false;
    }
    let e = (-g).ln() / (k as f64).ln();
    (e - e.round()).abs() < 1e-9
}

#[derive(Clone, Copy, Debug)]
pub struct LiftParams {
    /// Largest chordal gap between consecutive lifted points.
    pub max_step: f64,
    /// Corrector residual bound in the target chart.
    pub eps: f64,
    /// Subdivision depth limit per target segment.
    pub max_depth: usize,
}

impl LiftParams {
    pub fn new(step: f64, eps: f64) -> Self {
        LiftParams { max_step: step, eps, max_depth: 48 }
    }
}

/// Midpoint of a segment in its drawing chart.
pub fn midpoint(a: Point, b: Point) -> Point {
    segment_point(a, b, 0.5)
}

/// One predictor-corrector step from source `s` (over target `t0`) to target `t1`.
fn step(map: &RationalMap, s: Point, t0: Point, t1: Point, params: &LiftParams) -> Option<Point> {
    let tch = segment_chart(t0, t1)?;
    let (sch, u0) = s.chart();
    let pr = map.pair(sch, tch);
    let (v0, v1) = (t0.in_chart(tch)?, t1.in_chart(tch)?);
    // Euler predictor from the implicit relation a(u) - t b(u) = 0.
    let (_, dr) = pr.residual(u0, v0);
    let b0 = pr.b.eval(u0);
    let mut du = if dr.norm() > 0.0 { b0 * (v1 - v0) / dr } else { C64::new(0.0, 0.0) };
    if !(du.re.is_finite() && du.im.is_finite()) {
        du = C64::new(0.0, 0.0);
    }
    let pred = u0 + du;
    let mut u = pred;
    let mut ok = false;
    for _ in 0..12 {
        let (r, dr) = pr.residual(u, v1);
        if dr.norm() == 0.0 {
            break;
        }
        let delta = r / dr;
        if !(delta.re.is_finite() && delta.im.is_finite()) {
            return None;
        }
        u -= delta;
        if delta.norm() <= 1e-14 * (1.0 + u.norm()) {
            ok = true;
            break;
        }
    }
    if !ok {
        // Accept a converged-enough residual.
        let (r, _) = pr.residual(u, v1);
        let scale = pr.b.eval(u).norm().max(1e-300);
        if !(r.norm() / scale <= params.eps) {
            return None;
        }
    }
    // Reject branch jumps: the corrector must stay close to the predictor.
    let jump = (u - pred).norm();
    let travel = du.norm();
    if jump > 0.1 * travel + 1e-12 * (1.0 + u.norm()) && jump > 1e-10 {
        return None;
    }
    let out = Point::from_chart(sch, u);
    if chordal(out, s) > params.max_step {
        return None;
    }
    Some(out)
}

/// Lifts target points `tgt[0..]` starting from source `s0` with f(s0) = tgt[0].
///
/// Returns lifted points and, for each, a fractional index into `tgt` (inserted
/// subdivision points have non-integer indices).
pub fn lift_points(map: &RationalMap, tgt: &[Point], s0: Point, params: &LiftParams) -> Result<(Vec<Point>, Vec<f64>)> {
    let mut out = vec![s0];
    let mut idx = vec![0.0];
    let mut s = s0;
    for i in 0..tgt.len().saturating_sub(1) {
        // Explicit stack of target sub-segments.
        let mut stack: Vec<(Point, f64, usize)> = vec![(tgt[i + 1], (i + 1) as f64, 0)];
        let mut t_cur = tgt[i];
        let mut f_cur = i as f64;
        while let Some(&(t_next, f_next, depth)) = stack.last() {
            match step(map, s, t_cur, t_next, params) {
                Some(next) => {
                    stack.pop();
                    s = next;
                    t_cur = t_next;
                    f_cur = f_next;
                    out.push(s);
                    idx.push(f_cur);
                }
                None => {
                    if depth >= params.max_depth {
                        return Err(Error::LiftDiverged(format!(
                            "subdivision floor at target {:?} from source {:?}",
                            t_next, s
                        )));
                    }
                    let m = midpoint(t_cur, t_next);
                    let fm = 0.5 * (f_cur + f_next);
                    stack.push((m, fm, depth + 1));
                    // Keep the depth of the far half.
                    let last = stack.len() - 1;
                    stack[last - 1].2 = depth + 1;
                }
            }
        }
    }
    Ok((out, idx))
}

/// Geometric refinement from `from` toward `v`: points v + (from - v) 2^-i until within `eps`.
pub fn approach(from: Point, v: Point, eps: f64) -> Vec<Point> {
    let mut out = Vec::new();
    let ch = match v {
        Point::Infinity => Chart::W,
        Point::Finite(z) if z.norm() <= 1.0 => Chart::Z,
        _ => Chart::W,
    };
    let (Some(a), Some(b)) = (from.in_chart(ch), v.in_chart(ch)) else { return out };
    let mut f = 0.5;
    for _ in 0..200 {
        let p = Point::from_chart(ch, b + (a - b) * f);
        if chordal(p, v) < eps {
            break;
        }
        out.push(p);
        f *= 0.5;
    }
    out
}

/// Interpolates potentials at fractional indices (log-linear between neighbours).
pub fn interpolate_g(g: &[f64], idx: f64) -> f64 {
    let i = idx.floor() as usize;
    let frac = idx - i as f64;
    if frac == 0.0 || i + 1 >= g.len() {
        return g[i.min(g.len() - 1)];
    }
    let (a, b) = (g[i], g[i + 1]);
    if a < 0.0 && b < 0.0 && a.is_finite() && b.is_finite() && a != b {
        -((-a).ln() * (1.0 - frac) + (-b).ln() * frac).exp()
    } else if a == b {
        a
    } else {
        f64::NAN
    }
}

/// Largest |i| of an anchor `-k^i` kept on stored curves.
pub const ANCHOR_RANGE: i32 = 16;

/// True for anchors `-k^i` with |i| <= [`ANCHOR_RANGE`]; truncation only cuts there.
pub fn needed_anchor(g: f64, k: usize) -> bool {
    is_anchor(g, k) && ((-g).ln() / (k as f64).ln()).round().abs() <= ANCHOR_RANGE as f64
}

/// Removes points that lie within `dev` of the chord joining their kept neighbours,
/// keeping chords no longer than `max_step`, the ends, and every point whose
/// potential satisfies `keep`.
pub fn decimate(c: &Curve, max_step: f64, dev: f64, keep: impl Fn(f64) -> bool) -> Curve {
    let n = c.len();
    if n <= 2 {
        return c.clone();
    }
    let mut out = Curve::default();
    out.push(c.pts[0], c.g[0]);
    let mut a = 0;
    let mut i = 1;
    while i < n - 1 {
        // Skip i when every point strictly between a and i+1 stays near the chord.
        let j = i + 1;
        let skip = !keep(c.g[i])
            && j - a <= 64
            && chordal(c.pts[a], c.pts[j]) <= max_step
            && (a + 1..j).all(|s| crate::sphere::chordal_to_segment(c.pts[s], c.pts[a], c.pts[j]) <= dev);
        if !skip {
            out.push(c.pts[i], c.g[i]);
            a = i;
        }
        i += 1;
    }
    out.push(c.pts[n - 1], c.g[n - 1]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::ComplexPolynomial;

    fn square() -> RationalMap {
        RationalMap::new(ComplexPolynomial::from_real(&[0.0, 0.0, 1.0]), ComplexPolynomial::one()).unwrap()
    }

    #[test]
    fn lift_under_squaring_follows_sqrt() {
        let f = square();
        let tgt: Vec<Point> = (0..=20).map(|i| Point::Finite(C64::from_polar(4.0, 0.1 * i as f64))).collect();
        let (s, _) = lift_points(&f, &tgt, Point::new(2.0, 0.0), &LiftParams::new(0.05, 1e-12)).unwrap();
        for p in &s {
            let z = p.finite().unwrap();
            assert!((z.norm() - 2.0).abs() < 1e-12);
            assert!(z.arg() >= -1e-12 && z.arg() <= 1.0 + 1e-12);
        }
        let last = s.last().unwrap().finite().unwrap();
        assert!((last - C64::from_polar(2.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn lift_through_infinity_chart() {
        let f = square();
        // Straight line through large moduli to infinity's neighbourhood.
        let tgt: Vec<Point> = (0..=30).map(|i| Point::new(1.0 + 10f64.powf(i as f64 / 5.0), 0.5)).collect();
        let s0 = f.polish_preimage(Point::new(1.4, 0.2), tgt[0]);
        let (s, _) = lift_points(&f, &tgt, s0, &LiftParams::new(0.01, 1e-12)).unwrap();
        for p in &s {
            let d = crate::sphere::chordal_to_polyline(f.eval(*p), &tgt);
            assert!(d < 1e-12, "image off the target by {d}");
        }
    }

    #[test]
    fn anchors() {
        assert!(is_anchor(-8.0, 2));
        assert!(is_anchor(-0.125, 2));
        assert!(!is_anchor(-3.0, 2));
        assert!(is_anchor(-1.0 / 9.0, 3));
        assert!(!is_anchor(0.0, 2));
    }

    #[test]
    fn approach_converges() {
        let pts = approach(Point::new(1.0, 0.0), Point::Infinity, 1e-6);
        assert!(chordal(*pts.last().unwrap(), Point::Infinity) < 2e-6);
    }
}
