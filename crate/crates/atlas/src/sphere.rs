//! Points of the Riemann sphere and the two standard charts.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Point {
    Finite(C64),
    Infinity,
}

/// `Z` is the identity chart on |z| <= 1, `W` is w = 1/z on |z| >= 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Chart {
    Z,
    W,
}

impl Point {
    pub fn new(re: f64, im: f64) -> Point {
        Point::Finite(C64::new(re, im))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Point::Infinity)
    }

    pub fn finite(&self) -> Option<C64> {
        match self {
            Point::Finite(z) => Some(*z),
            Point::Infinity => None,
        }
    }

    /// Non-finite complex values become `Infinity`.
    pub fn from_c64(z: C64) -> Point {
        if z.re.is_finite() && z.im.is_finite() {
            Point::Finite(z)
        } else {
            Point::Infinity
        }
    }

    /// Preferred chart and coordinate.
    pub fn chart(&self) -> (Chart, C64) {
        match self {
            Point::Infinity => (Chart::W, C64::new(0.0, 0.0)),
            Point::Finite(z) if z.norm_sqr() <= 1.0 => (Chart::Z, *z),
            Point::Finite(z) => (Chart::W, z.inv()),
        }
    }

    /// Coordinate of this point in a given chart; `None` at the chart's pole.
    pub fn in_chart(&self, chart: Chart) -> Option<C64> {
        match (chart, self) {
            (Chart::Z, Point::Finite(z)) => Some(*z),
            (Chart::Z, Point::Infinity) => None,
            (Chart::W, Point::Infinity) => Some(C64::new(0.0, 0.0)),
            (Chart::W, Point::Finite(z)) => {
                if *z == C64::new(0.0, 0.0) {
                    None
                } else {
                    Some(z.inv())
                }
            }
        }
    }

    pub fn from_chart(chart: Chart, u: C64) -> Point {
        match chart {
            Chart::Z => Point::from_c64(u),
            Chart::W => {
                if u == C64::new(0.0, 0.0) {
                    Point::Infinity
                } else {
                    Point::from_c64(u.inv())
                }
            }
        }
    }

    /// Unit-sphere embedding (inverse stereographic projection).
    pub fn to_sphere(&self) -> [f64; 3] {
        match self {
            Point::Infinity => [0.0, 0.0, 1.0],
            Point::Finite(z) => {
                let r2 = z.norm_sqr();
                if !r2.is_finite() {
                    return [0.0, 0.0, 1.0];
                }
                let s = 1.0 + r2;
                [2.0 * z.re / s, 2.0 * z.im / s, (r2 - 1.0) / s]
            }
        }
    }

    pub fn from_sphere(x: [f64; 3]) -> Point {
        let d = 1.0 - x[2];
        if d <= 1e-300 {
            Point::Infinity
        } else {
            Point::Finite(C64::new(x[0] / d, x[1] / d))
        }
    }

    /// Chordal distance on the unit sphere, in [0, 2].
    pub fn chordal(&self, other: &Point) -> f64 {
        chordal(*self, *other)
    }
}

pub fn chordal(a: Point, b: Point) -> f64 {
    match (a, b) {
        (Point::Infinity, Point::Infinity) => 0.0,
        (Point::Finite(z), Point::Infinity) | (Point::Infinity, Point::Finite(z)) => {
            2.0 / (1.0 + z.norm_sqr()).sqrt()
        }
        (Point::Finite(z), Point::Finite(w)) => {
            // Large moduli go through the sphere embedding to avoid overflow.
            if z.norm_sqr() > 1e150 || w.norm_sqr() > 1e150 {
                let (p, q) = (a.to_sphere(), b.to_sphere());
                let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
                (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
            } else {
                2.0 * (z - w).norm() / ((1.0 + z.norm_sqr()) * (1.0 + w.norm_sqr())).sqrt()
            }
        }
    }
}

/// Chart in which a segment is drawn: `Z` when both ends have modulus at most 2,
/// `W` when both have modulus at least 1/2, none for segments spanning both.
pub fn segment_chart(a: Point, b: Point) -> Option<Chart> {
    let small = |p: Point| p.finite().is_some_and(|z| z.norm() <= 2.0);
    let large = |p: Point| p.finite().is_none_or(|z| z.norm() >= 0.5);
    if small(a) && small(b) {
        Some(Chart::Z)
    } else if large(a) && large(b) {
        Some(Chart::W)
    } else {
        None
    }
}

/// Point at parameter `t` of the segment `a b`: linear in its chart, geodesic otherwise.
pub fn segment_point(a: Point, b: Point, t: f64) -> Point {
    match segment_chart(a, b) {
        Some(ch) => {
            let (u, v) = (a.in_chart(ch).unwrap(), b.in_chart(ch).unwrap());
            Point::from_chart(ch, u + (v - u) * t)
        }
        None => {
            let (p, q) = (a.to_sphere(), b.to_sphere());
            let s = [p[0] + (q[0] - p[0]) * t, p[1] + (q[1] - p[1]) * t, p[2] + (q[2] - p[2]) * t];
            let n = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
            if n < 1e-12 {
                Point::from_sphere([p[1], -p[0], p[2]])
            } else {
                Point::from_sphere([s[0] / n, s[1] / n, s[2] / n])
            }
        }
    }
}

/// Chordal distance from `p` to the segment `a b` (see [`segment_point`]).
pub fn chordal_to_segment(p: Point, a: Point, b: Point) -> f64 {
    if let Some(ch) = segment_chart(a, b) {
        let (u, v) = (a.in_chart(ch).unwrap(), b.in_chart(ch).unwrap());
        let Some(x) = p.in_chart(ch) else {
            return chordal(p, a).min(chordal(p, b));
        };
        let d = v - u;
        let dd = d.norm_sqr();
        let t = if dd > 0.0 { (((x - u) * d.conj()).re / dd).clamp(0.0, 1.0) } else { 0.0 };
        return chordal(p, Point::from_chart(ch, u + d * t));
    }
    let (x, u, v) = (p.to_sphere(), a.to_sphere(), b.to_sphere());
    let d = [v[0] - u[0], v[1] - u[1], v[2] - u[2]];
    let w = [x[0] - u[0], x[1] - u[1], x[2] - u[2]];
    let dd = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    let t = if dd > 0.0 {
        ((w[0] * d[0] + w[1] * d[1] + w[2] * d[2]) / dd).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let e = [w[0] - t * d[0], w[1] - t * d[1], w[2] - t * d[2]];
    (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt()
}

/// Chordal distance from `p` to a polyline.
pub fn chordal_to_polyline(p: Point, line: &[Point]) -> f64 {
    match line.len() {
        0 => f64::INFINITY,
        1 => chordal(p, line[0]),
        _ => line
            .windows(2)
            .map(|s| chordal_to_segment(p, s[0], s[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Chordal length of a polyline.
pub fn polyline_length(line: &[Point]) -> f64 {
    line.windows(2).map(|s| chordal(s[0], s[1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chordal_basics() {
        let o = Point::new(0.0, 0.0);
        assert!((chordal(o, Point::Infinity) - 2.0).abs() < 1e-15);
        assert!((chordal(Point::new(1.0, 0.0), Point::new(-1.0, 0.0)) - 2.0).abs() < 1e-15);
        let big = Point::new(1e200, 0.0);
        assert!(chordal(big, Point::Infinity) < 1e-150);
    }

    #[test]
    fn sphere_round_trip() {
        let p = Point::new(0.3, -2.5);
        let q = Point::from_sphere(p.to_sphere());
        assert!(chordal(p, q) < 1e-14);
    }
}
