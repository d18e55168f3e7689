//! Rational maps of the Riemann sphere in reduced form.

use crate::error::{Error, Result};
use crate::poly::ComplexPolynomial;
use crate::sphere::{Chart, Point, C64};
use serde::{Deserialize, Serialize};

/// Plain iteration sends values above this modulus to infinity.
pub const OVERFLOW: f64 = 1e12;

/// f = numerator / denominator, with no common roots.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RationalMap {
    numerator: ComplexPolynomial,
    denominator: ComplexPolynomial,
    degree: usize,
    #[serde(skip)]
    pairs: Option<Box<[ChartPair; 4]>>,
}

/// The map read in a pair of charts: F(u) = a(u) / b(u).
#[derive(Clone, Debug)]
pub struct ChartPair {
    pub a: ComplexPolynomial,
    pub b: ComplexPolynomial,
    pub da: ComplexPolynomial,
    pub db: ComplexPolynomial,
}

impl ChartPair {
    fn new(a: ComplexPolynomial, b: ComplexPolynomial) -> Self {
        let (da, db) = (a.derivative(), b.derivative());
        ChartPair { a, b, da, db }
    }

    /// Value `a/b` and derivative; value is infinite where b vanishes.
    pub fn eval_d(&self, u: C64) -> (C64, C64) {
        let (a, b) = (self.a.eval(u), self.b.eval(u));
        let (da, db) = (self.da.eval(u), self.db.eval(u));
        (a / b, (da * b - a * db) / (b * b))
    }

    /// Residual a(u) - t b(u) of the equation F(u) = t, and its u-derivative.
    pub fn residual(&self, u: C64, t: C64) -> (C64, C64) {
        let (a, da) = self.a.eval_d(u);
        let (b, db) = self.b.eval_d(u);
        (a - t * b, da - t * db)
    }
}

impl PartialEq for RationalMap {
    fn eq(&self, other: &Self) -> bool {
        self.numerator == other.numerator && self.denominator == other.denominator
    }
}

fn index(src: Chart, dst: Chart) -> usize {
    match (src, dst) {
        (Chart::Z, Chart::Z) => 0,
        (Chart::Z, Chart::W) => 1,
        (Chart::W, Chart::Z) => 2,
        (Chart::W, Chart::W) => 3,
    }
}

impl RationalMap {
    /// Builds a map after checking reduced form by root comparison.
    pub fn new(numerator: ComplexPolynomial, denominator: ComplexPolynomial) -> Result<Self> {
        if denominator.is_zero() {
            return Err(Error::Precondition("denominator is identically zero".into()));
        }
        let scale_n = numerator.norm_inf().max(1e-300);
        let scale_d = denominator.norm_inf();
        let rn = numerator.roots();
        let rd = denominator.roots();
        for &a in &rn {
            for &b in &rd {
                if (a - b).norm() < 1e-7 * (1.0 + a.norm()) {
                    // Confirm by value: a shared root makes both small at the midpoint.
                    let m = (a + b) * 0.5;
                    if numerator.eval(m).norm() < 1e-9 * scale_n * (1.0 + m.norm()).powi(numerator.degree() as i32)
                        && denominator.eval(m).norm() < 1e-9 * scale_d * (1.0 + m.norm()).powi(denominator.degree() as i32)
                    {
                        return Err(Error::NotReduced(format!("{m}")));
                    }
                }
            }
        }
        Ok(Self::new_unchecked(numerator, denominator))
    }

    /// Skips the reduced-form check; callers guarantee it by construction.
    pub fn new_unchecked(numerator: ComplexPolynomial, denominator: ComplexPolynomial) -> Self {
        let degree = numerator.degree().max(denominator.degree());
        let mut m = RationalMap { numerator, denominator, degree, pairs: None };
        m.build_pairs();
        m
    }

    fn build_pairs(&mut self) {
        let d = self.degree;
        let (p, q) = (&self.numerator, &self.denominator);
        let (pr, qr) = (p.reversed(d), q.reversed(d));
        self.pairs = Some(Box::new([
            ChartPair::new(p.clone(), q.clone()),
            ChartPair::new(q.clone(), p.clone()),
            ChartPair::new(pr.clone(), qr.clone()),
            ChartPair::new(qr, pr),
        ]));
    }

    /// Rebuilds cached chart data after deserialization.
    pub fn rehydrate(mut self) -> Self {
        self.build_pairs();
        self
    }

    pub fn numerator(&self) -> &ComplexPolynomial {
        &self.numerator
    }

    pub fn denominator(&self) -> &ComplexPolynomial {
        &self.denominator
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn pair(&self, src: Chart, dst: Chart) -> &ChartPair {
        &self.pairs.as_ref().expect("chart data")[index(src, dst)]
    }

    /// Image of a point of the sphere.
    pub fn eval(&self, z: Point) -> Point {
        let (chart, u) = z.chart();
        let pr = self.pair(chart, Chart::Z);
        let (a, b) = (pr.a.eval(u), pr.b.eval(u));
        if b == C64::new(0.0, 0.0) {
            if a == C64::new(0.0, 0.0) {
                return Point::Finite(C64::new(f64::NAN, f64::NAN));
            }
            return Point::Infinity;
        }
        Point::from_c64(a / b)
    }

    /// Derivative at a finite non-pole point.
    pub fn derivative(&self, z: C64) -> C64 {
        self.pair(Chart::Z, Chart::Z).eval_d(z).1
    }

    /// Derivative of the map read in the natural charts at `z` and at its image.
    pub fn chart_derivative(&self, z: Point) -> C64 {
        let (src, u) = z.chart();
        let img = self.eval(z);
        let (dst, _) = img.chart();
        self.pair(src, dst).eval_d(u).1
    }

    /// `k`-fold iterate; moduli above `OVERFLOW` become infinity.
    pub fn iterate(&self, z: Point, k: usize) -> Point {
        let mut w = z;
        for _ in 0..k {
            w = self.eval(w);
            if let Point::Finite(v) = w {
                if v.norm() > OVERFLOW {
                    w = Point::Infinity;
                }
            }
        }
        w
    }

    /// Multiplier of a fixed point, computed in the chart at the point.
    pub fn fixed_multiplier(&self, z: Point) -> C64 {
        let (chart, u) = z.chart();
        self.pair(chart, chart).eval_d(u).1
    }

    /// Finite critical points with multiplicity, plus infinity when it is critical.
    pub fn critical_points(&self, cluster_rel: f64) -> Vec<(Point, usize)> {
        let p = &self.numerator;
        let q = &self.denominator;
        let w = p.derivative().mul(q).sub(&p.mul(&q.derivative()));
        let w = w.trimmed(1e-14);
        let roots = w.roots();
        let mut cl = crate::roots::cluster(w.coefficients(), &roots, cluster_rel);
        crate::roots::sort_clusters(&mut cl);
        let mut out: Vec<(Point, usize)> = cl.iter().map(|c| (Point::Finite(c.center), c.multiplicity)).collect();
        let total: usize = out.iter().map(|c| c.1).sum();
        let expected = 2 * self.degree - 2;
        if total < expected {
            out.push((Point::Infinity, expected - total));
        }
        out
    }

    /// Solves f(z) = t; returns every preimage with its local degree.
    pub fn preimages(&self, t: Point, cluster_rel: f64) -> Vec<(Point, usize)> {
        let (dst, tc) = t.chart();
        // Work in the z chart of the source; missing degree means preimages at infinity.
        let pr = self.pair(Chart::Z, dst);
        let h = pr.a.sub(&pr.b.scale(tc)).trimmed(1e-15);
        let roots = h.roots();
        let mut out: Vec<(Point, usize)> = Vec::new();
        // Polish every root in its own chart.
        let polished: Vec<Point> = roots.iter().map(|&z| self.polish_preimage(Point::Finite(z), t)).collect();
        let mut cl = cluster_points(&polished, cluster_rel);
        cl.sort_by(|a, b| cmp_points(&a.0, &b.0));
        out.extend(cl);
        let missing = self.degree.saturating_sub(h.degree());
        if missing > 0 {
            out.push((Point::Infinity, missing));
        }
        out
    }

    /// Newton refinement of a solution of f(z) = t in the natural charts.
    pub fn polish_preimage(&self, z: Point, t: Point) -> Point {
        let (dst, tc) = t.chart();
        let mut z = z;
        for _ in 0..30 {
            let (src, u) = z.chart();
            let pr = self.pair(src, dst);
            let (r, dr) = pr.residual(u, tc);
            if dr == C64::new(0.0, 0.0) {
                break;
            }
            let step = r / dr;
            let next = u - step;
            if !(next.re.is_finite() && next.im.is_finite()) {
                break;
            }
            z = Point::from_chart(src, next);
            if step.norm() <= 4.0 * f64::EPSILON * (1.0 + next.norm()) {
                break;
            }
        }
        z
    }
}

/// Deterministic ordering: infinity last, then real part, then imaginary part.
pub fn cmp_points(a: &Point, b: &Point) -> std::cmp::Ordering {
    match (a, b) {
        (Point::Infinity, Point::Infinity) => std::cmp::Ordering::Equal,
        (Point::Infinity, _) => std::cmp::Ordering::Greater,
        (_, Point::Infinity) => std::cmp::Ordering::Less,
        (Point::Finite(x), Point::Finite(y)) => x
            .re
            .partial_cmp(&y.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.im.partial_cmp(&y.im).unwrap_or(std::cmp::Ordering::Equal)),
    }
}

/// Merges points within chordal `rel`, returning centroids on the sphere with counts.
pub fn cluster_points(points: &[Point], rel: f64) -> Vec<(Point, usize)> {
    let mut out: Vec<(Vec<Point>, usize)> = Vec::new();
    for &p in points {
        match out.iter_mut().find(|g| g.0.iter().any(|q| q.chordal(&p) < rel)) {
            Some(g) => {
                g.0.push(p);
                g.1 += 1;
            }
            None => out.push((vec![p], 1)),
        }
    }
    out.into_iter()
        .map(|(members, m)| {
            if m == 1 {
                return (members[0], 1);
            }
            let mut s = [0.0; 3];
            for q in &members {
                let x = q.to_sphere();
                s[0] += x[0];
                s[1] += x[1];
                s[2] += x[2];
            }
            let n = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
            (Point::from_sphere([s[0] / n, s[1] / n, s[2] / n]), m)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn newton_z3() -> RationalMap {
        RationalMap::new(ComplexPolynomial::from_real(&[1.0, 0.0, 0.0, 2.0]), ComplexPolynomial::from_real(&[0.0, 0.0, 3.0])).unwrap()
    }

    #[test]
    fn iterate_examples() {
        let n = newton_z3();
        match n.iterate(Point::new(2.0, 0.0), 1) {
            Point::Finite(z) => assert!((z - C64::new(17.0 / 12.0, 0.0)).norm() < 1e-15),
            _ => panic!(),
        }
        assert_eq!(n.iterate(Point::new(0.0, 0.0), 1), Point::Infinity);
        assert_eq!(n.iterate(Point::Infinity, 5), Point::Infinity);
    }

    #[test]
    fn multiplier_at_infinity() {
        let n = newton_z3();
        assert!((n.fixed_multiplier(Point::Infinity) - C64::new(1.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rejects_common_root() {
        let p = ComplexPolynomial::from_roots(&[C64::new(1.0, 0.0), C64::new(2.0, 0.0)]);
        let q = ComplexPolynomial::from_roots(&[C64::new(1.0, 0.0)]);
        assert!(matches!(RationalMap::new(p, q), Err(Error::NotReduced(_))));
    }

    #[test]
    fn preimages_of_infinity_are_poles() {
        let n = newton_z3();
        let pre = n.preimages(Point::Infinity, 1e-6);
        assert_eq!(pre.len(), 2);
        assert_eq!(pre[0].1, 2);
        assert!(pre[0].0.chordal(&Point::new(0.0, 0.0)) < 1e-6);
        assert_eq!(pre[1], (Point::Infinity, 1));
    }

    #[test]
    fn critical_points_of_z3_newton() {
        let n = newton_z3();
        let c = n.critical_points(1e-4);
        let total: usize = c.iter().map(|x| x.1).sum();
        assert_eq!(total, 4);
        assert!(c.iter().any(|(p, _)| p.chordal(&Point::new(0.0, 0.0)) < 1e-12));
    }
}
