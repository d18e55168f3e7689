//! Basins of roots, Böttcher charts, fixed internal rays and equipotentials.
//!
//! Potentials are stored as `g = log2 |B(z)|` where `B` is the Böttcher
//! coordinate of the immediate basin; the equipotential of level 1/2 is `g = -1`.
//! Outside the immediate basin `g` is the pulled-back value `g(N^j z) / k^j`.

use crate::error::{Error, Result};
use crate::lift::{decimate, interpolate_g, lift_points, needed_anchor, Curve, LiftParams};
use crate::newton::NewtonMapDescriptor;
use crate::rational::RationalMap;
use crate::sphere::{chordal, Point, C64};
use crate::tolerances::Tolerances;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Root reached by iterating `z`, if any, within `max_iter` steps.
pub fn basin_of(desc: &NewtonMapDescriptor, z: Point, max_iter: usize, tol: &Tolerances) -> Option<usize> {
    let mut p = z;
    for _ in 0..=max_iter {
        match p {
            Point::Infinity => return None,
            Point::Finite(w) => {
                if !(w.re.is_finite() && w.im.is_finite()) {
                    return None;
                }
                if let Some(i) = desc.root_near(w, 10.0 * tol.root_eps) {
                    return Some(i);
                }
            }
        }
        p = desc.map.eval(p);
    }
    None
}

/// Böttcher coordinate of a superattracting root.
///
/// Near the root the chart is the two-term model `B(xi + u) = c u (1 + b u)`;
/// farther out it is realized by inverse-branch continuation of the model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoettcherChart {
    pub root: usize,
    pub center: C64,
    pub local_degree: usize,
    pub c: C64,
    pub b: C64,
    /// |u| below which the model is trusted.
    pub model_radius: f64,
    /// Reference potential is `-k^depth`.
    pub depth: u32,
    /// N(xi + u) - xi = local_num(u) / local_den(u), with the low coefficients exactly zero.
    pub local_num: crate::poly::ComplexPolynomial,
    pub local_den: crate::poly::ComplexPolynomial,
}

/// Taylor coefficients of N(xi + u) - xi up to `order`.
fn taylor_at(map: &RationalMap, xi: C64, order: usize) -> Vec<C64> {
    let p = map.numerator().taylor_shift(xi);
    let q = map.denominator().taylor_shift(xi);
    let a = p.sub(&q.scale(xi));
    let mut s = vec![C64::new(0.0, 0.0); order + 1];
    let q0 = q.coeff(0);
    for j in 0..=order {
        let mut acc = a.coeff(j);
        for i in 1..=j {
            acc -= q.coeff(i) * s[j - i];
        }
        s[j] = acc / q0;
    }
    s
}

impl BoettcherChart {
    pub fn new(desc: &NewtonMapDescriptor, root: usize, tol: &Tolerances) -> Result<Self> {
        let xi = desc.roots[root].position;
        let mu = desc.map.fixed_multiplier(Point::Finite(xi));
        if mu.norm() > tol.root_eps {
            return Err(Error::NotSuperattracting(mu.norm()));
        }
        check_critically_finite(desc, root, tol)?;
        let k = desc.local_degree_at_root(root);
        let s = taylor_at(&desc.map, xi, k + 2);
        let ak = s[k];
        let c0 = ak.powf(1.0 / (k as f64 - 1.0));
        // theta = 0 is the fixed direction with smallest nonnegative argument.
        let km1 = (k - 1) as f64;
        let best = (0..k - 1)
            .map(|j| {
                let a = (-c0.arg() + TAU * j as f64 / km1).rem_euclid(TAU);
                (j, if a > TAU - 1e-12 { 0.0 } else { a })
            })
            .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap()
            .0;
        let c = c0 * C64::from_polar(1.0, -TAU * best as f64 / km1);
        let b = s[k + 1] / (ak * k as f64);
        let a2 = (s[k + 2] / ak).norm();
        let mut scale: f64 = 1.0;
        for r in &desc.roots {
            if (r.position - xi).norm() > 0.0 {
                scale = scale.min((r.position - xi).norm());
            }
        }
        for (pz, _) in &desc.poles {
            scale = scale.min((pz - xi).norm());
        }
        for (cp, _) in &desc.critical_points {
            if let Point::Finite(z) = cp {
                let d = (z - xi).norm();
                if d > 1e-7 {
                    scale = scale.min(d);
                }
            }
        }
        let model_radius = (1e-6 / (a2 + b.norm_sqr()).sqrt().max(1e-300))
            .min(1e-4 / b.norm().max(1e-300))
            .min(1e-3 * scale);
        let mut depth = 1u32;
        while (-(k as f64).powi(depth as i32)).exp2() / c.norm() > model_radius && depth < 40 {
            depth += 1;
        }
        let q = desc.map.denominator().taylor_shift(xi);
        let mut a: Vec<C64> = desc.map.numerator().taylor_shift(xi).sub(&q.scale(xi)).coefficients().to_vec();
        for x in a.iter_mut().take(k) {
            *x = C64::new(0.0, 0.0);
        }
        let local_num = crate::poly::ComplexPolynomial::new(a);
        Ok(BoettcherChart { root, center: xi, local_degree: k, c, b, model_radius, depth, local_num, local_den: q })
    }

    pub fn model(&self, u: C64) -> C64 {
        self.c * u * (1.0 + self.b * u)
    }

    /// Inverse of the model to third order.
    pub fn model_inverse(&self, w: C64) -> C64 {
        let v = w / self.c;
        v - self.b * v * v + 2.0 * self.b * self.b * v * v * v
    }

    /// Reference potential of the innermost traced points.
    pub fn reference_potential(&self) -> f64 {
        -(self.local_degree as f64).powi(self.depth as i32)
    }

    /// Largest potential at which the model alone is used.
    pub fn model_potential(&self) -> f64 {
        (self.model_radius * self.c.norm()).log2()
    }

    /// Model point of potential `g` at angle `theta` (turns).
    pub fn model_point(&self, g: f64, theta: f64) -> Point {
        Point::Finite(self.center + self.model_inverse(C64::from_polar(g.exp2(), TAU * theta)))
    }

    /// The map in the coordinate u = z - xi, with its derivative; `None` at poles.
    pub fn local_step(&self, u: C64) -> Option<(C64, C64)> {
        let (a, da) = self.local_num.eval_d(u);
        let (b, db) = self.local_den.eval_d(u);
        let v = a / b;
        let d = (da * b - a * db) / (b * b);
        if v.re.is_finite() && v.im.is_finite() && v.norm() < crate::rational::OVERFLOW {
            Some((v, d))
        } else {
            None
        }
    }

    /// Green potential of `z` relative to this root; `None` outside its basin.
    pub fn potential(&self, _map: &RationalMap, z: Point, max_iter: usize) -> Option<f64> {
        let k = self.local_degree as f64;
        let mut u = z.finite()? - self.center;
        for n in 0..max_iter {
            if !(u.re.is_finite() && u.im.is_finite()) {
                return None;
            }
            if u.norm() < self.model_radius {
                if u.norm() == 0.0 {
                    return Some(f64::NEG_INFINITY);
                }
                return Some(self.model(u).norm().log2() / k.powi(n as i32));
            }
            u = self.local_step(u)?.0;
        }
        None
    }

    /// phi(w) for |w| < 1 by continuation of the model along the radius through w.
    pub fn phi(&self, map: &RationalMap, w: C64) -> Result<Point> {
        let r = w.norm();
        if !(r < 1.0) {
            return Err(Error::Precondition(format!("|w| = {r} is not below 1")));
        }
        let theta = w.arg() / TAU;
        let g_model = self.model_potential();
        if r == 0.0 || r.log2() <= g_model {
            return Ok(Point::Finite(self.center + self.model_inverse(w)));
        }
        let g_target = r.log2();
        let k = self.local_degree as f64;
        let mut g = g_model;
        let mut z = self.center + self.model_inverse(C64::from_polar(g.exp2(), TAU * theta));
        // f is the step in potential as a fraction of min(|g|, 1/2).
        let mut f = 0.5;
        // Secant predictor in g; corrector jumps away from it signal a wrong branch.
        let mut prev: Option<(f64, C64)> = None;
        while g < g_target {
            let g_next = (g + f * (-g).min(0.5)).min(g_target);
            let pred = match prev {
                Some((gp, zp)) => z + (z - zp) * ((g_next - g) / (g - gp)),
                None => z,
            };
            let ok = self.solve_iterated(map, pred, g_next, theta, k, g_model).filter(|z2| {
                let jump = (z2 - pred).norm();
                let u = (z - self.center).norm();
                match prev {
                    Some(_) => jump <= 0.3 * (pred - z).norm() + 1e-12 * u,
                    None => (z2 - z).norm() < u,
                }
            });
            match ok {
                Some(z2) => {
                    prev = Some((g, z));
                    z = z2;
                    g = g_next;
                    f = (f * 2.0).min(0.5);
                }
                None => {
                    f *= 0.5;
                    if f < 1e-6 {
                        return Err(Error::LiftDiverged(format!("phi continuation stalled at potential {g}")));
                    }
                }
            }
        }
        Ok(Point::Finite(z))
    }

    /// Solves N^n(z) = model point of potential g k^n, angle k^n theta.
    fn solve_iterated(&self, map: &RationalMap, z0: C64, g: f64, theta: f64, k: f64, g_model: f64) -> Option<C64> {
        let mut n = 0i32;
        let mut gg = g;
        let mut t = theta;
        while gg > g_model {
            gg *= k;
            t = (t * k).rem_euclid(1.0);
            n += 1;
        }
        let _ = map;
        let target_u = self.model_inverse(C64::from_polar(gg.exp2(), TAU * t));
        let mut u = z0 - self.center;
        let mut last = f64::INFINITY;
        for _ in 0..60 {
            let mut x = u;
            let mut d = C64::new(1.0, 0.0);
            for _ in 0..n {
                let (v, dv) = self.local_step(x)?;
                d *= dv;
                x = v;
            }
            let step = (x - target_u) / d;
            if !(step.re.is_finite() && step.im.is_finite()) {
                return None;
            }
            u -= step;
            let s = step.norm();
            if s <= 1e-14 * u.norm() || (s <= 1e-11 * u.norm() && s >= 0.5 * last) {
                return Some(self.center + u);
            }
            last = s;
        }
        None
    }

    /// Largest chordal residual of N(phi(w)) against phi(w^k) over `samples`.
    pub fn conjugacy_residual(&self, map: &RationalMap, samples: &[C64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &w in samples {
            let a = self.phi(map, w)?;
            let b = self.phi(map, w.powu(self.local_degree as u32))?;
            worst = worst.max(chordal(map.eval(a), b));
        }
        Ok(worst)
    }

    /// Angles (turns) fixed by w -> w^k.
    pub fn fixed_angles(&self) -> Vec<f64> {
        let km1 = self.local_degree - 1;
        (0..km1).map(|j| j as f64 / km1 as f64).collect()
    }
}

/// Rejects maps whose free critical orbits converge to `root` without landing on it.
fn check_critically_finite(desc: &NewtonMapDescriptor, root: usize, tol: &Tolerances) -> Result<()> {
    let xi = desc.roots[root].position;
    let near = |z: C64| (z - xi).norm() / (1.0 + xi.norm());
    for (cp, _) in desc.free_critical_points() {
        let mut p = cp;
        let mut prev = f64::INFINITY;
        for _ in 0..tol.max_iter.min(500) {
            let Point::Finite(z) = p else { break };
            let d = near(z);
            if d < tol.root_eps {
                if prev < 1e-3 {
                    return Err(Error::ExtraCriticalPoint(format!("{cp:?}")));
                }
                break;
            }
            prev = d;
            p = desc.map.eval(p);
        }
    }
    Ok(())
}

/// Quasi-random points of the disk of radius `r` (Halton bases 2 and 3).
pub fn disk_samples(count: usize, r: f64) -> Vec<C64> {
    fn halton(mut i: usize, b: usize) -> f64 {
        let (mut f, mut x) = (1.0, 0.0);
        while i > 0 {
            f /= b as f64;
            x += f * (i % b) as f64;
            i /= b;
        }
        x
    }
    (1..=count)
        .map(|i| C64::from_polar(r * halton(i, 2).sqrt(), TAU * halton(i, 3)))
        .collect()
}

/// An internal ray from a root, as a polyline with potentials.
#[derive(Clone, Debug)]
pub struct Ray {
    pub root: usize,
    pub angle: f64,
    /// Starts at the root (potential -inf) and ends at `terminal`.
    pub curve: Curve,
    pub terminal: Point,
}

/// The first stretch of the ray at angle `theta` between potentials `g0` and `g0 / k`.
fn model_segment(chart: &BoettcherChart, map: &RationalMap, theta: f64, g0: f64, samples: usize) -> Curve {
    let k = chart.local_degree as f64;
    let mut seg = Curve::default();
    for i in 0..=samples {
        let g = g0 * k.powf(-(i as f64) / samples as f64);
        seg.push(chart.model_point(g, theta), g);
    }
    // The far end is exactly a preimage of the near end.
    let last = map.polish_preimage(seg.pts[samples], seg.pts[0]);
    seg.pts[samples] = last;
    seg.g[samples] = g0 / k;
    seg
}

/// One inverse step of a ray chain: lifts `seg` from its far end.
fn lift_segment(map: &RationalMap, seg: &Curve, k: usize, tol: &Tolerances) -> Result<Curve> {
    let params = LiftParams::new(tol.ray_step, tol.lift_eps);
    let (pts, idx) = lift_points(map, &seg.pts, *seg.pts.last().unwrap(), &params)?;
    let kf = k as f64;
    let g: Vec<f64> = idx.iter().map(|&i| interpolate_g(&seg.g, i) / kf).collect();
    Ok(decimate(&Curve::new(pts, g), tol.ray_step, tol.curve_dev, |g| needed_anchor(g, k)))
}

const MAX_RAY_LIFTS: usize = 400;

/// Traces the ray at a fixed angle from the root until it lands at infinity.
pub fn trace_ray(map: &RationalMap, chart: &BoettcherChart, theta: f64, tol: &Tolerances) -> Result<Ray> {
    let k = chart.local_degree;
    let end_eps = 100.0 * tol.lift_eps;
    let mut curve = Curve::default();
    curve.push(Point::Finite(chart.center), f64::NEG_INFINITY);
    let mut seg = model_segment(chart, map, theta, chart.reference_potential(), 16);
    for (p, g) in seg.pts.iter().zip(&seg.g) {
        curve.push(*p, *g);
    }
    for _ in 0..MAX_RAY_LIFTS {
        let next = lift_segment(map, &seg, k, tol)?;
        for i in 1..next.len() {
            curve.push(next.pts[i], next.g[i]);
        }
        seg = next;
        let end = *seg.pts.last().unwrap();
        if chordal(end, Point::Infinity) < end_eps {
            curve.push(Point::Infinity, 0.0);
            return Ok(Ray { root: chart.root, angle: theta, curve, terminal: Point::Infinity });
        }
    }
    Err(Error::RayStalled { potential: *seg.g.last().unwrap() })
}

/// The `k - 1` fixed rays of a root, ordered by angle.
pub fn trace_fixed_rays(map: &RationalMap, chart: &BoettcherChart, tol: &Tolerances) -> Result<Vec<Ray>> {
    chart.fixed_angles().into_iter().map(|t| trace_ray(map, chart, t, tol)).collect()
}

/// Lifts a closed curve around a center of local degree `k` starting from `start`.
///
/// The lift is repeated until it closes up; the number of passes must equal `k`.
pub fn lift_closed(map: &RationalMap, closed: &Curve, start: Point, k: usize, gk: usize, tol: &Tolerances) -> Result<Curve> {
    let params = LiftParams::new(tol.ray_step, tol.lift_eps);
    let mut out = Curve::default();
    let mut s = start;
    let close_eps = 1e3 * tol.lift_eps * (1.0 + closed.length());
    for pass in 1..=k {
        let (pts, idx) = lift_points(map, &closed.pts, s, &params)?;
        let skip = if out.is_empty() { 0 } else { 1 };
        for (p, i) in pts.iter().zip(&idx).skip(skip) {
            out.push(*p, interpolate_g(&closed.g, *i) / gk as f64);
        }
        s = *out.pts.last().unwrap();
        if chordal(s, start) < close_eps {
            if pass != k {
                return Err(Error::Topology(format!("closed lift closed after {pass} passes, expected {k}")));
            }
            let n = out.len();
            out.pts[n - 1] = start;
            // Deviation relative to the curve's size: model circles are tiny.
            let extent = out.pts.iter().map(|p| chordal(*p, start)).fold(0.0, f64::max);
            return Ok(decimate(&out, tol.ray_step, tol.curve_dev * extent.min(1.0), |_| false));
        }
    }
    Err(Error::Topology(format!("closed lift did not close after {k} passes")))
}

/// A closed level curve of the potential.
#[derive(Clone, Debug)]
pub struct Equipotential {
    pub root: usize,
    pub center: Point,
    /// Potential `g = log2(level)`.
    pub g: f64,
    /// Closed polyline, first point repeated at the end, counterclockwise.
    pub curve: Curve,
}

impl Equipotential {
    pub fn level(&self) -> f64 {
        self.g.exp2()
    }
}

/// The equipotential of potential `g` around a root, started on the ray at angle 0.
pub fn trace_equipotential(map: &RationalMap, chart: &BoettcherChart, g: f64, tol: &Tolerances) -> Result<Equipotential> {
    if !(g < 0.0) {
        return Err(Error::Precondition(format!("equipotential level {} is not in (0,1)", g.exp2())));
    }
    let k = chart.local_degree;
    let kf = k as f64;
    let g_model = chart.model_potential().min(-1.0);
    let mut lifts = 0;
    let mut gm = g;
    while gm > g_model {
        gm *= kf;
        lifts += 1;
    }
    // Model circle, counterclockwise from angle 0.
    let samples = 512;
    let mut circle = Curve::default();
    for i in 0..=samples {
        let t = if i == samples { 0.0 } else { i as f64 / samples as f64 };
        circle.push(chart.model_point(gm, t), gm);
    }
    let mut seg = model_segment(chart, map, 0.0, gm, 16);
    for _ in 0..lifts {
        let start = *seg.pts.last().unwrap();
        circle = lift_closed(map, &circle, start, k, k, tol)?;
        seg = lift_segment(map, &seg, k, tol)?;
    }
    Ok(Equipotential { root: chart.root, center: Point::Finite(chart.center), g, curve: circle })
}

/// Winding number of a closed polyline around a finite point.
pub fn winding_number(closed: &[Point], z: C64) -> i64 {
    let mut total = 0.0;
    for w in closed.windows(2) {
        let (Some(a), Some(b)) = (w[0].finite(), w[1].finite()) else { continue };
        total += ((b - z) / (a - z)).arg();
    }
    (total / TAU).round() as i64
}

/// Access census of a root: fixed rays, local degree and accesses at infinity.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AccessReport {
    pub root: usize,
    pub local_degree: usize,
    pub fixed_rays: usize,
    pub accesses_at_infinity: usize,
    pub consistent: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::newton::newton_map;
    use crate::poly::ComplexPolynomial;

    fn cubic() -> NewtonMapDescriptor {
        newton_map(&ComplexPolynomial::from_real(&[-1.0, 0.0, 0.0, 1.0]), &Tolerances::default()).unwrap()
    }

    #[test]
    fn basin_membership() {
        let n = cubic();
        let tol = Tolerances::default();
        let one = n.root_near(C64::new(1.0, 0.0), 1e-9).unwrap();
        assert_eq!(basin_of(&n, Point::new(2.0, 0.0), 100, &tol), Some(one));
        assert_eq!(basin_of(&n, Point::new(0.0, 0.0), 100, &tol), None);
        assert_eq!(basin_of(&n, Point::Infinity, 100, &tol), None);
    }

    #[test]
    fn chart_of_cube_root() {
        let n = cubic();
        let tol = Tolerances::default();
        let one = n.root_near(C64::new(1.0, 0.0), 1e-9).unwrap();
        let ch = BoettcherChart::new(&n, one, &tol).unwrap();
        assert_eq!(ch.local_degree, 2);
        let res = ch.conjugacy_residual(&n.map, &disk_samples(100, 0.9)).unwrap();
        assert!(res < 1e-8, "conjugacy residual {res}");
    }

    #[test]
    fn double_root_is_not_superattracting() {
        let p = ComplexPolynomial::from_roots(&[C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(-1.0, 0.0), C64::new(0.0, 2.0)]);
        let tol = Tolerances::default();
        let n = newton_map(&p, &tol).unwrap();
        let i = n.root_near(C64::new(1.0, 0.0), 1e-6).unwrap();
        assert!(matches!(BoettcherChart::new(&n, i, &tol), Err(Error::NotSuperattracting(_))));
    }

    #[test]
    fn fixed_ray_lands_at_infinity_and_is_invariant() {
        let n = cubic();
        let tol = Tolerances::default();
        let ch = BoettcherChart::new(&n, 0, &tol).unwrap();
        let rays = trace_fixed_rays(&n.map, &ch, &tol).unwrap();
        assert_eq!(rays.len(), 1);
        let ray = &rays[0];
        assert!(ray.curve.pts.last().unwrap().is_infinite());
        let step = (ray.curve.len() / 50).max(1);
        for i in (1..ray.curve.len() - 1).step_by(step) {
            let img = n.map.eval(ray.curve.pts[i]);
            let d = crate::sphere::chordal_to_polyline(img, &ray.curve.pts);
            assert!(d < 1e-8, "image off the ray by {d}");
        }
    }

    #[test]
    fn half_level_equipotential() {
        let n = cubic();
        let tol = Tolerances::default();
        let one = n.root_near(C64::new(1.0, 0.0), 1e-9).unwrap();
        let ch = BoettcherChart::new(&n, one, &tol).unwrap();
        let e = trace_equipotential(&n.map, &ch, -1.0, &tol).unwrap();
        assert_eq!(winding_number(&e.curve.pts, C64::new(1.0, 0.0)), 1);
        for p in e.curve.pts.iter().step_by(7) {
            let g = ch.potential(&n.map, *p, 200).unwrap();
            assert!((g.exp2() - 0.5).abs() < 1e-6, "level {}", g.exp2());
        }
        assert!(trace_equipotential(&n.map, &ch, 0.0, &tol).is_err());
    }
}
