//! Newton maps, fixed-point multipliers and Head's characterization.

use crate::error::{Error, Result};
use crate::poly::ComplexPolynomial;
use crate::rational::RationalMap;
use crate::roots::{self, Cluster};
use crate::sphere::{Point, C64};
use crate::tolerances::Tolerances;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub position: C64,
    pub multiplicity: usize,
}

/// A polynomial together with its reduced Newton map and critical data.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NewtonMapDescriptor {
    pub source: ComplexPolynomial,
    pub map: RationalMap,
    /// Distinct roots sorted by real then imaginary part.
    pub roots: Vec<Root>,
    /// Degree of the Newton map; equals the number of distinct roots.
    pub degree: usize,
    pub critical_points: Vec<(Point, usize)>,
    pub poles: Vec<(C64, usize)>,
}

/// Roots of `p` with multiplicities.
pub fn polynomial_roots(p: &ComplexPolynomial, tol: &Tolerances) -> Vec<Cluster> {
    let r = p.roots();
    let mut cl = roots::cluster(p.coefficients(), &r, tol.cluster_eps);
    roots::sort_clusters(&mut cl);
    cl
}

/// The reduced rational form of z - p/p'.
pub fn newton_map(p: &ComplexPolynomial, tol: &Tolerances) -> Result<NewtonMapDescriptor> {
    if p.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    if p.degree() < 2 {
        return Err(Error::DegreeTooSmall { distinct: p.degree() });
    }
    let clusters = polynomial_roots(p, tol);
    if clusters.len() < 3 {
        return Err(Error::DegreeTooSmall { distinct: clusters.len() });
    }
    let dp = p.derivative();
    let map = if clusters.iter().all(|c| c.multiplicity == 1) {
        // gcd(p, p') = 1: exact coefficients.
        RationalMap::new_unchecked(ComplexPolynomial::z().mul(&dp).sub(p), dp)
    } else {
        // p/p' = R/S with R the square-free part and S = sum m_i prod_{j != i} (z - xi_j).
        let centers: Vec<C64> = clusters.iter().map(|c| c.center).collect();
        let r = ComplexPolynomial::from_roots(&centers);
        let mut s = ComplexPolynomial::zero();
        for (i, c) in clusters.iter().enumerate() {
            let others: Vec<C64> = centers.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, z)| *z).collect();
            s = s.add(&ComplexPolynomial::from_roots(&others).scale(C64::new(c.multiplicity as f64, 0.0)));
        }
        RationalMap::new_unchecked(ComplexPolynomial::z().mul(&s).sub(&r), s)
    };
    let degree = clusters.len();
    let critical_points = map.critical_points(tol.cluster_eps);
    let den = map.denominator().clone();
    let mut poles: Vec<(C64, usize)> = roots::cluster(den.coefficients(), &den.roots(), tol.cluster_eps)
        .into_iter()
        .map(|c| (c.center, c.multiplicity))
        .collect();
    poles.sort_by(|a, b| crate::rational::cmp_points(&Point::Finite(a.0), &Point::Finite(b.0)));
    Ok(NewtonMapDescriptor {
        source: p.clone(),
        map,
        roots: clusters.iter().map(|c| Root { position: c.center, multiplicity: c.multiplicity }).collect(),
        degree,
        critical_points,
        poles,
    })
}

impl NewtonMapDescriptor {
    /// N'(xi) at a fixed point; infinity is read in the chart w = 1/z.
    pub fn multiplier_at_fixed_point(&self, xi: Point, tol: &Tolerances) -> Result<C64> {
        let img = self.map.eval(xi);
        let residual = xi.chordal(&img);
        if !(residual <= tol.fixpoint_eps.max(1e-12)) {
            return Err(Error::NotFixed { residual });
        }
        Ok(self.map.fixed_multiplier(xi))
    }

    /// Product of chart derivatives along a cycle.
    pub fn multiplier_of_orbit(&self, orbit: &[Point], tol: &Tolerances) -> Result<C64> {
        multiplier_of_orbit(&self.map, orbit, tol)
    }

    /// Index of the root nearest to `z` within `eps`.
    pub fn root_near(&self, z: C64, eps: f64) -> Option<usize> {
        self.roots
            .iter()
            .position(|r| (r.position - z).norm() <= eps * (1.0 + r.position.norm()))
    }

    /// Local degree of the Newton map at a root (1 + critical multiplicity).
    pub fn local_degree_at_root(&self, i: usize) -> usize {
        let xi = Point::Finite(self.roots[i].position);
        1 + self
            .critical_points
            .iter()
            .filter(|(c, _)| c.chordal(&xi) < 1e-7)
            .map(|c| c.1)
            .sum::<usize>()
    }

    /// Critical points of N that are not roots.
    pub fn free_critical_points(&self) -> Vec<(Point, usize)> {
        self.critical_points
            .iter()
            .filter(|(c, _)| match c {
                Point::Finite(z) => self.root_near(*z, 1e-7).is_none(),
                Point::Infinity => true,
            })
            .copied()
            .collect()
    }
}

/// Product of chart derivatives along a cycle of any rational map.
pub fn multiplier_of_orbit(map: &RationalMap, orbit: &[Point], tol: &Tolerances) -> Result<C64> {
    if orbit.is_empty() {
        return Err(Error::NotPeriodic { residual: f64::INFINITY });
    }
    let n = orbit.len();
    let mut residual: f64 = 0.0;
    for i in 0..n {
        residual = residual.max(map.eval(orbit[i]).chordal(&orbit[(i + 1) % n]));
    }
    if !(residual <= tol.fixpoint_eps.max(1e-12) * 100.0) {
        return Err(Error::NotPeriodic { residual });
    }
    let mut mu = C64::new(1.0, 0.0);
    for i in 0..n {
        let (src, u) = orbit[i].chart();
        let (dst, _) = orbit[(i + 1) % n].chart();
        let (_, d) = map.pair(src, dst).eval_d(u);
        mu *= d;
    }
    Ok(mu)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FixedPointWitness {
    pub point: Point,
    pub multiplier: C64,
    /// Matched integer m with multiplier (m-1)/m; `None` when no m fits.
    pub matched_m: Option<u32>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HeadReport {
    pub is_newton: bool,
    pub infinity_fixed: bool,
    pub infinity_multiplier: Option<C64>,
    pub witnesses: Vec<FixedPointWitness>,
}

/// Head's theorem: f is a Newton map iff infinity is a repelling fixed point and every
/// finite fixed point has multiplier (m-1)/m for a positive integer m.
pub fn head_check(f: &RationalMap, tol: &Tolerances) -> Result<HeadReport> {
    let d = f.degree();
    if d < 3 {
        return Err(Error::DegreeTooSmall { distinct: d });
    }
    let (p, q) = (f.numerator(), f.denominator());
    let fix = p.sub(&ComplexPolynomial::z().mul(q)).trimmed(1e-14);
    let infinity_fixed = fix.degree() < d + 1;
    let infinity_multiplier = if infinity_fixed {
        Some(f.fixed_multiplier(Point::Infinity))
    } else {
        None
    };
    let r = fix.roots();
    let mut cl = roots::cluster(fix.coefficients(), &r, tol.cluster_eps);
    roots::sort_clusters(&mut cl);
    let witnesses: Vec<FixedPointWitness> = cl
        .iter()
        .map(|c| {
            let mu = f.derivative(c.center);
            FixedPointWitness { point: Point::Finite(c.center), multiplier: mu, matched_m: match_m(mu, tol.root_eps) }
        })
        .collect();
    let repelling = infinity_multiplier.is_some_and(|m| m.norm() > 1.0 + tol.band);
    let is_newton = repelling && witnesses.iter().all(|w| w.matched_m.is_some());
    Ok(HeadReport { is_newton, infinity_fixed, infinity_multiplier, witnesses })
}

/// Integer m >= 1 with |mu - (m-1)/m| < eps, if any.
pub fn match_m(mu: C64, eps: f64) -> Option<u32> {
    let one = C64::new(1.0, 0.0);
    if (one - mu).norm() < 1e-300 {
        return None;
    }
    let est = (one / (one - mu)).re;
    if !(est.is_finite() && est > 0.5 && est < 1e6) {
        return None;
    }
    let m = est.round().max(1.0);
    let target = (m - 1.0) / m;
    if (mu - C64::new(target, 0.0)).norm() < eps {
        Some(m as u32)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn z3_minus_1_map() {
        let p = ComplexPolynomial::from_real(&[-1.0, 0.0, 0.0, 1.0]);
        let n = newton_map(&p, &tol()).unwrap();
        assert_eq!(n.degree, 3);
        assert_eq!(n.map.numerator(), &ComplexPolynomial::from_real(&[1.0, 0.0, 0.0, 2.0]));
        assert_eq!(n.map.denominator(), &ComplexPolynomial::from_real(&[0.0, 0.0, 3.0]));
        assert_eq!(n.poles.len(), 1);
        assert_eq!(n.poles[0].1, 2);
        assert!(n.poles[0].0.norm() < 1e-7);
    }

    #[test]
    fn degenerate_inputs() {
        let p = ComplexPolynomial::from_real(&[1.0, -2.0, 1.0]);
        assert!(matches!(newton_map(&p, &tol()), Err(Error::DegreeTooSmall { .. })));
        assert!(matches!(newton_map(&ComplexPolynomial::zero(), &tol()), Err(Error::ZeroPolynomial)));
    }

    #[test]
    fn cubic_with_cycle_critical_points() {
        let p = ComplexPolynomial::from_real(&[2.0, -2.0, 0.0, 1.0]);
        let n = newton_map(&p, &tol()).unwrap();
        assert_eq!(n.critical_points.len(), 4);
        assert!(n.critical_points.iter().any(|(c, _)| c.chordal(&Point::new(0.0, 0.0)) < 1e-12));
        let free = n.free_critical_points();
        assert_eq!(free.len(), 1);
        let mu = n.multiplier_of_orbit(&[Point::new(0.0, 0.0), Point::new(1.0, 0.0)], &tol()).unwrap();
        assert!(mu.norm() < 1e-15);
    }

    #[test]
    fn double_root_multiplier() {
        let i = C64::new(0.0, 1.0);
        let one = C64::new(1.0, 0.0);
        let p = ComplexPolynomial::from_roots(&[one, one, i, -i]);
        let n = newton_map(&p, &tol()).unwrap();
        let k = n.root_near(one, 1e-6).unwrap();
        assert_eq!(n.roots[k].multiplicity, 2);
        let mu = n.multiplier_at_fixed_point(Point::Finite(n.roots[k].position), &tol()).unwrap();
        assert!((mu - 0.5).norm() < 1e-12);
        let inf = n.multiplier_at_fixed_point(Point::Infinity, &tol()).unwrap();
        assert!((inf - C64::new(4.0 / 3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn head_examples() {
        let p = ComplexPolynomial::from_real(&[-1.0, 0.0, 0.0, 1.0]);
        let n = newton_map(&p, &tol()).unwrap();
        let h = head_check(&n.map, &tol()).unwrap();
        assert!(h.is_newton);
        assert_eq!(h.witnesses.len(), 3);
        assert!(h.witnesses.iter().all(|w| w.matched_m == Some(1)));
        let cube = RationalMap::new(ComplexPolynomial::from_real(&[0.0, 0.0, 0.0, 1.0]), ComplexPolynomial::one()).unwrap();
        assert!(!head_check(&cube, &tol()).unwrap().is_newton);
        // z^3/(z^2+1) + 1
        let f = RationalMap::new(ComplexPolynomial::from_real(&[1.0, 0.0, 1.0, 1.0]), ComplexPolynomial::from_real(&[1.0, 0.0, 1.0])).unwrap();
        let h = head_check(&f, &tol()).unwrap();
        assert!(!h.is_newton);
        assert!(h.witnesses.iter().any(|w| w.matched_m.is_none()));
    }

    #[test]
    fn match_m_grid() {
        assert_eq!(match_m(C64::new(0.0, 0.0), 1e-9), Some(1));
        assert_eq!(match_m(C64::new(2.0 / 3.0, 0.0), 1e-9), Some(3));
        assert_eq!(match_m(C64::new(0.3, 0.1), 1e-9), None);
        assert_eq!(match_m(C64::new(1.0, 0.0), 1e-9), None);
    }
}
