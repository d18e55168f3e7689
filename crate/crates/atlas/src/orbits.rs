//! Periodic orbit search, multiplier classification and the non-repelling count.

use crate::error::{Error, Result};
use crate::rational::{cmp_points, RationalMap};
use crate::sphere::{Chart, Point, C64};
use crate::tolerances::Tolerances;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "kebab-case")]
pub enum OrbitClass {
    Superattracting,
    Attracting,
    Parabolic,
    IrrationallyIndifferent,
    Repelling,
}

impl OrbitClass {
    pub fn is_repelling(self) -> bool {
        self == OrbitClass::Repelling
    }

    pub fn is_indifferent(self) -> bool {
        matches!(self, OrbitClass::Parabolic | OrbitClass::IrrationallyIndifferent)
    }
}

/// Class of a multiplier plus a flag for near-indifferent values whose subclass is uncertain.
pub fn classify(mu: C64, tol: &Tolerances) -> (OrbitClass, bool) {
    let r = mu.norm();
    if r < 1e-9 {
        return (OrbitClass::Superattracting, false);
    }
    if r < 1.0 - tol.band {
        return (OrbitClass::Attracting, false);
    }
    if r <= 1.0 + tol.band {
        let turns = mu.arg() / std::f64::consts::TAU;
        let mut best = f64::INFINITY;
        for q in 1..=tol.max_unity_order {
            let x = turns * q as f64;
            best = best.min((x - x.round()).abs() / q as f64);
        }
        if best <= tol.angle_eps {
            return (OrbitClass::Parabolic, false);
        }
        // Within a thousand angle tolerances of a low-order root of unity: undecided.
        let flagged = best <= 1e3 * tol.angle_eps;
        return (OrbitClass::IrrationallyIndifferent, flagged);
    }
    (OrbitClass::Repelling, false)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub points: Vec<Point>,
    pub period: usize,
    pub multiplier: C64,
    pub class: OrbitClass,
    /// Indifferent, but too close to a root of unity to call the subclass reliably.
    pub flagged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PeriodCoverage {
    pub period: usize,
    /// Distinct points of exact period found.
    pub found: usize,
    /// Points of period dividing `period` found, against the count d^k + 1 on the sphere.
    pub found_dividing: usize,
    pub expected_dividing: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitInventory {
    pub orbits: Vec<PeriodicOrbit>,
    pub max_period: usize,
    pub nonrepelling_count: usize,
    pub critical_orbit_count: usize,
    pub coverage: Vec<PeriodCoverage>,
}

impl OrbitInventory {
    pub fn nonrepelling(&self) -> impl Iterator<Item = (usize, &PeriodicOrbit)> {
        self.orbits.iter().enumerate().filter(|(_, o)| !o.class.is_repelling())
    }
}

/// Rectangle of seeds, `resolution` per side.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SeedGrid {
    pub center: C64,
    pub half_width: f64,
    pub resolution: usize,
}

impl SeedGrid {
    /// Covers `points` with margin factor 2.
    pub fn covering(points: &[C64], resolution: usize) -> SeedGrid {
        let n = points.len().max(1) as f64;
        let center = points.iter().sum::<C64>() / n;
        let extent = points.iter().map(|p| (p - center).re.abs().max((p - center).im.abs())).fold(0.0, f64::max);
        SeedGrid { center, half_width: 2.0 * extent + 1.0, resolution }
    }

    pub fn points(&self) -> Vec<C64> {
        let n = self.resolution.max(1);
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                // Half-cell offset plus a small irrational shift keeps seeds off symmetry axes.
                let x = -1.0 + (2.0 * i as f64 + 1.0 + 0.0137) / n as f64;
                let y = -1.0 + (2.0 * j as f64 + 1.0 + 0.0291) / n as f64;
                out.push(self.center + C64::new(x, y) * self.half_width);
            }
        }
        out
    }
}

/// Inputs to the orbit search beyond the map itself.
pub struct OrbitSearch<'a> {
    pub map: &'a RationalMap,
    pub critical_points: &'a [(Point, usize)],
    /// Extra seeds, e.g. roots.
    pub anchors: &'a [C64],
    pub max_period: usize,
    pub grid: SeedGrid,
    /// Report infinity as a period-1 orbit when it is fixed.
    pub include_infinity: bool,
}

struct Candidate {
    point: C64,
    err: f64,
}

/// f^k(z) and its derivative in the z chart; `None` on escape.
fn iterate_d(map: &RationalMap, z: C64, k: usize) -> Option<(C64, C64)> {
    let pr = map.pair(Chart::Z, Chart::Z);
    let mut w = z;
    let mut d = C64::new(1.0, 0.0);
    for _ in 0..k {
        let (v, dv) = pr.eval_d(w);
        if !(v.re.is_finite() && v.im.is_finite() && dv.re.is_finite() && dv.im.is_finite()) || v.norm() > 1e10 {
            return None;
        }
        d *= dv;
        w = v;
    }
    Some((w, d))
}

/// Multiple root of f^k(z) - z as the simple root of (f^k)'(z) - 1 near `z0`.
/// The second derivative is a central difference.
fn polish_multiple(map: &RationalMap, z0: C64, k: usize, radius: f64) -> Option<C64> {
    let h = 1e-6;
    let g = |z: C64| iterate_d(map, z, k).map(|(_, d)| d - 1.0);
    let mut z = z0;
    for _ in 0..50 {
        let v = g(z)?;
        let dv = (g(z + h)? - g(z - h)?) / (2.0 * h);
        let step = v / dv;
        if !(step.re.is_finite() && step.im.is_finite()) {
            return None;
        }
        z -= step;
        if (z - z0).norm() > radius {
            return None;
        }
        if step.norm() < 1e-15 * z.norm().max(1.0) {
            break;
        }
    }
    let (w, _) = iterate_d(map, z, k)?;
    ((w - z).norm() < radius * radius).then_some(z)
}

fn newton_periodic(map: &RationalMap, seed: C64, k: usize) -> Option<Candidate> {
    let mut z = seed;
    let mut last = f64::INFINITY;
    for _ in 0..80 {
        let (w, d) = iterate_d(map, z, k)?;
        let den = d - 1.0;
        if den.norm() < 1e-300 {
            break;
        }
        let step = (w - z) / den;
        if !(step.re.is_finite() && step.im.is_finite()) {
            return None;
        }
        // Damp very large steps.
        let step = if step.norm() > 1.0 + z.norm() { step * ((1.0 + z.norm()) / step.norm()) } else { step };
        z -= step;
        last = step.norm();
        if last <= 1e-15 * (1.0 + z.norm()) {
            break;
        }
    }
    let (w, _) = iterate_d(map, z, k)?;
    Some(Candidate { point: z, err: last.max((w - z).norm()) })
}

fn divisors(k: usize) -> Vec<usize> {
    (1..k).filter(|j| k.is_multiple_of(*j)).collect()
}

/// Periodic orbits up to `max_period` by Newton iteration on f^k(z) - z from seeds.
pub fn find_periodic_orbits(search: &OrbitSearch, tol: &Tolerances) -> Result<OrbitInventory> {
    if search.max_period == 0 {
        return Err(Error::Precondition("max_period must be at least 1".into()));
    }
    let map = search.map;
    let mut seeds = search.grid.points();
    for (c, _) in search.critical_points {
        if let Point::Finite(z) = c {
            seeds.push(*z);
            // Late iterates land near attracting cycles.
            let mut w = Point::Finite(*z);
            w = map.iterate(w, 400);
            for _ in 0..2 * search.max_period {
                if let Point::Finite(v) = w {
                    seeds.push(v);
                }
                w = map.eval(w);
            }
        }
    }
    for &a in search.anchors {
        seeds.push(a);
        for j in 0..4 {
            seeds.push(a + C64::from_polar(1e-3, 0.3 + j as f64 * std::f64::consts::FRAC_PI_2));
        }
    }
    // (point, period, error)
    let mut found: Vec<(C64, usize, f64)> = Vec::new();
    let mut members: Vec<Vec<C64>> = Vec::new();
    let dedup = |found: &Vec<(C64, usize, f64)>, z: C64, err: f64| -> bool {
        found.iter().any(|(p, _, e)| {
            Point::Finite(*p).chordal(&Point::Finite(z)) < (10.0 * tol.fixpoint_eps).max(4.0 * (err + e))
        })
    };
    let mut coverage = Vec::new();
    for k in 1..=search.max_period {
        let cands: Vec<Option<Candidate>> = seeds.par_iter().map(|&s| newton_periodic(map, s, k)).collect();
        let mut exact = 0;
        for c in cands.into_iter().flatten() {
            let z = c.point;
            let Some((w, _)) = iterate_d(map, z, k) else { continue };
            let resid = Point::Finite(w).chordal(&Point::Finite(z));
            let accept = (10.0 * tol.fixpoint_eps).max(4.0 * c.err);
            if !(resid <= accept) || c.err > 1e-5 {
                continue;
            }
            // Minimal period: reject points fixed by a proper divisor.
            let lower = divisors(k).into_iter().any(|j| match iterate_d(map, z, j) {
                Some((v, _)) => Point::Finite(v).chordal(&Point::Finite(z)) < accept.max(1e-9),
                None => false,
            });
            // A cycle collapsed onto a parabolic point of lower period is that point.
            let collapsed = found.iter().any(|(p, j, _)| *j < k && k % j == 0 && (p - z).norm() < tol.cluster_eps);
            if lower || collapsed || dedup(&found, z, c.err) {
                continue;
            }
            // Same-period points closer than cluster_eps are a split multiple root.
            if let Some(i) = found.iter().position(|(p, j, _)| *j == k && (p - z).norm() < tol.cluster_eps) {
                members[i].push(z);
                continue;
            }
            found.push((z, k, c.err));
            members.push(Vec::new());
            exact += 1;
        }
        for i in 0..found.len() {
            if found[i].1 == k && !members[i].is_empty() {
                let n = members[i].len() as f64 + 1.0;
                let mean = (found[i].0 + members[i].iter().sum::<C64>()) / n;
                if let Some(z) = polish_multiple(map, mean, k, tol.cluster_eps) {
                    found[i] = (z, k, 0.0);
                }
            }
        }
        let dividing: usize = found.iter().filter(|(_, p, _)| k % p == 0).map(|(_, p, _)| *p).sum::<usize>()
            + usize::from(search.include_infinity);
        coverage.push(PeriodCoverage {
            period: k,
            found: exact,
            found_dividing: dividing,
            expected_dividing: map.degree().pow(k as u32) + 1,
        });
    }
    // Group points into cycles.
    let mut used = vec![false; found.len()];
    let mut orbits = Vec::new();
    for i in 0..found.len() {
        if used[i] {
            continue;
        }
        let (z, k, err) = found[i];
        let mut pts = vec![Point::Finite(z)];
        let mut w = Point::Finite(z);
        for _ in 1..k {
            w = map.eval(w);
            pts.push(w);
        }
        for (j, f) in found.iter().enumerate() {
            if !used[j] && f.1 == k && pts.iter().any(|p| p.chordal(&Point::Finite(f.0)) < (10.0 * tol.fixpoint_eps).max(4.0 * (err + f.2) + 1e-9)) {
                used[j] = true;
            }
        }
        orbits.push(make_orbit(map, pts, tol));
    }
    if search.include_infinity && map.eval(Point::Infinity) == Point::Infinity {
        orbits.push(make_orbit(map, vec![Point::Infinity], tol));
    }
    orbits.sort_by(|a, b| a.period.cmp(&b.period).then(cmp_points(&a.points[0], &b.points[0])));
    let nonrepelling_count = orbits.iter().filter(|o| !o.class.is_repelling()).count();
    let critical_orbit_count = critical_orbit_classes(map, search.critical_points).iter().max().map_or(0, |m| m + 1);
    Ok(OrbitInventory { orbits, max_period: search.max_period, nonrepelling_count, critical_orbit_count, coverage })
}

fn make_orbit(map: &RationalMap, mut pts: Vec<Point>, tol: &Tolerances) -> PeriodicOrbit {
    let start = (0..pts.len()).min_by(|&a, &b| cmp_points(&pts[a], &pts[b])).unwrap_or(0);
    pts.rotate_left(start);
    let n = pts.len();
    let mut mu = C64::new(1.0, 0.0);
    for i in 0..n {
        let (src, u) = pts[i].chart();
        let (dst, _) = pts[(i + 1) % n].chart();
        mu *= map.pair(src, dst).eval_d(u).1;
    }
    let (class, flagged) = classify(mu, tol);
    PeriodicOrbit { period: n, points: pts, multiplier: mu, class, flagged }
}

/// Class index per critical point; two critical points share a class when one lies
/// on the forward orbit of the other.
pub fn critical_orbit_classes(map: &RationalMap, critical: &[(Point, usize)]) -> Vec<usize> {
    let n = critical.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..n {
        let mut w = critical[i].0;
        for _ in 0..200 {
            w = map.eval(w);
            for j in 0..n {
                if j != i && w.chordal(&critical[j].0) < 1e-8 {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut ids = vec![usize::MAX; n];
    let mut next = 0;
    let mut out = vec![0; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if ids[r] == usize::MAX {
            ids[r] = next;
            next += 1;
        }
        out[i] = ids[r];
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FsCountReport {
    pub nonrepelling: usize,
    pub critical_orbits: usize,
    pub bound: usize,
    pub per_class: Vec<(OrbitClass, usize)>,
    pub pass: bool,
}

/// Checks nonrepelling <= critical orbits <= 2d - 2.
pub fn fatou_shishikura_count(inv: &OrbitInventory, degree: usize) -> Result<FsCountReport> {
    let bound = 2 * degree.max(1) - 2;
    let mut per_class: Vec<(OrbitClass, usize)> = Vec::new();
    for o in &inv.orbits {
        match per_class.iter_mut().find(|c| c.0 == o.class) {
            Some(c) => c.1 += 1,
            None => per_class.push((o.class, 1)),
        }
    }
    per_class.sort();
    let pass = inv.nonrepelling_count <= inv.critical_orbit_count && inv.critical_orbit_count <= bound;
    let report = FsCountReport { nonrepelling: inv.nonrepelling_count, critical_orbits: inv.critical_orbit_count, bound, per_class, pass };
    if !pass {
        return Err(Error::BoundViolated(format!(
            "{} non-repelling cycles, {} critical orbits, bound {}",
            inv.nonrepelling_count, inv.critical_orbit_count, bound
        )));
    }
    Ok(report)
}

/// Orbit search for a Newton map with the default seed grid.
pub fn newton_orbits(n: &crate::newton::NewtonMapDescriptor, max_period: usize, resolution: usize, tol: &Tolerances) -> Result<OrbitInventory> {
    let mut pts: Vec<C64> = n.roots.iter().map(|r| r.position).collect();
    pts.extend(n.critical_points.iter().filter_map(|c| c.0.finite()));
    let anchors: Vec<C64> = n.roots.iter().map(|r| r.position).collect();
    let search = OrbitSearch {
        map: &n.map,
        critical_points: &n.critical_points,
        anchors: &anchors,
        max_period,
        grid: SeedGrid::covering(&pts, resolution),
        include_infinity: true,
    };
    find_periodic_orbits(&search, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::newton::newton_map;
    use crate::poly::ComplexPolynomial;

    #[test]
    fn classify_examples() {
        let t = Tolerances::default();
        assert_eq!(classify(C64::new(0.0, 0.0), &t).0, OrbitClass::Superattracting);
        assert_eq!(classify(C64::new(0.5, 0.0), &t).0, OrbitClass::Attracting);
        assert_eq!(classify(C64::new(1.5, 0.0), &t).0, OrbitClass::Repelling);
        assert_eq!(classify(C64::from_polar(1.0, std::f64::consts::TAU / 3.0), &t).0, OrbitClass::Parabolic);
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        assert_eq!(classify(C64::from_polar(1.0, std::f64::consts::TAU * golden), &t).0, OrbitClass::IrrationallyIndifferent);
    }

    #[test]
    fn z3_minus_1_fixed_points() {
        let t = Tolerances::default();
        let n = newton_map(&ComplexPolynomial::from_real(&[-1.0, 0.0, 0.0, 1.0]), &t).unwrap();
        let inv = newton_orbits(&n, 1, 16, &t).unwrap();
        assert_eq!(inv.orbits.len(), 4);
        assert_eq!(inv.orbits.iter().filter(|o| o.class == OrbitClass::Superattracting).count(), 3);
        assert_eq!(inv.orbits[3].points[0], Point::Infinity);
        assert_eq!(inv.orbits[3].class, OrbitClass::Repelling);
    }

    #[test]
    fn z3_2z_2_two_cycle() {
        let t = Tolerances::default();
        let n = newton_map(&ComplexPolynomial::from_real(&[2.0, -2.0, 0.0, 1.0]), &t).unwrap();
        let inv = newton_orbits(&n, 2, 16, &t).unwrap();
        let two: Vec<_> = inv.orbits.iter().filter(|o| o.period == 2 && !o.class.is_repelling()).collect();
        assert_eq!(two.len(), 1);
        assert_eq!(two[0].class, OrbitClass::Superattracting);
        assert!(two[0].points[0].chordal(&Point::new(0.0, 0.0)) < 1e-12);
        assert!(two[0].points[1].chordal(&Point::new(1.0, 0.0)) < 1e-12);
        let rep = fatou_shishikura_count(&inv, 3).unwrap();
        assert_eq!(rep.nonrepelling, 4);
        assert_eq!(rep.critical_orbits, 4);
    }

    #[test]
    fn zero_period_rejected() {
        let t = Tolerances::default();
        let n = newton_map(&ComplexPolynomial::from_real(&[-1.0, 0.0, 0.0, 1.0]), &t).unwrap();
        assert!(newton_orbits(&n, 0, 4, &t).is_err());
    }
}
