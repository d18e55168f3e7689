//! Critical orbits for non-repelling cycles: association, separation and the
//! polynomial perturbation check.

use crate::basin::winding_number;
use crate::error::{Error, Result};
use crate::graph::PlanarGraph;
use crate::newton::NewtonMapDescriptor;
use crate::newton_graph::{is_subset, Atlas, Augmented};
use crate::orbits::{classify, critical_orbit_classes, find_periodic_orbits, OrbitClass, OrbitInventory, OrbitSearch, SeedGrid};
use crate::poly::ComplexPolynomial;
use crate::puzzle::{PuzzleEngine, MAX_LEVELS};
use crate::rational::{cmp_points, RationalMap};
use crate::renorm::PolynomialLikeRestriction;
use crate::sphere::{chordal, Point, C64};
use crate::tolerances::Tolerances;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Evidence {
    CriticalInImmediateBasin,
    CriticalInFiber,
    CriticalOrbitConverges,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Pair {
    /// Index into the orbit inventory.
    pub orbit: usize,
    pub critical_orbit: usize,
    pub critical_point: Point,
    pub evidence: Evidence,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CertificateKind {
    GraphFace {
        /// Level of the truncated graph whose faces separate the orbits.
        level: usize,
        faces_a: Vec<usize>,
        faces_b: Vec<usize>,
        /// Smallest m with the Newton graph at level m containing the augmented graph at `level`.
        newton_level: Option<usize>,
        /// The orbits also lie in disjoint face sets of that Newton graph.
        newton_separated: bool,
    },
    SameFiber {
        /// Piece ids of the common nest, one list per depth.
        nest: Vec<Vec<usize>>,
        note: String,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeparationCertificate {
    pub a: usize,
    pub b: usize,
    pub certificate: CertificateKind,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InjectionReport {
    pub pairs: Vec<Pair>,
    pub certificates: Vec<SeparationCertificate>,
    /// Pairs of orbits for which no certificate was found, with the reason.
    pub undecided: Vec<(usize, usize, String)>,
    pub injective: bool,
}

/// Candidate critical points for one orbit, best first.
fn candidates(
    desc: &NewtonMapDescriptor,
    classes: &[usize],
    orbit: &crate::orbits::PeriodicOrbit,
    restrictions: &[PolynomialLikeRestriction],
    tol: &Tolerances,
) -> Vec<(usize, Evidence)> {
    let map = &desc.map;
    let crit = &desc.critical_points;
    let mut out: Vec<(usize, Evidence)> = Vec::new();
    let push = |i: usize, ev: Evidence, out: &mut Vec<(usize, Evidence)>| {
        if !out.iter().any(|(j, _)| classes[*j] == classes[i]) {
            out.push((i, ev));
        }
    };
    let by_mult_then_point = |a: &usize, b: &usize| crit[*b].1.cmp(&crit[*a].1).then(cmp_points(&crit[*a].0, &crit[*b].0));
    let on_orbit = |z: Point, eps: f64| orbit.points.iter().any(|p| chordal(*p, z) < eps);
    if orbit.period == 1 {
        if let Some(r) = orbit.points[0].finite().and_then(|z| desc.root_near(z, 1e3 * tol.cluster_eps)) {
            // The root itself when superattracting, then other critical points of its immediate basin.
            let mut own: Vec<usize> = (0..crit.len()).filter(|&i| chordal(crit[i].0, orbit.points[0]) < tol.cluster_eps).collect();
            own.sort_by(by_mult_then_point);
            for i in own {
                push(i, Evidence::CriticalInImmediateBasin, &mut out);
            }
            let mut basin: Vec<usize> = (0..crit.len())
                .filter(|&i| crate::basin::basin_of(desc, crit[i].0, tol.max_iter, tol) == Some(r))
                .collect();
            basin.sort_by(by_mult_then_point);
            for i in basin {
                push(i, Evidence::CriticalOrbitConverges, &mut out);
            }
            return out;
        }
    }
    for r in restrictions.iter().filter(|r| r.connected && on_orbit(r.center, 1e-9)) {
        let mut inside: Vec<usize> = (0..crit.len()).filter(|&i| r.in_u(crit[i].0)).collect();
        inside.sort_by(by_mult_then_point);
        for i in inside {
            push(i, Evidence::CriticalInFiber, &mut out);
        }
    }
    if !orbit.class.is_indifferent() || orbit.class == OrbitClass::Parabolic {
        let n = orbit.period;
        let mut conv: Vec<usize> = (0..crit.len())
            .filter(|&i| {
                let mut z = crit[i].0;
                (0..tol.max_iter).any(|_| {
                    z = map.iterate(z, n);
                    on_orbit(z, 1e-6)
                }) || on_orbit(crit[i].0, 1e-9)
            })
            .collect();
        conv.sort_by(by_mult_then_point);
        for i in conv {
            push(i, Evidence::CriticalOrbitConverges, &mut out);
        }
    }
    out
}

/// Distinct critical orbits for every non-repelling cycle, by depth-first search in orbit order.
fn assign(cands: &[(usize, Vec<(usize, Evidence)>)], classes: &[usize], k: usize, used: &mut BTreeSet<usize>, out: &mut Vec<(usize, Evidence)>) -> bool {
    if k == cands.len() {
        return true;
    }
    for &(i, ev) in &cands[k].1 {
        if used.insert(classes[i]) {
            out.push((i, ev));
            if assign(cands, classes, k + 1, used, out) {
                return true;
            }
            out.pop();
            used.remove(&classes[i]);
        }
    }
    false
}

/// Pairs each non-repelling cycle of `inv` with its own critical orbit.
pub fn associate_critical_orbits(
    desc: &NewtonMapDescriptor,
    inv: &OrbitInventory,
    restrictions: &[PolynomialLikeRestriction],
    tol: &Tolerances,
) -> Result<Vec<Pair>> {
    let classes = critical_orbit_classes(&desc.map, &desc.critical_points);
    let cands: Vec<(usize, Vec<(usize, Evidence)>)> =
        inv.nonrepelling().map(|(id, o)| (id, candidates(desc, &classes, o, restrictions, tol))).collect();
    if let Some((id, _)) = cands.iter().find(|c| c.1.is_empty()) {
        return Err(Error::NoAssociableCritical(*id));
    }
    let mut chosen = Vec::new();
    if !assign(&cands, &classes, 0, &mut BTreeSet::new(), &mut chosen) {
        return Err(Error::InjectivityFailure(format!("{} cycles compete for fewer critical orbits", cands.len())));
    }
    Ok(cands
        .iter()
        .zip(chosen)
        .map(|((id, _), (i, ev))| Pair { orbit: *id, critical_orbit: classes[i], critical_point: desc.critical_points[i].0, evidence: ev })
        .collect())
}

/// Faces of `g` containing `p`; all faces around it when it is a vertex.
fn faces_at(g: &PlanarGraph, p: Point) -> BTreeSet<usize> {
    if let Some(v) = (0..g.vertices.len()).find(|&v| chordal(g.vertices[v].pos, p) < 1e-9) {
        return g.rotation(v).iter().map(|&d| g.face_of_dart(d)).collect();
    }
    [g.locate_any(p)].into_iter().collect()
}

fn faces_of(g: &PlanarGraph, pts: &[Point]) -> BTreeSet<usize> {
    pts.iter().flat_map(|&p| faces_at(g, p)).collect()
}

/// Certificate that the orbits `a` and `b` are well separated.
#[allow(clippy::too_many_arguments)]
pub fn separation_certificate(
    atlas: &mut Atlas,
    aug: &mut Augmented,
    engine: &mut PuzzleEngine,
    ids: (usize, usize),
    a: &[Point],
    b: &[Point],
    max_level: usize,
) -> Result<SeparationCertificate> {
    let same = a.len() == b.len() && a.iter().all(|p| b.iter().any(|q| chordal(*p, *q) < 1e-9));
    if !same {
        for level in 0..=max_level.min(MAX_LEVELS) {
            let es = engine.trunc.level(atlas, level)?;
            let mut g = atlas.planar_graph(level, &es)?;
            g.build_locator();
            let (fa, fb) = (faces_of(&g, a), faces_of(&g, b));
            if fa.is_disjoint(&fb) {
                let plus = aug.level(atlas, level)?;
                let newton_level = (level..=MAX_LEVELS).find(|&m| atlas.newton_graph(m).is_ok_and(|d| is_subset(&plus, &d)));
                let newton_separated = match newton_level {
                    Some(m) => {
                        let es = atlas.newton_graph(m)?;
                        let mut g = atlas.planar_graph(m, &es)?;
                        g.build_locator();
                        faces_of(&g, a).is_disjoint(&faces_of(&g, b))
                    }
                    None => false,
                };
                return Ok(SeparationCertificate {
                    a: ids.0,
                    b: ids.1,
                    certificate: CertificateKind::GraphFace {
                        level,
                        faces_a: fa.into_iter().collect(),
                        faces_b: fb.into_iter().collect(),
                        newton_level,
                        newton_separated,
                    },
                });
            }
        }
    }
    // Same nest at every computable depth.
    let mut nest = Vec::new();
    let top = if same { 0 } else { engine.max_depth().unwrap_or(0) };
    for depth in 0..=top {
        let p = match engine.puzzle(atlas, depth) {
            Ok(p) => p,
            Err(Error::DepthExhausted(_)) => break,
            Err(e) => return Err(e),
        };
        let mut pa: BTreeSet<usize> = BTreeSet::new();
        for &z in a {
            pa.extend(p.pieces_containing(z).unwrap_or_default());
        }
        let mut pb: BTreeSet<usize> = BTreeSet::new();
        for &z in b {
            pb.extend(p.pieces_containing(z).unwrap_or_default());
        }
        if pa != pb {
            return Err(Error::Undecided(max_level));
        }
        nest.push(pa.into_iter().collect());
    }
    Ok(SeparationCertificate {
        a: ids.0,
        b: ids.1,
        certificate: CertificateKind::SameFiber {
            nest,
            note: "same polynomial-like restriction, ray-pair separation not computed".into(),
        },
    })
}

/// Re-checks a certificate independently of the graph locator.
pub fn revalidate(atlas: &mut Atlas, engine: &mut PuzzleEngine, cert: &SeparationCertificate, a: &[Point], b: &[Point]) -> Result<bool> {
    match &cert.certificate {
        CertificateKind::GraphFace { level, .. } => {
            let es = engine.trunc.level(atlas, *level)?;
            let g = atlas.planar_graph(*level, &es)?;
            // In the chart X = 1/(z - c) with c a point of b the faces holding a are bounded,
            // so winding numbers of their boundary walks decide membership.
            let c = b[0].finite().ok_or_else(|| Error::Precondition("orbit point at infinity".into()))?;
            let chart = |p: Point| match p.finite() {
                Some(z) if z != c => C64::new(1.0, 0.0) / (z - c),
                Some(_) => C64::new(f64::INFINITY, 0.0),
                None => C64::new(0.0, 0.0),
            };
            let walks: Vec<Vec<Point>> =
                (0..g.face_count()).map(|f| g.face_polyline(f).into_iter().map(|p| Point::Finite(chart(p))).collect()).collect();
            // Faces lie left of their darts: bounded walks wind +1, the walk of c's face winds -1.
            let holder = |z: Point| -> BTreeSet<usize> {
                (0..walks.len()).filter(|&f| winding_number(&walks[f], chart(z)) > 0).collect()
            };
            let fa: BTreeSet<usize> = a.iter().flat_map(|&z| holder(z)).collect();
            let fb: BTreeSet<usize> = b[1..].iter().flat_map(|&z| holder(z)).collect();
            Ok(a.iter().all(|&z| !holder(z).is_empty()) && fa.is_disjoint(&fb) && a.iter().all(|&z| holder(z).len() == 1))
        }
        CertificateKind::SameFiber { nest, .. } => {
            for (depth, ids) in nest.iter().enumerate() {
                let p = engine.puzzle(atlas, depth)?;
                for &z in a.iter().chain(b) {
                    let here = p.pieces_containing(z).unwrap_or_default();
                    if !here.iter().all(|i| ids.contains(i)) {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        }
    }
}

/// Associations plus certificates for all pairs of non-repelling cycles.
#[allow(clippy::too_many_arguments)]
pub fn injection_report(
    atlas: &mut Atlas,
    aug: &mut Augmented,
    engine: &mut PuzzleEngine,
    inv: &OrbitInventory,
    restrictions: &[PolynomialLikeRestriction],
    max_level: usize,
) -> Result<InjectionReport> {
    let desc = atlas.desc.clone();
    let tol = atlas.tol.clone();
    let pairs = associate_critical_orbits(&desc, inv, restrictions, &tol)?;
    let ids: Vec<usize> = inv.nonrepelling().map(|(i, _)| i).collect();
    let mut certificates = Vec::new();
    let mut undecided = Vec::new();
    for (x, &i) in ids.iter().enumerate() {
        for &j in &ids[x + 1..] {
            let (a, b) = (&inv.orbits[i].points, &inv.orbits[j].points);
            match separation_certificate(atlas, aug, engine, (i, j), a, b, max_level) {
                Ok(c) => certificates.push(c),
                Err(Error::Undecided(l)) => undecided.push((i, j, format!("undecided up to level {l}"))),
                Err(e) => return Err(e),
            }
        }
    }
    let crit: BTreeSet<usize> = pairs.iter().map(|p| p.critical_orbit).collect();
    let injective = crit.len() == pairs.len() && pairs.len() == ids.len();
    Ok(InjectionReport { pairs, certificates, undecided, injective })
}

/// Hermite data at one marked point.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HermiteNode {
    pub z: C64,
    /// Required derivative of the interpolant.
    pub slope: C64,
}

/// Minimal-degree q with q(z) = 0 and q'(z) = slope at every node.
pub fn hermite_vanishing(nodes: &[HermiteNode]) -> Result<ComplexPolynomial> {
    if nodes.is_empty() {
        return Ok(ComplexPolynomial::zero());
    }
    for (i, a) in nodes.iter().enumerate() {
        for b in &nodes[i + 1..] {
            if (a.z - b.z).norm() < 1e-8 * (1.0 + a.z.norm()) {
                return Err(Error::InterpolationIllConditioned(format!("nodes {} and {} coincide", a.z, b.z)));
            }
        }
    }
    // Divided differences on the doubled node list.
    let zs: Vec<C64> = nodes.iter().flat_map(|n| [n.z, n.z]).collect();
    let m = zs.len();
    let mut table: Vec<C64> = vec![C64::new(0.0, 0.0); m];
    let mut coef = vec![table[0]];
    let mut prev = table.clone();
    for order in 1..m {
        for i in 0..m - order {
            table[i] = if order == 1 && i % 2 == 0 {
                nodes[i / 2].slope
            } else {
                (prev[i + 1] - prev[i]) / (zs[i + order] - zs[i])
            };
        }
        coef.push(table[0]);
        prev = table.clone();
    }
    // Newton form to monomials.
    let mut q = ComplexPolynomial::zero();
    let mut basis = ComplexPolynomial::one();
    for (k, c) in coef.iter().enumerate() {
        q = q.add(&basis.scale(*c));
        basis = basis.mul(&ComplexPolynomial::new(vec![-zs[k], C64::new(1.0, 0.0)]));
    }
    Ok(q)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PerturbedCycle {
    pub period: usize,
    pub class: OrbitClass,
    pub multiplier: C64,
    pub perturbed_multiplier: C64,
    pub expected_multiplier: C64,
    pub relative_error: f64,
    pub periodicity_residual: f64,
    pub perturbed_class: OrbitClass,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PerturbationEntry {
    pub epsilon: f64,
    pub cycles: Vec<PerturbedCycle>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub base: ComplexPolynomial,
    pub marked: Vec<C64>,
    pub interpolant: ComplexPolynomial,
    pub entries: Vec<PerturbationEntry>,
    /// Wording of the stated law, for comparison with the tested μ(1+ε)^n.
    pub literal_law: String,
    pub pass: bool,
}

/// Marked cycles: the non-repelling, non-superattracting ones.
pub fn marked_cycles(inv: &OrbitInventory) -> Vec<&crate::orbits::PeriodicOrbit> {
    inv.orbits
        .iter()
        .filter(|o| !o.class.is_repelling() && o.class != OrbitClass::Superattracting && !o.points[0].is_infinite())
        .collect()
}

/// Checks the perturbation p + εq on the given cycles for each ε.
pub fn perturb_and_check(p: &ComplexPolynomial, cycles: &[Vec<C64>], eps_list: &[f64], tol: &Tolerances) -> Result<PerturbationReport> {
    let dp = p.derivative();
    let mult = |f: &ComplexPolynomial, pts: &[C64]| pts.iter().map(|&z| f.eval(z)).product::<C64>();
    let info: Vec<(Vec<C64>, C64, OrbitClass)> = cycles
        .iter()
        .map(|c| {
            let mu = mult(&dp, c);
            (c.clone(), mu, classify(mu, tol).0)
        })
        .collect();
    let nodes: Vec<HermiteNode> = info
        .iter()
        .flat_map(|(pts, _, class)| {
            let dp = &dp;
            pts.iter().map(move |&z| HermiteNode {
                z,
                slope: if *class == OrbitClass::Parabolic { C64::new(0.0, 0.0) } else { dp.eval(z) },
            })
        })
        .collect();
    let q = hermite_vanishing(&nodes)?;
    let mut entries = Vec::new();
    for &eps in eps_list {
        let pe = p.add(&q.scale(C64::new(eps, 0.0)));
        let dpe = pe.derivative();
        let cycles: Vec<PerturbedCycle> = info
            .iter()
            .map(|(pts, mu, class)| {
                let n = pts.len();
                let mut z = pts[0];
                for _ in 0..n {
                    z = pe.eval(z);
                }
                let scale = pts.iter().map(|w| w.norm()).fold(1.0, f64::max);
                let periodicity_residual = (z - pts[0]).norm() / scale;
                let perturbed = mult(&dpe, pts);
                let expected = if *class == OrbitClass::Parabolic { *mu } else { mu * (1.0 + eps).powi(n as i32) };
                let relative_error = (perturbed - expected).norm() / expected.norm().max(1e-300);
                PerturbedCycle {
                    period: n,
                    class: *class,
                    multiplier: *mu,
                    perturbed_multiplier: perturbed,
                    expected_multiplier: expected,
                    relative_error,
                    periodicity_residual,
                    perturbed_class: classify(perturbed, tol).0,
                }
            })
            .collect();
        let pass = cycles.iter().all(|c| {
            c.relative_error < 1e-10
                && c.periodicity_residual < 1e-12
                && !(eps < 0.0 && c.class == OrbitClass::IrrationallyIndifferent && c.perturbed_class != OrbitClass::Attracting)
        });
        entries.push(PerturbationEntry { epsilon: eps, cycles, pass });
    }
    let pass = entries.iter().all(|e| e.pass);
    Ok(PerturbationReport {
        base: p.clone(),
        marked: nodes.iter().map(|n| n.z).collect(),
        interpolant: q,
        entries,
        literal_law: "still periodic orbits of period n with multiplier (1+ε)^n".into(),
        pass,
    })
}

/// Periodic orbits of a polynomial in the plane.
pub fn polynomial_orbits(p: &ComplexPolynomial, max_period: usize, resolution: usize, tol: &Tolerances) -> Result<OrbitInventory> {
    if p.degree() < 2 {
        return Err(Error::Precondition("polynomial degree must be at least 2".into()));
    }
    let map = RationalMap::new(p.clone(), ComplexPolynomial::one())?;
    let crit: Vec<(Point, usize)> = map.critical_points(tol.cluster_eps).into_iter().filter(|c| !c.0.is_infinite()).collect();
    // Every bounded orbit lies in the disk of escape radius 1 + max|a_i / a_d|.
    let lead = p.leading().norm();
    let radius = 1.0 + (0..p.degree()).map(|i| p.coeff(i).norm() / lead).fold(0.0, f64::max);
    let grid = SeedGrid { center: C64::new(0.0, 0.0), half_width: radius, resolution };
    let search = OrbitSearch { map: &map, critical_points: &crit, anchors: &[], max_period, grid, include_infinity: false };
    find_periodic_orbits(&search, tol)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolynomialCount {
    pub degree: usize,
    pub max_period: usize,
    pub nonrepelling: usize,
    pub per_class: Vec<(OrbitClass, usize)>,
    pub pass: bool,
}

/// Finite non-repelling cycles of a polynomial, at most d - 1 of them.
pub fn polynomial_fs_count(p: &ComplexPolynomial, max_period: usize, tol: &Tolerances) -> Result<PolynomialCount> {
    let inv = polynomial_orbits(p, max_period, 48, tol)?;
    let mut per_class: Vec<(OrbitClass, usize)> = Vec::new();
    for o in inv.orbits.iter().filter(|o| !o.class.is_repelling()) {
        match per_class.iter_mut().find(|c| c.0 == o.class) {
            Some(c) => c.1 += 1,
            None => per_class.push((o.class, 1)),
        }
    }
    per_class.sort();
    let d = p.degree();
    let nonrepelling = inv.nonrepelling_count;
    if nonrepelling > d - 1 {
        return Err(Error::BoundViolated(format!("{nonrepelling} non-repelling cycles for degree {d}")));
    }
    Ok(PolynomialCount { degree: d, max_period, nonrepelling, per_class, pass: true })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden_quadratic() -> (ComplexPolynomial, C64) {
        let theta = (5f64.sqrt() - 1.0) / 2.0;
        let mu = C64::from_polar(1.0, std::f64::consts::TAU * theta);
        let c = mu / 2.0 - mu * mu / 4.0;
        (ComplexPolynomial::new(vec![c, C64::new(0.0, 0.0), C64::new(1.0, 0.0)]), mu)
    }

    #[test]
    fn hermite_conditions_hold() {
        let nodes = [
            HermiteNode { z: C64::new(0.3, -0.2), slope: C64::new(1.5, 0.5) },
            HermiteNode { z: C64::new(-1.0, 0.7), slope: C64::new(0.0, 0.0) },
            HermiteNode { z: C64::new(2.0, 0.1), slope: C64::new(-0.4, 2.0) },
        ];
        let q = hermite_vanishing(&nodes).unwrap();
        assert!(q.degree() <= 5);
        let dq = q.derivative();
        for n in &nodes {
            assert!(q.eval(n.z).norm() < 1e-12);
            assert!((dq.eval(n.z) - n.slope).norm() < 1e-11);
        }
        assert!(hermite_vanishing(&[]).unwrap().is_zero());
        let twin = [nodes[0], HermiteNode { z: nodes[0].z, slope: C64::new(0.0, 0.0) }];
        assert!(matches!(hermite_vanishing(&twin), Err(Error::InterpolationIllConditioned(_))));
    }

    #[test]
    fn indifferent_fixed_point_becomes_attracting() {
        let tol = Tolerances::default();
        let (p, mu) = golden_quadratic();
        let alpha = mu / 2.0;
        let r = perturb_and_check(&p, &[vec![alpha]], &[-1e-4, 1e-4, -1e-3, 1e-3, -1e-5], &tol).unwrap();
        assert!(r.pass);
        let e = &r.entries[0].cycles[0];
        assert_eq!(e.class, OrbitClass::IrrationallyIndifferent);
        assert_eq!(e.perturbed_class, OrbitClass::Attracting);
        assert!((e.perturbed_multiplier - mu * (1.0 - 1e-4)).norm() < 1e-12);
    }

    #[test]
    fn parabolic_multiplier_is_kept() {
        let tol = Tolerances::default();
        let p = ComplexPolynomial::from_real(&[0.25, 0.0, 1.0]);
        let r = perturb_and_check(&p, &[vec![C64::new(0.5, 0.0)]], &[1e-3, -1e-3], &tol).unwrap();
        assert!(r.pass);
        assert!(r.interpolant.is_zero());
        for e in &r.entries {
            assert_eq!(e.cycles[0].perturbed_multiplier, C64::new(1.0, 0.0));
        }
    }

    #[test]
    fn parabolic_points_are_found_once() {
        let tol = Tolerances::default();
        // Double fixed point at 1/2.
        let inv = polynomial_orbits(&ComplexPolynomial::from_real(&[0.25, 0.0, 1.0]), 2, 48, &tol).unwrap();
        let marked = marked_cycles(&inv);
        assert_eq!(marked.len(), 1);
        assert!((marked[0].points[0].finite().unwrap() - 0.5).norm() < 1e-12);
        // The 2-cycle collapses onto the fixed point -1/2.
        let inv = polynomial_orbits(&ComplexPolynomial::from_real(&[-0.75, 0.0, 1.0]), 2, 48, &tol).unwrap();
        assert!(inv.orbits.iter().all(|o| o.period == 1 || o.class.is_repelling()));
        assert_eq!(marked_cycles(&inv).len(), 1);
    }

    #[test]
    fn empty_marked_set_leaves_polynomial() {
        let tol = Tolerances::default();
        let p = ComplexPolynomial::from_real(&[-1.0, 0.0, 1.0]);
        let r = perturb_and_check(&p, &[], &[1e-3], &tol).unwrap();
        assert!(r.interpolant.is_zero());
        assert!(r.pass);
    }

    #[test]
    fn polynomial_counts() {
        let tol = Tolerances::default();
        let cases: [(&[f64], usize); 3] = [(&[0.0, 0.0, 1.0], 1), (&[-1.0, 0.0, 1.0], 1), (&[0.0, 0.0, 3.0, -2.0], 2)];
        for (c, n) in cases {
            let r = polynomial_fs_count(&ComplexPolynomial::from_real(c), 4, &tol).unwrap();
            assert_eq!(r.nonrepelling, n, "{c:?}");
        }
    }
}
