//! Polynomial-like restrictions around periodic points with critical fibers.
//!
//! Domains are Jordan regions bounded by registry edges. Pulling a domain back
//! one step lifts its boundary edges and keeps the boundary of the preimage
//! component containing a chosen point, so no global pullback is needed.

use crate::error::{Error, Result};
use crate::graph::{PlanarGraph, UnionFind, VertexKind};
use crate::lift::Curve;
use crate::newton_graph::Atlas;
use crate::puzzle::{iterate_critical_points, iterated_preimages, spherical_derivative, Puzzle};
use crate::sphere::{chordal, chordal_to_polyline, Point, C64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, VecDeque};

/// A Jordan domain bounded by registry edges.
#[derive(Clone)]
pub struct Domain {
    pub edges: Vec<usize>,
    pub boundary: Vec<Point>,
    graph: PlanarGraph,
    face: usize,
}

impl Domain {
    fn from_edges(atlas: &Atlas, edges: Vec<usize>, x: Point) -> Result<Domain> {
        let mut graph = atlas.planar_graph(0, &edges)?;
        graph.build_locator();
        let face = graph.locate_any(x);
        let vs = graph.face_vertices(face);
        if vs.iter().collect::<BTreeSet<_>>().len() != vs.len() {
            return Err(Error::Topology("domain boundary is not a simple closed curve".into()));
        }
        let boundary = graph.face_polyline(face);
        let face_edges: BTreeSet<usize> =
            graph.face_darts(face).iter().map(|&d| graph.edges[d / 2].provenance.id.unwrap() as usize).collect();
        if face_edges.len() != edges.len() {
            return Domain::from_edges(atlas, face_edges.into_iter().collect(), x);
        }
        Ok(Domain { edges, boundary, graph, face })
    }

    /// Domain of a puzzle piece (`x` inside it).
    pub fn of_piece(atlas: &Atlas, puzzle: &Puzzle, piece: usize, x: Point) -> Result<Domain> {
        let g = &puzzle.graph;
        let f = puzzle.pieces[piece].face;
        let edges: BTreeSet<usize> = g.face_darts(f).iter().map(|&d| g.edges[d / 2].provenance.id.unwrap() as usize).collect();
        Domain::from_edges(atlas, edges.into_iter().collect(), x)
    }

    pub fn contains(&self, p: Point) -> bool {
        self.graph.locate_any(p) == self.face
    }

    /// Strict membership: inside and farther than `eps` from the boundary.
    pub fn contains_clear(&self, p: Point, eps: f64) -> bool {
        self.graph.locate(p, eps) == Some(self.face)
    }

    pub fn samples(&self, count: usize) -> Vec<Point> {
        self.graph.deep_samples(self.face, count)
    }

    /// Julia vertices on the boundary, by registry id.
    pub fn julia_vertices(&self) -> BTreeSet<usize> {
        self.graph
            .face_vertices(self.face)
            .into_iter()
            .filter(|&v| matches!(self.graph.vertices[v].kind, VertexKind::Prepole { .. } | VertexKind::Infinity))
            .map(|v| self.graph.vertices[v].key as usize)
            .collect()
    }
}

/// Component of N^-1(dom) containing `x`.
pub fn pull_back_domain(atlas: &mut Atlas, dom: &Domain, x: Point) -> Result<Domain> {
    if !dom.contains(atlas.map().eval(x)) {
        return Err(Error::Precondition("image of the chosen point is outside the domain".into()));
    }
    atlas.ensure_lifts(&dom.edges)?;
    let lifted: Vec<usize> = dom.edges.iter().flat_map(|&e| atlas.lifts_of(e).unwrap().to_vec()).collect();
    // Connected components of the full preimage of the boundary.
    let vs = atlas.vertex_set(&lifted);
    let index: HashMap<usize, usize> = vs.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut uf = UnionFind::new(vs.len());
    for &e in &lifted {
        uf.union(index[&atlas.edges[e].a], index[&atlas.edges[e].b]);
    }
    let mut comps: HashMap<usize, Vec<usize>> = HashMap::new();
    for &e in &lifted {
        comps.entry(uf.find(index[&atlas.edges[e].a])).or_default().push(e);
    }
    let mut comps: Vec<Vec<usize>> = comps.into_values().collect();
    comps.sort();
    // The right component is the one whose side containing x maps into dom.
    let map = atlas.map();
    let mut best: Option<(usize, Vec<usize>)> = None;
    for comp in comps {
        let mut g = atlas.planar_graph(0, &comp)?;
        g.build_locator();
        let f = g.locate_any(x);
        let samples = g.interior_samples(f, 16);
        let score = samples.iter().filter(|&&s| dom.contains(map.eval(s))).count();
        if 4 * score >= 3 * samples.len() && !samples.is_empty() && best.as_ref().is_none_or(|b| score > b.0) {
            let edges: BTreeSet<usize> = g.face_darts(f).iter().map(|&d| g.edges[d / 2].provenance.id.unwrap() as usize).collect();
            best = Some((score, edges.into_iter().collect()));
        }
    }
    let (_, edges) = best.ok_or_else(|| Error::Topology("no preimage component maps into the domain".into()))?;
    Domain::from_edges(atlas, edges, x)
}

/// Pulls `dom` back along the orbit `x[0] -> x[1] -> ... -> x[n]`, returning every
/// intermediate domain; element i contains x[i] and the last one is `dom`.
pub fn pull_back_along(atlas: &mut Atlas, dom: &Domain, orbit: &[Point]) -> Result<Vec<Domain>> {
    let mut out = vec![dom.clone()];
    for i in (0..orbit.len() - 1).rev() {
        let next = pull_back_domain(atlas, out.last().unwrap(), orbit[i])?;
        out.push(next);
    }
    out.reverse();
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolynomialLikeRestriction {
    /// Number of Newton steps in the restriction.
    pub iterate: usize,
    /// Period of the periodic point under the Newton map.
    pub period: usize,
    /// Period of its fiber.
    pub fiber_period: usize,
    pub center: Point,
    pub u: Vec<Point>,
    pub v: Vec<Point>,
    pub degree: usize,
    /// Preimage counts in U of sampled points of V.
    pub degree_preimage: Vec<usize>,
    /// Critical points of the Newton map in the i-th intermediate domain, with multiplicity.
    pub critical_steps: Vec<Vec<(Point, usize)>>,
    /// Smallest chordal distance between the boundaries of U and V.
    pub containment_gap: f64,
    /// Largest source-side distance from a boundary image of U to the boundary of V.
    pub boundary_residual: f64,
    /// Every critical point in U stays in U under the restriction.
    pub connected: bool,
    /// Prepoles thickened away (empty when the boundaries were already disjoint).
    pub thickened: Vec<Point>,
    #[serde(skip)]
    pub(crate) shape: Option<Shape>,
}

/// Membership structure of a restriction's domains.
#[derive(Clone)]
pub(crate) struct Shape {
    u: Vec<Domain>,
    v: Vec<Domain>,
    patches_u: Vec<Patch>,
    patches_v: Vec<Patch>,
}

impl std::fmt::Debug for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Shape({} U parts, {} V parts)", self.u.len(), self.v.len())
    }
}

impl Shape {
    fn in_u(&self, p: Point) -> bool {
        self.u.iter().all(|d| d.contains(p)) || self.patches_u.iter().any(|w| w.contains(p))
    }

    fn in_v(&self, p: Point) -> bool {
        self.v.iter().all(|d| d.contains(p)) || self.patches_v.iter().any(|w| w.contains(p))
    }
}

impl PolynomialLikeRestriction {
    pub fn in_u(&self, p: Point) -> bool {
        self.shape.as_ref().is_some_and(|s| s.in_u(p))
    }

    pub fn in_v(&self, p: Point) -> bool {
        self.shape.as_ref().is_some_and(|s| s.in_v(p))
    }

    /// Ū ⊂ V̊ with certified gap, proper boundary map and degree at least 2.
    pub fn certified(&self, tol: &crate::tolerances::Tolerances) -> bool {
        self.containment_gap > 5.0 * tol.lift_eps
            && self.boundary_residual <= tol.membership_eps
            && self.degree >= 2
            && self.degree_preimage.iter().all(|&c| c == self.degree)
            && self.connected
    }
}

fn orbit(atlas: &Atlas, q: Point, n: usize) -> Vec<Point> {
    let mut out = vec![q];
    for _ in 0..n {
        out.push(atlas.map().eval(*out.last().unwrap()));
    }
    out
}

/// Period of `q` under the Newton map, up to `max`.
pub fn point_period(atlas: &Atlas, q: Point, max: usize) -> Option<usize> {
    let o = orbit(atlas, q, max);
    (1..=max).find(|&i| chordal(o[i], q) < 1e3 * atlas.tol.fixpoint_eps.max(1e-12))
}

/// Restriction of N^(kM) from P_(n+k)(q) onto P_n(q).
pub fn extract_renormalization(atlas: &mut Atlas, puzzle: &Puzzle, q: Point, m: usize) -> Result<PolynomialLikeRestriction> {
    let k = point_period(atlas, q, 64).ok_or_else(|| Error::Precondition("point is not periodic".into()))?;
    if k < 2 {
        return Err(Error::Precondition("periodic point must have period at least 2".into()));
    }
    let ids = puzzle.pieces_containing(q)?;
    if ids.len() != 1 {
        return Err(Error::Precondition("periodic point lies on the puzzle".into()));
    }
    let v = Domain::of_piece(atlas, puzzle, ids[0], q)?;
    let steps = k * m;
    let o = orbit(atlas, q, steps);
    let chain = pull_back_along(atlas, &v, &o)?;
    let crit = &atlas.desc.critical_points;
    let critical_steps: Vec<Vec<(Point, usize)>> = chain[..steps]
        .iter()
        .map(|d| crit.iter().filter(|(c, _)| d.contains(*c)).copied().collect())
        .collect();
    let free_inside = critical_steps[0].iter().any(|(c, _)| basin_of_root(atlas, *c).is_none());
    if !free_inside {
        return Err(Error::NoCriticalInFiber);
    }
    let u = chain[0].clone();
    finish(atlas, q, k, k, steps, vec![u], vec![v], critical_steps, Vec::new(), Vec::new())
}

fn basin_of_root(atlas: &Atlas, p: Point) -> Option<usize> {
    crate::basin::basin_of(&atlas.desc, p, atlas.tol.max_iter, &atlas.tol)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    atlas: &Atlas,
    q: Point,
    period: usize,
    fiber_period: usize,
    steps: usize,
    u: Vec<Domain>,
    v: Vec<Domain>,
    critical_steps: Vec<Vec<(Point, usize)>>,
    patches_u: Vec<Patch>,
    patches_v: Vec<Patch>,
) -> Result<PolynomialLikeRestriction> {
    let map = atlas.map();
    let shape = Shape { u, v, patches_u, patches_v };
    let ub = shape_boundary(&shape.u, &shape.patches_u);
    let vb = shape_boundary(&shape.v, &shape.patches_v);
    let degree = critical_steps.iter().map(|cs| 1 + cs.iter().map(|c| c.1).sum::<usize>()).product();
    // Riemann-Hurwitz for the iterate must agree with the step-wise count.
    let rh = 1 + iterate_critical_points(atlas, steps)
        .iter()
        .filter(|(z, _)| shape.in_u(*z))
        .map(|(_, d)| d - 1)
        .sum::<usize>();
    let containment_gap = PlanarGraph::polyline_distance(&thin(&ub, 2000), &thin(&vb, 2000));
    let inside = ub.iter().step_by((ub.len() / 200).max(1)).all(|&p| shape.in_v(p));
    let containment_gap = if inside { containment_gap } else { 0.0 };
    let boundary_residual = ub
        .par_iter()
        .step_by((ub.len() / 256).max(1))
        .map(|&p| chordal_to_polyline(map.iterate(p, steps), &vb) / spherical_derivative(map, p, steps).max(1.0))
        .reduce(|| 0.0, f64::max);
    let targets: Vec<Point> = shape.v[0].samples(40).into_iter().filter(|&y| shape.in_v(y)).take(5).collect();
    let degree_preimage = targets
        .iter()
        .map(|&y| iterated_preimages(map, y, steps).into_iter().filter(|&z| shape.in_u(z)).count())
        .collect();
    let connected = critical_steps[0].iter().all(|&(c, _)| {
        let mut z = c;
        (0..64).all(|_| {
            z = map.iterate(z, steps);
            shape.in_u(z)
        })
    });
    let degree = if rh == degree { degree } else { 0 };
    Ok(PolynomialLikeRestriction {
        iterate: steps,
        period,
        fiber_period,
        center: q,
        u: ub,
        v: vb,
        degree,
        degree_preimage,
        critical_steps,
        containment_gap,
        boundary_residual,
        connected,
        thickened: shape.patches_u.iter().map(|w| w.center).collect(),
        shape: Some(shape),
    })
}

fn thin(pts: &[Point], n: usize) -> Vec<Point> {
    let step = (pts.len() / n).max(1);
    let mut out: Vec<Point> = pts.iter().step_by(step).copied().collect();
    if let Some(&l) = pts.last() {
        out.push(l);
    }
    out
}

/// Boundary samples of (∩ domains) ∪ patches.
fn shape_boundary(ds: &[Domain], patches: &[Patch]) -> Vec<Point> {
    let in_all = |p: Point, skip: usize| ds.iter().enumerate().all(|(i, d)| i == skip || d.contains(p));
    let in_patch = |p: Point, skip: Option<usize>| patches.iter().enumerate().any(|(i, w)| Some(i) != skip && w.contains(p));
    let mut out = Vec::new();
    for (i, d) in ds.iter().enumerate() {
        out.extend(d.boundary.iter().copied().filter(|&p| in_all(p, i) && !in_patch(p, None)));
    }
    for (i, w) in patches.iter().enumerate() {
        out.extend(w.circle.iter().copied().filter(|&p| !in_all(p, usize::MAX) && !in_patch(p, Some(i))));
    }
    out
}

/// Minimal i in 1..=k with P(N^i q) = P(q) on the given puzzle.
pub fn fiber_period(atlas: &Atlas, puzzle: &Puzzle, q: Point, k: usize) -> Result<usize> {
    let home = puzzle.pieces_containing(q)?;
    let o = orbit(atlas, q, k);
    for i in 1..=k {
        if puzzle.pieces_containing(o[i])? == home {
            return Ok(i);
        }
    }
    Ok(k)
}

/// A pulled-back neighborhood of infinity around a prepole.
#[derive(Clone)]
pub(crate) struct Patch {
    center: Point,
    /// Radius of the base circle around ∞.
    radius: f64,
    circle: Vec<Point>,
}

impl Patch {
    fn contains(&self, p: Point) -> bool {
        match p.finite() {
            None => self.center.is_infinite(),
            Some(z) if self.center.is_infinite() => z.norm() > self.radius,
            Some(z) => crate::basin::winding_number(&self.circle, z) != 0,
        }
    }
}

/// Restriction of N^(k') with the fiber period k', built by intersecting pullbacks.
pub fn lowest_period_restriction(
    atlas: &mut Atlas,
    puzzle: &Puzzle,
    deepest: &Puzzle,
    q: Point,
    m: usize,
) -> Result<PolynomialLikeRestriction> {
    let k = point_period(atlas, q, 64).ok_or_else(|| Error::Precondition("point is not periodic".into()))?;
    let kp = fiber_period(atlas, deepest, q, k)?;
    if k % kp != 0 {
        return Err(Error::Precondition(format!("fiber period {kp} does not divide {k}")));
    }
    let mp = k * m / kp;
    let ids = puzzle.pieces_containing(q)?;
    if ids.len() != 1 {
        return Err(Error::Precondition("periodic point lies on the puzzle".into()));
    }
    let v0 = Domain::of_piece(atlas, puzzle, ids[0], q)?;
    let o = orbit(atlas, q, kp);
    let mut vs = vec![v0];
    let mut first_chain = None;
    for _ in 0..mp {
        let chain = pull_back_along(atlas, vs.last().unwrap(), &o)?;
        if first_chain.is_none() {
            first_chain = Some(chain.clone());
        }
        vs.push(chain[0].clone());
    }
    let u_parts = vs.clone();
    let v_parts = vs[..mp].to_vec();
    let crit = &atlas.desc.critical_points;
    // Intermediate domains of one k'-step: the pullback chain intersected along the orbit.
    let chain = first_chain.unwrap();
    let critical_steps: Vec<Vec<(Point, usize)>> = (0..kp)
        .map(|i| {
            crit.iter()
                .filter(|(c, _)| chain[i].contains(*c) && (i > 0 || u_parts.iter().all(|d| d.contains(*c))))
                .copied()
                .collect()
        })
        .collect();
    let r = finish(atlas, q, k, kp, kp, u_parts.clone(), v_parts.clone(), critical_steps.clone(), Vec::new(), Vec::new())?;
    if r.containment_gap > 5.0 * atlas.tol.lift_eps {
        return Ok(r);
    }
    // Boundaries touch: thicken at the shared prepoles.
    let shared: Vec<usize> = {
        let ju: BTreeSet<usize> = u_parts.iter().flat_map(|d| d.julia_vertices()).collect();
        let jv: BTreeSet<usize> = v_parts.iter().flat_map(|d| d.julia_vertices()).collect();
        ju.intersection(&jv).copied().collect()
    };
    if shared.is_empty() {
        return Ok(r);
    }
    let mut eps = 1e-2;
    while eps >= 1e-6 {
        match thicken(atlas, &shared, kp, eps) {
            Ok((pu, pv)) => {
                return finish(atlas, q, k, kp, kp, u_parts, v_parts, critical_steps, pu, pv);
            }
            Err(Error::PatchCollision) => eps *= 0.1,
            Err(e) => return Err(e),
        }
    }
    Err(Error::PatchCollision)
}

/// Patches W(z) around each prepole and their images under N^(k').
fn thicken(atlas: &Atlas, prepoles: &[usize], kp: usize, eps: f64) -> Result<(Vec<Patch>, Vec<Patch>)> {
    let map = atlas.map();
    // W = {|z| > R} has chordal diameter about 4/R and N(W) ⊃ W near the repelling point.
    let r = 4.0 / eps;
    let n = 256;
    let base: Vec<Point> =
        (0..=n).map(|i| Point::Finite(C64::from_polar(r, std::f64::consts::TAU * i as f64 / n as f64))).collect();
    let crit_orbits: Vec<Point> = atlas
        .desc
        .critical_points
        .iter()
        .flat_map(|&(c, _)| {
            let mut z = c;
            (0..16).map(move |_| {
                let w = z;
                z = map.eval(z);
                w
            })
        })
        .collect();
    if crit_orbits.iter().any(|p| p.finite().is_some_and(|z| z.norm() > r)) {
        return Err(Error::PatchCollision);
    }
    let patch_at = |z: Point, level: usize| -> Result<Patch> {
        // Lift the circle `level` times along the orbit of z to ∞.
        let mut orbit = vec![z];
        for _ in 0..level {
            orbit.push(map.eval(*orbit.last().unwrap()));
        }
        if chordal(*orbit.last().unwrap(), Point::Infinity) > 1e-6 {
            return Err(Error::Precondition("vertex is not a prepole".into()));
        }
        let mut circle = Curve::new(base.clone(), vec![f64::NAN; base.len()]);
        for i in (0..level).rev() {
            let start = map
                .preimages(circle.pts[0], 1e-6)
                .into_iter()
                .map(|p| p.0)
                .min_by(|a, b| chordal(*a, orbit[i]).total_cmp(&chordal(*b, orbit[i])))
                .unwrap();
            let k = 1 + atlas.desc.critical_points.iter().filter(|c| chordal(c.0, orbit[i]) < 1e-7).map(|c| c.1).sum::<usize>();
            circle = crate::basin::lift_closed(map, &circle, start, k, 1, &atlas.tol)?;
        }
        Ok(Patch { center: if level == 0 { Point::Infinity } else { z }, radius: r, circle: circle.pts })
    };
    let level_of = |v: usize| match atlas.vertices[v].kind {
        VertexKind::Prepole { level } => Ok(level),
        VertexKind::Infinity => Ok(0),
        _ => Err(Error::Precondition("vertex is not a prepole".into())),
    };
    let pu: Vec<Patch> = prepoles.iter().map(|&v| patch_at(atlas.vertices[v].pos, level_of(v)?)).collect::<Result<_>>()?;
    for (i, a) in pu.iter().enumerate() {
        for b in &pu[i + 1..] {
            if PlanarGraph::polyline_distance(&a.circle, &b.circle) <= 0.0 || a.contains(b.center) || b.contains(a.center) {
                return Err(Error::PatchCollision);
            }
        }
    }
    let pv: Vec<Patch> = prepoles
        .iter()
        .map(|&v| {
            let l = level_of(v)?;
            patch_at(map.iterate(atlas.vertices[v].pos, kp.min(l)), l.saturating_sub(kp))
        })
        .collect::<Result<_>>()?;
    Ok((pu, pv))
}

/// Non-escaping set of a restriction on a square grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JuliaMask {
    pub resolution: usize,
    /// Lower-left corner and side of the grid in the z-plane.
    pub origin: (f64, f64),
    pub side: f64,
    /// Row-major, row 0 at the bottom.
    pub bits: Vec<bool>,
    pub components: usize,
    pub critical_inside: bool,
    pub connected: bool,
}

/// Square grid covering the U domain of a restriction.
pub fn mask_frame(r: &PolynomialLikeRestriction) -> Result<((f64, f64), f64)> {
    let zs: Vec<C64> = r.u.iter().map(|p| p.finite()).collect::<Option<_>>().ok_or_else(|| {
        Error::Precondition("restriction domain contains infinity".into())
    })?;
    let (mut lo, mut hi) = (zs[0], zs[0]);
    for z in &zs {
        lo = C64::new(lo.re.min(z.re), lo.im.min(z.im));
        hi = C64::new(hi.re.max(z.re), hi.im.max(z.im));
    }
    let side = (hi.re - lo.re).max(hi.im - lo.im) * 1.02;
    let c = (lo + hi) * 0.5;
    Ok(((c.re - side / 2.0, c.im - side / 2.0), side))
}

/// Grid points of U that never leave V under the restriction (iteration cap `max_iter`).
pub fn filled_julia_mask(
    atlas: &Atlas,
    r: &PolynomialLikeRestriction,
    resolution: usize,
    frame: Option<((f64, f64), f64)>,
    max_iter: usize,
) -> Result<JuliaMask> {
    let ((x0, y0), side) = match frame {
        Some(f) => f,
        None => mask_frame(r)?,
    };
    let map = atlas.map();
    // Attracting cycle points: orbits that land near them never escape.
    let sinks: Vec<Point> = r
        .critical_steps
        .first()
        .into_iter()
        .flatten()
        .map(|&(c, _)| map.iterate(c, 200 * r.iterate))
        .collect();
    let sink_eps = 1e-9;
    let h = side / resolution as f64;
    let bits: Vec<bool> = (0..resolution * resolution)
        .into_par_iter()
        .map(|i| {
            let (row, col) = (i / resolution, i % resolution);
            let mut z = Point::new(x0 + (col as f64 + 0.5) * h, y0 + (row as f64 + 0.5) * h);
            if !r.in_u(z) {
                return false;
            }
            for _ in 0..max_iter {
                z = map.iterate(z, r.iterate);
                if sinks.iter().any(|s| chordal(*s, z) < sink_eps) {
                    return true;
                }
                if !r.in_u(z) {
                    return false;
                }
            }
            true
        })
        .collect();
    let components = count_components(&bits, resolution);
    let critical_inside = r.critical_steps.first().into_iter().flatten().all(|&(c, _)| {
        let Some(z) = c.finite() else { return false };
        let col = ((z.re - x0) / h).floor();
        let row = ((z.im - y0) / h).floor();
        if col < 0.0 || row < 0.0 || col >= resolution as f64 || row >= resolution as f64 {
            return false;
        }
        // The pixel holding the critical point, or one of its neighbours, is set.
        let (row, col) = (row as usize, col as usize);
        (row.saturating_sub(1)..=(row + 1).min(resolution - 1))
            .any(|rr| (col.saturating_sub(1)..=(col + 1).min(resolution - 1)).any(|cc| bits[rr * resolution + cc]))
    });
    Ok(JuliaMask {
        resolution,
        origin: (x0, y0),
        side,
        components,
        critical_inside,
        connected: components == 1 && critical_inside,
        bits,
    })
}

/// Number of 4-connected components of set pixels.
pub fn count_components(bits: &[bool], n: usize) -> usize {
    let mut seen = vec![false; bits.len()];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for s in 0..bits.len() {
        if !bits[s] || seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        queue.push_back(s);
        while let Some(i) = queue.pop_front() {
            let (r, c) = (i / n, i % n);
            let mut visit = |j: usize| {
                if bits[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if r > 0 {
                visit(i - n);
            }
            if r + 1 < n {
                visit(i + n);
            }
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < n {
                visit(i + 1);
            }
        }
    }
    count
}

/// Largest Chebyshev pixel distance from a set pixel of one mask to the other mask.
pub fn mask_distance(a: &[bool], b: &[bool], n: usize) -> usize {
    let one_way = |x: &[bool], y: &[bool]| -> usize {
        // Multi-source BFS distance to y with 8-neighbour steps.
        let mut dist = vec![usize::MAX; y.len()];
        let mut queue = VecDeque::new();
        for i in 0..y.len() {
            if y[i] {
                dist[i] = 0;
                queue.push_back(i);
            }
        }
        while let Some(i) = queue.pop_front() {
            let (r, c) = ((i / n) as i64, (i % n) as i64);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (rr, cc) = (r + dr, c + dc);
                    if rr < 0 || cc < 0 || rr >= n as i64 || cc >= n as i64 {
                        continue;
                    }
                    let j = rr as usize * n + cc as usize;
                    if dist[j] == usize::MAX {
                        dist[j] = dist[i] + 1;
                        queue.push_back(j);
                    }
                }
            }
        }
        (0..x.len()).filter(|&i| x[i]).map(|i| dist[i]).max().unwrap_or(0)
    };
    one_way(a, b).max(one_way(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::orbits::newton_orbits;
    use crate::puzzle::tests::engine;

    #[test]
    fn repelling_cycle_has_no_critical_fiber() {
        let (mut a, mut e) = engine(&[-1.0, 0.0, 0.0, 1.0]);
        let m = e.config.m;
        let inv = newton_orbits(&a.desc, 2, 64, &a.tol).unwrap();
        let p0 = e.puzzle(&mut a, 0).unwrap();
        let q = inv
            .orbits
            .iter()
            .filter(|o| o.period == 2 && o.class.is_repelling())
            .flat_map(|o| o.points.clone())
            .find(|&q| p0.pieces_containing(q).is_ok_and(|ids| ids.len() == 1))
            .expect("a repelling 2-cycle off the puzzle");
        assert!(matches!(extract_renormalization(&mut a, p0, q, m), Err(Error::NoCriticalInFiber)));
        assert!(matches!(extract_renormalization(&mut a, p0, Point::new(1.0, 0.0), m), Err(Error::Precondition(_))));
    }

    #[test]
    fn thickening_patches_shrink_onto_prepoles() {
        let (mut a, mut e) = engine(&[-1.0, 0.0, 0.0, 1.0]);
        e.puzzle(&mut a, 0).unwrap();
        let v = (0..a.vertices.len())
            .find(|&v| matches!(a.vertices[v].kind, VertexKind::Prepole { level: 2 }))
            .unwrap();
        let z = a.vertices[v].pos;
        let mut last = f64::INFINITY;
        for eps in [1e-2, 1e-3, 1e-4] {
            let (pu, pv) = thicken(&a, &[v], 1, eps).unwrap();
            assert!(pu[0].contains(z));
            assert!(pv[0].contains(a.map().eval(z)));
            let r = pu[0].circle.iter().map(|&p| chordal(p, z)).fold(0.0, f64::max);
            // Through the double pole the patch radius scales like the square root of eps.
            assert!(r < last && r < 2.0 * eps.sqrt());
            last = r;
        }
    }

    #[test]
    fn components_and_distance() {
        let n = 4;
        let mut a = vec![false; 16];
        a[0] = true;
        a[1] = true;
        a[15] = true;
        assert_eq!(count_components(&a, n), 2);
        let mut b = a.clone();
        b[15] = false;
        b[10] = true;
        assert_eq!(mask_distance(&a, &b, n), 1);
        assert_eq!(mask_distance(&a, &a, n), 0);
    }
}
