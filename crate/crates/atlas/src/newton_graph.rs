//! Newton graphs: the channel diagram, its pullbacks, separating circles and the
//! augmented graph.
//!
//! All combinatorics live in an [`Atlas`]: a registry of vertices (roots, infinity
//! and their iterated preimages) and of edges (fixed rays and their lifts). Graph
//! membership is decided by registry ids, never by comparing polylines.

use crate::basin::{trace_fixed_rays, BoettcherChart};
use crate::error::{Error, Result};
use crate::graph::{EdgeRole, GEdge, GVertex, PlanarGraph, Provenance, UnionFind, VertexKind};
use crate::lift::{decimate, interpolate_g, lift_points, needed_anchor, Curve, LiftParams};
use crate::newton::NewtonMapDescriptor;
use crate::sphere::{chordal, chordal_to_polyline, segment_point, Point};
use crate::tolerances::Tolerances;
use rayon::prelude::*;
use std::collections::{BTreeSet, HashMap};

/// Default cap on pullback levels.
pub const N_MAX: usize = 12;

#[derive(Clone, Debug)]
pub struct VertexRecord {
    pub pos: Point,
    pub kind: VertexKind,
    /// Registry id of the image vertex; fixed vertices map to themselves.
    pub image: usize,
    /// Local degree of the map at this vertex.
    pub local_degree: usize,
}

#[derive(Clone, Debug)]
pub struct EdgeRecord {
    /// First end; the Fatou end (a root or one of its preimages) for rays.
    pub a: usize,
    /// Second end; the Julia end (infinity or a prepole) for rays and stubs.
    pub b: usize,
    /// Runs from `a` to `b`; `g` is the potential of the basin of `root`.
    pub curve: Curve,
    pub root: usize,
    pub role: EdgeRole,
    /// Registry id of the image edge; fixed rays map to themselves.
    pub parent: usize,
    pub iterate: usize,
}

/// Registry of vertices and edges obtained by pulling back the channel diagram.
pub struct Atlas {
    pub desc: NewtonMapDescriptor,
    pub tol: Tolerances,
    pub charts: Vec<BoettcherChart>,
    pub vertices: Vec<VertexRecord>,
    pub edges: Vec<EdgeRecord>,
    pub infinity: usize,
    pub root_vertices: Vec<usize>,
    /// Edge ids of the channel diagram.
    pub channel: Vec<usize>,
    preimage_memo: HashMap<usize, Vec<usize>>,
    lift_memo: HashMap<usize, Vec<usize>>,
    /// Edge sets of the Newton graphs computed so far, level by level.
    delta: Vec<Vec<usize>>,
}

/// Chordal distance below which a preimage is identified with a fixed vertex.
const FIXED_EPS: f64 = 1e-8;
/// Target-side distance at which endpoint refinement stops.
const END_EPS: f64 = 1e-13;

impl Atlas {
    /// Builds charts, traces all fixed rays and registers the channel diagram.
    pub fn new(desc: &NewtonMapDescriptor, tol: &Tolerances) -> Result<Atlas> {
        let map = &desc.map;
        let mut charts = Vec::new();
        for r in 0..desc.roots.len() {
            charts.push(BoettcherChart::new(desc, r, tol)?);
        }
        let mut atlas = Atlas {
            desc: desc.clone(),
            tol: tol.clone(),
            charts: Vec::new(),
            vertices: Vec::new(),
            edges: Vec::new(),
            infinity: 0,
            root_vertices: Vec::new(),
            channel: Vec::new(),
            preimage_memo: HashMap::new(),
            lift_memo: HashMap::new(),
            delta: Vec::new(),
        };
        atlas.infinity = atlas.push_vertex(Point::Infinity, VertexKind::Infinity, None, 1);
        for (r, chart) in charts.iter().enumerate() {
            let v = atlas.push_vertex(Point::Finite(chart.center), VertexKind::Root { root: r }, None, chart.local_degree);
            atlas.root_vertices.push(v);
        }
        let rays: Vec<_> = charts.par_iter().map(|c| trace_fixed_rays(map, c, tol)).collect::<Result<Vec<_>>>()?;
        for (r, rs) in rays.into_iter().enumerate() {
            for ray in rs {
                let id = atlas.edges.len();
                atlas.edges.push(EdgeRecord {
                    a: atlas.root_vertices[r],
                    b: atlas.infinity,
                    curve: ray.curve,
                    root: r,
                    role: EdgeRole::Ray,
                    parent: id,
                    iterate: 0,
                });
                atlas.channel.push(id);
            }
        }
        atlas.charts = charts;
        atlas.delta.push(atlas.channel.clone());
        Ok(atlas)
    }

    pub fn map(&self) -> &crate::rational::RationalMap {
        &self.desc.map
    }

    pub fn degree(&self) -> usize {
        self.desc.degree
    }

    fn push_vertex(&mut self, pos: Point, kind: VertexKind, image: Option<usize>, local_degree: usize) -> usize {
        let id = self.vertices.len();
        self.vertices.push(VertexRecord { pos, kind, image: image.unwrap_or(id), local_degree });
        id
    }

    /// Registers a vertex that is not a preimage of an existing one.
    pub fn add_auxiliary(&mut self, pos: Point) -> usize {
        self.push_vertex(pos, VertexKind::Auxiliary, None, 1)
    }

    /// Registers an edge with no parent; it maps to itself by convention.
    pub fn add_base_edge(&mut self, a: usize, b: usize, curve: Curve, root: usize, role: EdgeRole) -> usize {
        let id = self.edges.len();
        self.edges.push(EdgeRecord { a, b, curve, root, role, parent: id, iterate: 0 });
        id
    }

    /// Prefixed level of a Fatou vertex (0 for roots).
    pub fn fatou_level(&self, v: usize) -> Option<usize> {
        match self.vertices[v].kind {
            VertexKind::Root { .. } => Some(0),
            VertexKind::Prefixed { level, .. } => Some(level),
            _ => None,
        }
    }

    /// Basin root of a Fatou vertex.
    pub fn basin_root(&self, v: usize) -> Option<usize> {
        match self.vertices[v].kind {
            VertexKind::Root { root } | VertexKind::Prefixed { root, .. } => Some(root),
            _ => None,
        }
    }

    /// Preimages of a point, with critical preimages snapped onto the exact critical points.
    fn solve_preimages(&self, t: Point) -> Vec<(Point, usize)> {
        let mut pre = self.desc.map.preimages(t, 1e-6);
        for (p, m) in pre.iter_mut() {
            if *m > 1 {
                if let Some((c, _)) = self
                    .desc
                    .critical_points
                    .iter()
                    .filter(|(c, _)| chordal(*c, *p) < 1e-4)
                    .min_by(|a, b| chordal(a.0, *p).total_cmp(&chordal(b.0, *p)))
                {
                    *p = *c;
                }
            }
        }
        pre
    }

    fn register_preimages(&mut self, v: usize, pre: Vec<(Point, usize)>) -> Result<()> {
        let total: usize = pre.iter().map(|p| p.1).sum();
        if total != self.degree() {
            return Err(Error::Topology(format!("vertex {v} has {total} preimages counted with multiplicity")));
        }
        let rec = self.vertices[v].clone();
        let fixed = matches!(rec.kind, VertexKind::Root { .. } | VertexKind::Infinity);
        let child = match rec.kind {
            VertexKind::Root { root } => VertexKind::Prefixed { level: 1, root },
            VertexKind::Prefixed { level, root } => VertexKind::Prefixed { level: level + 1, root },
            VertexKind::Infinity => VertexKind::Prepole { level: 1 },
            VertexKind::Prepole { level } => VertexKind::Prepole { level: level + 1 },
            VertexKind::Auxiliary => VertexKind::Auxiliary,
        };
        let mut ids = Vec::new();
        for (p, m) in pre {
            if fixed && chordal(p, rec.pos) < FIXED_EPS {
                ids.push(v);
            } else {
                ids.push(self.push_vertex(p, child, Some(v), m));
            }
        }
        self.preimage_memo.insert(v, ids);
        Ok(())
    }

    /// Registers the preimages of every listed vertex.
    pub fn ensure_preimages(&mut self, vs: &[usize]) -> Result<()> {
        let todo: BTreeSet<usize> = vs.iter().copied().filter(|v| !self.preimage_memo.contains_key(v)).collect();
        let todo: Vec<usize> = todo.into_iter().collect();
        let solved: Vec<Vec<(Point, usize)>> = todo.par_iter().map(|&v| self.solve_preimages(self.vertices[v].pos)).collect();
        for (v, pre) in todo.into_iter().zip(solved) {
            self.register_preimages(v, pre)?;
        }
        Ok(())
    }

    pub fn preimages_of(&mut self, v: usize) -> Result<Vec<usize>> {
        self.ensure_preimages(&[v])?;
        Ok(self.preimage_memo[&v].clone())
    }

    /// Lifts of an edge already computed.
    pub fn lifts_of(&self, e: usize) -> Option<&[usize]> {
        self.lift_memo.get(&e).map(|v| v.as_slice())
    }

    /// Computes the lifts of every listed edge.
    pub fn ensure_lifts(&mut self, es: &[usize]) -> Result<()> {
        let todo: BTreeSet<usize> = es.iter().copied().filter(|e| !self.lift_memo.contains_key(e)).collect();
        let todo: Vec<usize> = todo.into_iter().collect();
        let ends: Vec<usize> = todo.iter().flat_map(|&e| [self.edges[e].a, self.edges[e].b]).collect();
        self.ensure_preimages(&ends)?;
        let lifted: Vec<Result<Vec<(usize, usize, Curve)>>> = todo.par_iter().map(|&e| self.lift_edge(e)).collect();
        for (e, res) in todo.into_iter().zip(lifted) {
            let pieces = res?;
            let rec = self.edges[e].clone();
            let mut ids = Vec::with_capacity(pieces.len());
            for (c, j, curve) in pieces {
                if rec.parent == e && c == rec.a && j == rec.b {
                    ids.push(e);
                    continue;
                }
                ids.push(self.edges.len());
                self.edges.push(EdgeRecord { a: c, b: j, curve, root: rec.root, role: rec.role, parent: e, iterate: rec.iterate + 1 });
            }
            self.lift_memo.insert(e, ids);
        }
        Ok(())
    }

    /// Every lift of edge `e`, as (first end, second end, curve). Endpoint preimages must be registered.
    fn lift_edge(&self, e: usize) -> Result<Vec<(usize, usize, Curve)>> {
        let rec = &self.edges[e];
        let map = &self.desc.map;
        let k = self.charts[rec.root].local_degree as f64;
        let mut c = rec.curve.clone();
        if c.len() < 3 {
            let m = segment_point(c.pts[0], c.pts[1], 0.5);
            c.pts.insert(1, m);
            c.g.insert(1, f64::NAN);
        }
        let n = c.len();
        let d = self.degree();
        // Split where the target has d simple preimages.
        let mid_order = (0..n - 2).map(|i| {
            let h = (n - 1) / 2;
            if i % 2 == 0 {
                h + i / 2
            } else {
                h - i.div_ceil(2)
            }
        });
        let mut split = None;
        for mid in mid_order.filter(|&m| m >= 1 && m <= n - 2) {
            let pre = self.solve_preimages(c.pts[mid]);
            if pre.len() == d && pre.iter().all(|p| p.1 == 1) {
                split = Some((mid, pre));
                break;
            }
        }
        let Some((mid, pre)) = split else {
            return Err(Error::CriticalValueOnCurve(format!("{:?}", c.pts[n / 2])));
        };
        let params = LiftParams::new(self.tol.ray_step, self.tol.lift_eps);
        // Target sequences with fractional curve indices, refined toward the ends.
        let (fwd, fwd_idx) = refined_targets(&c.pts, mid, n - 1);
        let (bwd, bwd_idx) = refined_targets(&c.pts, mid, 0);
        let center_pre = &self.preimage_memo[&rec.a];
        let julia_pre = &self.preimage_memo[&rec.b];
        let mut out = Vec::with_capacity(d);
        for (s, _) in pre {
            let (pf, jf) = lift_points(map, &fwd, s, &params)?;
            let (pb, jb) = lift_points(map, &bwd, s, &params)?;
            let jv = self.snap(*pf.last().unwrap(), julia_pre)?;
            let cv = self.snap(*pb.last().unwrap(), center_pre)?;
            let mut curve = Curve::default();
            curve.push(self.vertices[cv].pos, c.g[0] / k);
            for i in (0..pb.len()).rev() {
                if i == 0 {
                    break;
                }
                let f = map_index(&bwd_idx, jb[i]);
                curve.push(pb[i], interpolate_g(&c.g, f) / k);
            }
            for i in 0..pf.len() {
                let f = map_index(&fwd_idx, jf[i]);
                curve.push(pf[i], interpolate_g(&c.g, f) / k);
            }
            curve.push(self.vertices[jv].pos, c.g[n - 1] / k);
            let kk = self.charts[rec.root].local_degree;
            let rays = rec.role == EdgeRole::Ray;
            let curve = decimate(&curve, self.tol.max_chord, self.tol.curve_dev, |g| rays && needed_anchor(g, kk));
            out.push((cv, jv, curve));
        }
        Ok(out)
    }

    /// Nearest candidate vertex to the end of a lift, rejecting ambiguous matches.
    fn snap(&self, p: Point, candidates: &[usize]) -> Result<usize> {
        let mut best = (f64::INFINITY, usize::MAX);
        let mut second = f64::INFINITY;
        for &v in candidates {
            let dist = chordal(p, self.vertices[v].pos);
            if dist < best.0 {
                second = best.0;
                best = (dist, v);
            } else if dist < second && v != best.1 {
                second = dist;
            }
        }
        if best.1 == usize::MAX || best.0 > 1e-4 || (second.is_finite() && second < 10.0 * best.0) {
            return Err(Error::LiftDiverged(format!(
                "lift ends {:e} from the nearest preimage vertex (next {:e})",
                best.0, second
            )));
        }
        Ok(best.1)
    }

    /// Edges of the component containing infinity.
    pub fn infinity_component(&self, es: &[usize]) -> Vec<usize> {
        let mut ids: HashMap<usize, usize> = HashMap::new();
        let local = |v: usize, ids: &mut HashMap<usize, usize>| {
            let n = ids.len();
            *ids.entry(v).or_insert(n)
        };
        let mut pairs = Vec::with_capacity(es.len());
        let inf = local(self.infinity, &mut ids);
        for &e in es {
            let a = local(self.edges[e].a, &mut ids);
            let b = local(self.edges[e].b, &mut ids);
            pairs.push((a, b));
        }
        let mut uf = UnionFind::new(ids.len());
        for &(a, b) in &pairs {
            uf.union(a, b);
        }
        let root = uf.find(inf);
        let mut out: Vec<usize> = es.iter().zip(&pairs).filter(|(_, p)| uf.find(p.0) == root).map(|(e, _)| *e).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Component containing infinity of the preimage of an edge set.
    pub fn pullback(&mut self, es: &[usize]) -> Result<Vec<usize>> {
        self.ensure_lifts(es)?;
        let all: Vec<usize> = es.iter().flat_map(|e| self.lift_memo[e].iter().copied()).collect();
        Ok(self.infinity_component(&all))
    }

    /// Edge set of the level-n Newton graph.
    pub fn newton_graph(&mut self, n: usize) -> Result<Vec<usize>> {
        while self.delta.len() <= n {
            let next = self.pullback(&self.delta.last().unwrap().clone())?;
            self.delta.push(next);
        }
        Ok(self.delta[n].clone())
    }

    /// Registry ids of the endpoints of an edge set, sorted.
    pub fn vertex_set(&self, es: &[usize]) -> Vec<usize> {
        let s: BTreeSet<usize> = es.iter().flat_map(|&e| [self.edges[e].a, self.edges[e].b]).collect();
        s.into_iter().collect()
    }

    /// Assembles and finalizes the embedded graph of an edge set.
    pub fn planar_graph(&self, level: usize, es: &[usize]) -> Result<PlanarGraph> {
        let vs = self.vertex_set(es);
        let index: HashMap<usize, usize> = vs.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let vertices = vs
            .iter()
            .map(|&v| GVertex { key: v as u64, pos: self.vertices[v].pos, kind: self.vertices[v].kind })
            .collect();
        let mut sorted = es.to_vec();
        sorted.sort_unstable();
        let edges = sorted
            .iter()
            .map(|&e| {
                let r = &self.edges[e];
                GEdge {
                    a: index[&r.a],
                    b: index[&r.b],
                    pts: r.curve.pts.clone(),
                    provenance: Provenance {
                        id: Some(e as u64),
                        lifts: Some(r.parent as u64),
                        iterate: r.iterate,
                        role: r.role,
                    },
                }
            })
            .collect();
        let mut g = PlanarGraph::new(level, vertices, edges);
        g.finalize()?;
        Ok(g)
    }

    /// Largest distance from the image of a sampled edge point to the image edge.
    pub fn forward_invariance_residual(&self, es: &[usize], samples: usize) -> f64 {
        es.par_iter()
            .map(|&e| {
                let r = &self.edges[e];
                let parent = &self.edges[r.parent].curve.pts;
                let pts = &r.curve.pts;
                let step = (pts.len() / samples.max(1)).max(1);
                (0..pts.len())
                    .step_by(step)
                    .map(|i| chordal_to_polyline(self.desc.map.eval(pts[i]), parent))
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Free critical values that are not vertices of the channel diagram.
    pub fn free_critical_values(&self) -> Vec<Point> {
        let mut out: Vec<Point> = Vec::new();
        for (c, _) in self.desc.free_critical_points() {
            let v = self.desc.map.eval(c);
            let on_delta = v.is_infinite()
                || self.root_vertices.iter().any(|&r| chordal(self.vertices[r].pos, v) < self.tol.root_eps);
            if !on_delta && !out.iter().any(|w| chordal(*w, v) < 1e-9) {
                out.push(v);
            }
        }
        out.sort_by(crate::rational::cmp_points);
        out
    }

    /// Vertices of N^-j(infinity) for j = 1..=levels.
    pub fn prepole_tree(&mut self, levels: usize) -> Result<Vec<usize>> {
        let mut frontier = vec![self.infinity];
        let mut all = BTreeSet::new();
        for _ in 0..levels {
            self.ensure_preimages(&frontier)?;
            let next: BTreeSet<usize> = frontier.iter().flat_map(|v| self.preimage_memo[v].iter().copied()).collect();
            all.extend(next.iter().copied());
            frontier = next.into_iter().collect();
        }
        Ok(all.into_iter().collect())
    }
}

/// Target points from index `from` toward `to` along `pts`, with geometric refinement
/// onto the final point, and the fractional curve index of each.
fn refined_targets(pts: &[Point], from: usize, to: usize) -> (Vec<Point>, Vec<f64>) {
    let mut t = Vec::new();
    let mut f = Vec::new();
    let dir: isize = if to > from { 1 } else { -1 };
    let mut i = from as isize;
    while i != to as isize {
        t.push(pts[i as usize]);
        f.push(i as f64);
        i += dir;
    }
    let last = *t.last().unwrap();
    let last_i = *f.last().unwrap();
    let end = pts[to];
    let mut h = 0.5;
    for _ in 0..200 {
        let p = segment_point(last, end, 1.0 - h);
        if chordal(p, end) < END_EPS {
            break;
        }
        t.push(p);
        f.push(last_i + dir as f64 * (1.0 - h));
        h *= 0.5;
    }
    (t, f)
}

/// Converts a fractional index into a target list into a fractional curve index.
fn map_index(idx: &[f64], x: f64) -> f64 {
    let i = x.floor() as usize;
    if i + 1 >= idx.len() {
        return idx[idx.len() - 1];
    }
    let fr = x - i as f64;
    let (a, b) = (idx[i], idx[i + 1]);
    // Only integer curve indices carry exact potentials.
    if fr == 0.0 {
        a
    } else {
        a.min(b) + (b - a).abs() * if b > a { fr } else { 1.0 - fr }
    }
}

/// Result of the pole coverage search.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PoleCoverage {
    /// Smallest level whose graph contains every pole.
    pub level: usize,
    /// For m = 0, 1, 2: whether every point of N^-(m+1)(infinity) is a vertex at level m + `level`.
    pub prepoles_reached: Vec<bool>,
}

/// Finds the first level containing every pole, then checks deeper prepoles.
pub fn pole_coverage_level(atlas: &mut Atlas, n_max: usize) -> Result<PoleCoverage> {
    let poles: Vec<usize> = atlas.preimages_of(atlas.infinity)?.into_iter().filter(|&v| v != atlas.infinity).collect();
    let mut level = None;
    for n in 0..=n_max {
        let es = atlas.newton_graph(n)?;
        let vs: BTreeSet<usize> = atlas.vertex_set(&es).into_iter().collect();
        if poles.iter().all(|p| vs.contains(p)) {
            level = Some(n);
            break;
        }
    }
    let level = level.ok_or(Error::NotReachedWithin(n_max))?;
    let mut prepoles_reached = Vec::new();
    for m in 0..=2usize {
        let tree = atlas.prepole_tree(m + 1)?;
        let es = atlas.newton_graph(m + level)?;
        let vs: BTreeSet<usize> = atlas.vertex_set(&es).into_iter().collect();
        prepoles_reached.push(tree.iter().filter(|&&v| v != atlas.infinity).all(|v| vs.contains(v)));
    }
    Ok(PoleCoverage { level, prepoles_reached })
}

/// A cycle of a Newton graph separating infinity from the critical values of a face of the channel diagram.
#[derive(Clone, Debug)]
pub struct SeparatingCircle {
    /// Face index in the channel diagram graph.
    pub face: usize,
    /// Registry edge ids in cyclic order.
    pub edges: Vec<usize>,
    /// Registry vertex ids in cyclic order (first not repeated).
    pub vertices: Vec<usize>,
    pub critical_values: Vec<Point>,
}

#[derive(Clone, Debug)]
pub struct CircleSet {
    /// Newton graph level the circles were taken from.
    pub level: usize,
    pub circles: Vec<SeparatingCircle>,
    /// Largest prepole level on any circle.
    pub nu: usize,
}

impl CircleSet {
    pub fn edge_ids(&self) -> Vec<usize> {
        let s: BTreeSet<usize> = self.circles.iter().flat_map(|c| c.edges.iter().copied()).collect();
        s.into_iter().collect()
    }
}

/// Separating circles inside the Newton graph of level `n`.
pub fn find_separating_circles(atlas: &mut Atlas, n: usize) -> Result<CircleSet> {
    let mut base = atlas.planar_graph(0, &atlas.channel.clone())?;
    base.build_locator();
    let crit = atlas.free_critical_values();
    let es = atlas.newton_graph(n)?;
    let channel: BTreeSet<usize> = atlas.channel.iter().copied().collect();
    let mut circles = Vec::new();
    let mut nu = 0;
    for f in 0..base.face_count() {
        let cv: Vec<Point> = crit.iter().copied().filter(|&p| base.locate_any(p) == f).collect();
        if cv.is_empty() {
            continue;
        }
        let roots: Vec<usize> = base
            .face_vertices(f)
            .into_iter()
            .map(|i| base.vertices[i].key as usize)
            .filter(|&v| matches!(atlas.vertices[v].kind, VertexKind::Root { .. }))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        // Edges of the level-n graph inside this face.
        let inside: Vec<usize> = es
            .iter()
            .copied()
            .filter(|e| !channel.contains(e))
            .filter(|&e| {
                let pts = &atlas.edges[e].curve.pts;
                base.locate_any(pts[pts.len() / 2]) == f
            })
            .collect();
        let circle = separating_cycle(atlas, &inside, &roots, &cv, n)?;
        for &v in &circle.1 {
            if let VertexKind::Prepole { level } = atlas.vertices[v].kind {
                nu = nu.max(level);
            }
        }
        circles.push(SeparatingCircle { face: f, edges: circle.0, vertices: circle.1, critical_values: cv });
    }
    Ok(CircleSet { level: n, circles, nu })
}

/// Outer boundary cycle, seen from infinity, of the component through the given roots.
fn separating_cycle(atlas: &Atlas, inside: &[usize], roots: &[usize], cv: &[Point], n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let fail = || Error::NoCircleAtThisLevel(n);
    let first = *roots.first().ok_or_else(fail)?;
    // Component of the root vertices.
    let vs = atlas.vertex_set(inside);
    let index: HashMap<usize, usize> = vs.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut uf = UnionFind::new(vs.len());
    for &e in inside {
        uf.union(index[&atlas.edges[e].a], index[&atlas.edges[e].b]);
    }
    let Some(&fi) = index.get(&first) else { return Err(fail()) };
    let rc = uf.find(fi);
    for r in roots {
        match index.get(r) {
            Some(&i) if uf.find(i) == rc => {}
            _ => return Err(fail()),
        }
    }
    let comp: Vec<usize> = inside
        .iter()
        .copied()
        .filter(|e| uf.find(index[&atlas.edges[*e].a]) == rc)
        .collect();
    let mut g = atlas.planar_graph(n, &comp)?;
    g.build_locator();
    let phi = g.locate_any(Point::Infinity);
    // Keep edges with exactly one side on the face of infinity.
    let walk = g.face_darts(phi);
    let on: BTreeSet<usize> = walk.iter().copied().collect();
    let boundary: Vec<usize> = walk.iter().copied().filter(|d| !on.contains(&(d ^ 1))).collect();
    if boundary.is_empty() {
        return Err(fail());
    }
    // The boundary must be one simple cycle.
    let mut seen = BTreeSet::new();
    for &d in &boundary {
        if !seen.insert(g.tail(d)) {
            return Err(fail());
        }
    }
    for w in 0..boundary.len() {
        if g.head(boundary[w]) != g.tail(boundary[(w + 1) % boundary.len()]) {
            return Err(fail());
        }
    }
    let cyc_vertices: Vec<usize> = boundary.iter().map(|&d| g.vertices[g.tail(d)].key as usize).collect();
    if !roots.iter().all(|r| cyc_vertices.contains(r)) {
        return Err(fail());
    }
    let cyc_edges: Vec<usize> = boundary.iter().map(|&d| g.edges[d / 2].provenance.id.unwrap() as usize).collect();
    // Critical values must lie off the face of infinity, on the cycle itself.
    let cycle_graph = {
        let mut cg = atlas.planar_graph(n, &cyc_edges)?;
        cg.build_locator();
        cg
    };
    let inf_face = cycle_graph.locate_any(Point::Infinity);
    for &p in cv {
        let f = cycle_graph.locate(p, atlas.tol.lift_eps).ok_or_else(fail)?;
        if f == inf_face || cycle_graph.locate_by_winding(p) == cycle_graph.locate_by_winding(Point::Infinity) {
            return Err(fail());
        }
    }
    Ok((cyc_edges, cyc_vertices))
}

/// Separating circles at the first level from `start` where they exist.
pub fn search_circles(atlas: &mut Atlas, start: usize, n_max: usize) -> Result<CircleSet> {
    for n in start..=n_max {
        match find_separating_circles(atlas, n) {
            Ok(c) => return Ok(c),
            Err(Error::NoCircleAtThisLevel(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::NoCircleAtThisLevel(n_max))
}

/// The augmented graph and its pullbacks.
pub struct Augmented {
    pub circles: CircleSet,
    pub pole_level: usize,
    /// Nesting period N - 1 + nu, at least 1.
    pub period: usize,
    levels: Vec<Vec<usize>>,
}

impl Augmented {
    /// Channel diagram plus circles.
    pub fn new(atlas: &Atlas, circles: CircleSet, pole_level: usize) -> Self {
        let mut base: Vec<usize> = atlas.channel.clone();
        base.extend(circles.edge_ids());
        base.sort_unstable();
        base.dedup();
        let period = (pole_level + circles.nu).saturating_sub(1).max(1);
        Augmented { circles, pole_level, period, levels: vec![base] }
    }

    /// Edge set of the augmented graph at level `n`.
    pub fn level(&mut self, atlas: &mut Atlas, n: usize) -> Result<Vec<usize>> {
        while self.levels.len() <= n {
            let next = atlas.pullback(&self.levels.last().unwrap().clone())?;
            self.levels.push(next);
        }
        Ok(self.levels[n].clone())
    }
}

/// Fixed rays, local degree and accesses at infinity of every root basin.
pub fn access_census(atlas: &Atlas) -> Result<Vec<crate::basin::AccessReport>> {
    let g = atlas.planar_graph(0, &atlas.channel)?;
    let inf = g.vertex_by_key(atlas.infinity as u64).ok_or_else(|| Error::Topology("channel diagram misses infinity".into()))?;
    let at_inf: Vec<usize> = g.rotation(inf).iter().map(|&d| atlas.edges[g.edges[d / 2].provenance.id.unwrap() as usize].root).collect();
    Ok((0..atlas.desc.roots.len())
        .map(|i| {
            let local_degree = atlas.desc.local_degree_at_root(i);
            let fixed_rays = atlas.channel.iter().filter(|&&e| atlas.edges[e].root == i).count();
            let accesses_at_infinity = at_inf.iter().filter(|&&r| r == i).count();
            crate::basin::AccessReport {
                root: i,
                local_degree,
                fixed_rays,
                accesses_at_infinity,
                consistent: fixed_rays + 1 == local_degree && accesses_at_infinity == fixed_rays,
            }
        })
        .collect())
}

/// Whether every id of `a` appears in `b` (both sorted).
pub fn is_subset(a: &[usize], b: &[usize]) -> bool {
    let s: BTreeSet<usize> = b.iter().copied().collect();
    a.iter().all(|x| s.contains(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::newton::newton_map;
    use crate::poly::ComplexPolynomial;

    fn atlas(coeffs: &[f64]) -> Atlas {
        let tol = Tolerances::default();
        let d = newton_map(&ComplexPolynomial::from_real(coeffs), &tol).unwrap();
        Atlas::new(&d, &tol).unwrap()
    }

    #[test]
    fn channel_diagram_of_cube_roots() {
        let a = atlas(&[-1.0, 0.0, 0.0, 1.0]);
        let g = a.planar_graph(0, &a.channel).unwrap();
        assert_eq!((g.vertices.len(), g.edges.len(), g.face_count()), (4, 3, 1));
        assert_eq!(g.euler_characteristic(), 2);
    }

    #[test]
    fn first_pullback_reaches_the_pole() {
        let mut a = atlas(&[-1.0, 0.0, 0.0, 1.0]);
        let d1 = a.newton_graph(1).unwrap();
        assert!(is_subset(&a.channel.clone(), &d1));
        let vs = a.vertex_set(&d1);
        assert!(vs.iter().any(|&v| a.vertices[v].pos.chordal(&Point::new(0.0, 0.0)) < 1e-12));
        let g = a.planar_graph(1, &d1).unwrap();
        assert_eq!(g.euler_characteristic(), 2);
        for e in &g.edges {
            assert!(g.vertices[e.a].kind.is_fatou() && g.vertices[e.b].kind.is_julia());
        }
        assert!(a.forward_invariance_residual(&d1, 50) < 10.0 * a.tol.lift_eps);
    }
}
