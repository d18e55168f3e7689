//! Embedded planar graphs on the sphere: rotation systems, faces and point location.
//!
//! Edge `e` has two darts: `2e` runs along its polyline from `a` to `b`, `2e + 1`
//! runs back. Faces are traced with the face on the left of every dart.

use crate::error::{Error, Result};
use crate::sphere::{chordal, Chart, Point, C64};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum VertexKind {
    Root { root: usize },
    Infinity,
    /// N^level maps the vertex to infinity, level minimal.
    Prepole { level: usize },
    /// N^level maps the vertex to a root, level minimal and positive.
    Prefixed { level: usize, root: usize },
    Auxiliary,
}

impl VertexKind {
    /// Fatou vertices are roots and their preimages.
    pub fn is_fatou(self) -> bool {
        matches!(self, VertexKind::Root { .. } | VertexKind::Prefixed { .. })
    }

    pub fn is_julia(self) -> bool {
        matches!(self, VertexKind::Infinity | VertexKind::Prepole { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GVertex {
    /// Stable identifier shared across levels (registry id or synthetic).
    pub key: u64,
    pub pos: Point,
    #[serde(flatten)]
    pub kind: VertexKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeRole {
    Ray,
    Circle,
    Stub,
    Arc,
}

/// Where an edge came from: its registry id and the edge it maps onto.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub id: Option<u64>,
    pub lifts: Option<u64>,
    /// Number of pullbacks from the base graph.
    pub iterate: usize,
    pub role: EdgeRole,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GEdge {
    pub a: usize,
    pub b: usize,
    pub pts: Vec<Point>,
    pub provenance: Provenance,
}

/// A graph with polyline edges, plus its derived combinatorics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanarGraph {
    pub level: usize,
    pub vertices: Vec<GVertex>,
    pub edges: Vec<GEdge>,
    #[serde(skip)]
    topo: Option<Box<Topology>>,
}

#[derive(Clone, Debug)]
struct Topology {
    /// Outgoing darts at each vertex, counterclockwise.
    rotation: Vec<Vec<usize>>,
    /// Index of each dart within its tail's rotation.
    dart_pos: Vec<usize>,
    dart_face: Vec<usize>,
    faces: Vec<Vec<usize>>,
    locator: Option<Locator>,
}

impl PartialEq for PlanarGraph {
    fn eq(&self, other: &Self) -> bool {
        self.level == other.level && self.vertices == other.vertices && self.edges == other.edges
    }
}

/// Chart used for angles around a vertex.
fn local_chart(p: Point) -> Chart {
    match p {
        Point::Finite(z) if z.norm() <= 1.0 => Chart::Z,
        _ => Chart::W,
    }
}

impl PlanarGraph {
    pub fn new(level: usize, vertices: Vec<GVertex>, edges: Vec<GEdge>) -> Self {
        PlanarGraph { level, vertices, edges, topo: None }
    }

    pub fn empty() -> Self {
        Self::new(0, Vec::new(), Vec::new())
    }

    pub fn dart_count(&self) -> usize {
        2 * self.edges.len()
    }

    pub fn tail(&self, d: usize) -> usize {
        let e = &self.edges[d / 2];
        if d.is_multiple_of(2) {
            e.a
        } else {
            e.b
        }
    }

    pub fn head(&self, d: usize) -> usize {
        self.tail(d ^ 1)
    }

    /// Points of a dart from tail to head.
    pub fn dart_points(&self, d: usize) -> Vec<Point> {
        let pts = &self.edges[d / 2].pts;
        if d.is_multiple_of(2) {
            pts.clone()
        } else {
            pts.iter().rev().copied().collect()
        }
    }

    fn dart_iter(&self, d: usize) -> Box<dyn Iterator<Item = &Point> + '_> {
        let pts = &self.edges[d / 2].pts;
        if d.is_multiple_of(2) {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        }
    }

    /// Computes rotation system and faces; must be called after edits.
    pub fn finalize(&mut self) -> Result<()> {
        let nv = self.vertices.len();
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for d in 0..self.dart_count() {
            out[self.tail(d)].push(d);
        }
        let mut rotation = Vec::with_capacity(nv);
        for (v, darts) in out.into_iter().enumerate() {
            rotation.push(self.sort_darts(v, darts)?);
        }
        let mut dart_pos = vec![0; self.dart_count()];
        for r in &rotation {
            for (i, &d) in r.iter().enumerate() {
                dart_pos[d] = i;
            }
        }
        let mut dart_face = vec![usize::MAX; self.dart_count()];
        let mut faces = Vec::new();
        for start in 0..self.dart_count() {
            if dart_face[start] != usize::MAX {
                continue;
            }
            let f = faces.len();
            let mut walk = Vec::new();
            let mut d = start;
            loop {
                if dart_face[d] != usize::MAX {
                    return Err(Error::Topology(format!("dart {d} visited twice while tracing faces")));
                }
                dart_face[d] = f;
                walk.push(d);
                // Next dart: predecessor of the twin in the rotation at the head.
                let t = d ^ 1;
                let h = self.tail(t);
                let r = &rotation[h];
                let i = dart_pos[t];
                d = r[(i + r.len() - 1) % r.len()];
                if d == start {
                    break;
                }
            }
            faces.push(walk);
        }
        self.topo = Some(Box::new(Topology { rotation, dart_pos, dart_face, faces, locator: None }));
        Ok(())
    }

    /// Orders darts at `v` counterclockwise by exit angle in the local chart.
    fn sort_darts(&self, v: usize, darts: Vec<usize>) -> Result<Vec<usize>> {
        if darts.len() <= 1 {
            return Ok(darts);
        }
        let pv = self.vertices[v].pos;
        let ch = local_chart(pv);
        let cv = pv.in_chart(ch).unwrap();
        let offsets: Vec<Vec<C64>> = darts
            .iter()
            .map(|&d| {
                let mut o = Vec::new();
                for p in self.dart_iter(d).skip(1) {
                    match p.in_chart(ch) {
                        Some(z) => o.push(z - cv),
                        None => {
                            o.push(C64::new(f64::INFINITY, 0.0));
                            break;
                        }
                    }
                }
                o
            })
            .collect();
        let extent: f64 = offsets
            .iter()
            .map(|o| o.iter().map(|z| if z.re.is_finite() { z.norm() } else { f64::INFINITY }).fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min);
        if !(extent > 0.0) {
            return Err(Error::Topology(format!("degenerate edge at vertex {v}")));
        }
        let mut radius = 0.5 * extent.min(1.0);
        for _ in 0..8 {
            let angles: Vec<f64> = offsets.iter().map(|o| exit_angle(o, radius)).collect();
            let mut idx: Vec<usize> = (0..darts.len()).collect();
            idx.sort_by(|&i, &j| angles[i].partial_cmp(&angles[j]).unwrap().then(darts[i].cmp(&darts[j])));
            let distinct = idx.windows(2).all(|w| angles[w[1]] - angles[w[0]] > 1e-12)
                && angles[idx[0]] + TAU - angles[*idx.last().unwrap()] > 1e-12;
            if distinct {
                return Ok(idx.into_iter().map(|i| darts[i]).collect());
            }
            radius *= 0.1;
        }
        Err(Error::Topology(format!("edges leave vertex {v} tangentially")))
    }

    fn topo(&self) -> &Topology {
        self.topo.as_ref().expect("graph not finalized")
    }

    pub fn is_finalized(&self) -> bool {
        self.topo.is_some()
    }

    pub fn rotation(&self, v: usize) -> &[usize] {
        &self.topo().rotation[v]
    }

    pub fn faces(&self) -> &[Vec<usize>] {
        &self.topo().faces
    }

    /// Position of dart `d` in the rotation at its tail.
    pub fn rotation_index(&self, d: usize) -> usize {
        self.topo().dart_pos[d]
    }

    pub fn face_of_dart(&self, d: usize) -> usize {
        self.topo().dart_face[d]
    }

    pub fn face_count(&self) -> usize {
        self.topo().faces.len()
    }

    /// Number of connected components (isolated vertices count).
    pub fn components(&self) -> usize {
        let mut uf = UnionFind::new(self.vertices.len());
        for e in &self.edges {
            uf.union(e.a, e.b);
        }
        (0..self.vertices.len()).filter(|&v| uf.find(v) == v).count()
    }

    /// V - E + F, which is 2 for a connected graph with a valid embedding.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.face_count() as i64
    }

    /// Sectors at a vertex: one per outgoing dart.
    pub fn count_accesses(&self, v: usize) -> usize {
        self.topo().rotation[v].len()
    }

    /// Closed polyline bounding a face (first point repeated at the end).
    pub fn face_polyline(&self, f: usize) -> Vec<Point> {
        let mut out: Vec<Point> = Vec::new();
        for &d in &self.topo().faces[f] {
            for (i, p) in self.dart_iter(d).enumerate() {
                if i == 0 && !out.is_empty() {
                    continue;
                }
                out.push(*p);
            }
        }
        out
    }

    /// Vertices on the boundary walk of a face, in walk order, with repetitions.
    /// Boundary walk of face `f` as darts.
    pub fn face_darts(&self, f: usize) -> &[usize] {
        &self.topo().faces[f]
    }

    pub fn face_vertices(&self, f: usize) -> Vec<usize> {
        self.topo().faces[f].iter().map(|&d| self.tail(d)).collect()
    }

    pub fn vertex_by_key(&self, key: u64) -> Option<usize> {
        self.vertices.iter().position(|v| v.key == key)
    }

    /// Builds the point-location index.
    pub fn build_locator(&mut self) {
        let loc = Locator::new(self);
        if let Some(t) = self.topo.as_mut() {
            t.locator = Some(loc);
        }
    }

    fn locator(&self) -> &Locator {
        self.topo().locator.as_ref().expect("locator not built")
    }

    /// Face containing `p`, or `None` when `p` is within `eps` of the graph.
    pub fn locate(&self, p: Point, eps: f64) -> Option<usize> {
        self.locator().locate(self, p, eps)
    }

    /// Chordal distance from `p` to the nearest edge accepted by `keep`, if one lies
    /// within `eps`.
    pub fn distance_within(&self, p: Point, eps: f64, keep: impl Fn(usize) -> bool) -> Option<f64> {
        let mut best: Option<f64> = None;
        self.locator().visit_near(self, p, eps, |e, d| {
            if keep(e) && best.is_none_or(|b| d < b) {
                best = Some(d);
            }
            false
        });
        best
    }

    /// Face containing `p` ignoring proximity to the graph.
    pub fn locate_any(&self, p: Point) -> usize {
        self.locator().face_hit(self, p)
    }

    /// Winding number of face `f`'s boundary around `p`, in the locator chart.
    pub fn face_winding(&self, f: usize, p: Point) -> i64 {
        let loc = self.locator();
        let x = loc.chart(p);
        let poly: Vec<C64> = self.face_polyline(f).iter().map(|q| loc.chart(*q)).collect();
        winding(&poly, x)
    }

    /// Face containing `p` by winding numbers alone (independent of the ray index).
    pub fn locate_by_winding(&self, p: Point) -> usize {
        let loc = self.locator();
        (0..self.face_count()).find(|&f| f != loc.outer && self.face_winding(f, p) == 1).unwrap_or(loc.outer)
    }

    /// Points strictly inside a face, found by nudging off boundary segments.
    pub fn interior_samples(&self, f: usize, count: usize) -> Vec<Point> {
        let loc = self.locator();
        let mut out = Vec::new();
        let darts = &self.topo().faces[f];
        let total: usize = darts.iter().map(|&d| self.edges[d / 2].pts.len() - 1).sum();
        if total == 0 {
            return out;
        }
        let stride = (total / (4 * count.max(1))).max(1);
        let mut k = 0;
        for &d in darts {
            let pts = self.dart_points(d);
            for w in pts.windows(2) {
                k += 1;
                if k % stride != 0 {
                    continue;
                }
                let (a, b) = (loc.chart(w[0]), loc.chart(w[1]));
                let len = (b - a).norm();
                if !(len > 0.0) || !len.is_finite() {
                    continue;
                }
                let mid = (a + b) * 0.5;
                // Left normal of the dart points into the face.
                let n = (b - a) * C64::new(0.0, 1.0) / len;
                for s in [0.25, 0.05, 0.01, 1e-3] {
                    let q = mid + n * (len * s);
                    let p = loc.unchart(q);
                    if self.locate(p, 0.0) == Some(f) {
                        out.push(p);
                        break;
                    }
                }
                if out.len() >= count {
                    return out;
                }
            }
        }
        out
    }

    /// Up to `count` points of face `f` far from its boundary, deepest first.
    ///
    /// A grid over the face's extent in the locator chart is filtered by point
    /// location and ranked by chordal distance to the boundary.
    pub fn deep_samples(&self, f: usize, count: usize) -> Vec<Point> {
        let loc = self.locator();
        let poly = self.face_polyline(f);
        let xs: Vec<C64> = poly.iter().map(|p| loc.chart(*p)).collect();
        let (mut lo, mut hi) = (xs[0], xs[0]);
        for x in &xs {
            lo = C64::new(lo.re.min(x.re), lo.im.min(x.im));
            hi = C64::new(hi.re.max(x.re), hi.im.max(x.im));
        }
        const N: usize = 24;
        let mut found: Vec<(f64, Point)> = Vec::new();
        for i in 0..N {
            for j in 0..N {
                let q = C64::new(
                    lo.re + (hi.re - lo.re) * (i as f64 + 0.5) / N as f64,
                    lo.im + (hi.im - lo.im) * (j as f64 + 0.5) / N as f64,
                );
                let p = loc.unchart(q);
                if self.locate_any(p) == f {
                    found.push((crate::sphere::chordal_to_polyline(p, &poly), p));
                }
            }
        }
        found.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut out: Vec<Point> = found.into_iter().take(count).map(|x| x.1).collect();
        if out.len() < count {
            out.extend(self.interior_samples(f, count - out.len()));
        }
        out
    }

    /// Index of the face that contains the locator's reference point.
    pub fn outer_face(&self) -> usize {
        self.locator().outer
    }

    /// First pair of edges whose polylines cross away from shared vertices.
    pub fn find_crossing(&self, vertex_eps: f64) -> Option<(usize, usize)> {
        let loc = Locator::new(self);
        loc.find_crossing(self, vertex_eps)
    }

    /// Smallest chordal distance between polylines of two vertex-disjoint edge sets.
    pub fn polyline_distance(a: &[Point], b: &[Point]) -> f64 {
        let mut best = f64::INFINITY;
        for p in a {
            best = best.min(crate::sphere::chordal_to_polyline(*p, b));
        }
        for p in b {
            best = best.min(crate::sphere::chordal_to_polyline(*p, a));
        }
        best
    }
}

fn exit_angle(offsets: &[C64], radius: f64) -> f64 {
    let mut prev = C64::new(0.0, 0.0);
    for &z in offsets {
        if !z.re.is_finite() {
            let a = prev.arg();
            return if prev.norm() > 0.0 { a.rem_euclid(TAU) } else { 0.0 };
        }
        if z.norm() >= radius {
            // Interpolate to the circle of the given radius.
            let (p0, p1) = (prev.norm(), z.norm());
            let t = if p1 > p0 { (radius - p0) / (p1 - p0) } else { 1.0 };
            let q = prev + (z - prev) * t;
            return q.arg().rem_euclid(TAU);
        }
        prev = z;
    }
    prev.arg().rem_euclid(TAU)
}

/// Winding number of a closed polygon around `x`.
pub fn winding(poly: &[C64], x: C64) -> i64 {
    let mut total = 0.0;
    for w in poly.windows(2) {
        let (a, b) = (w[0] - x, w[1] - x);
        if a.norm() == 0.0 || b.norm() == 0.0 {
            continue;
        }
        total += (b / a).arg();
    }
    (total / TAU).round() as i64
}

pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut j = i;
        while self.parent[j] != r {
            let n = self.parent[j];
            self.parent[j] = r;
            j = n;
        }
        r
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (x, y) = (self.find(a), self.find(b));
        if x != y {
            self.parent[x.max(y)] = x.min(y);
        }
    }
}

/// Ray-casting index in the chart X = 1/(z - c), with c far from the graph.
#[derive(Clone, Debug)]
struct Locator {
    c: C64,
    /// Segment end points in X coordinates, the forward dart and the index within the edge.
    segs: Vec<(C64, C64, u32, u32)>,
    /// Uniform grid over X in compressed rows: cell i holds items[start[i]..start[i + 1]].
    start: Vec<u32>,
    items: Vec<u32>,
    nx: usize,
    ny: usize,
    x0: C64,
    cell: C64,
    outer: usize,
}

fn eval_mobius(m: (C64, C64, C64, C64), t: f64) -> C64 {
    (m.0 * t + m.1) / (m.2 * t + m.3)
}

impl Locator {
    fn new(g: &PlanarGraph) -> Self {
        let c = pick_reference(g);
        let chart = |p: &Point| match p {
            Point::Infinity => C64::new(0.0, 0.0),
            Point::Finite(z) => (z - c).inv(),
        };
        let mut segs = Vec::new();
        for (e, edge) in g.edges.iter().enumerate() {
            for (i, w) in edge.pts.windows(2).enumerate() {
                segs.push((chart(&w[0]), chart(&w[1]), (2 * e) as u32, i as u32));
            }
        }
        // Segments are straight in their drawing chart, so arcs in X; pad by the sagitta.
        let boxes: Vec<(C64, C64)> = segs
            .iter()
            .map(|s| {
                let e = &g.edges[(s.2 / 2) as usize];
                let i = s.3 as usize;
                let m = chart(&crate::sphere::segment_point(e.pts[i], e.pts[i + 1], 0.5));
                let m = if m.re.is_finite() && m.im.is_finite() { m } else { (s.0 + s.1) * 0.5 };
                let pad = (m - (s.0 + s.1) * 0.5).norm();
                let lo = C64::new(s.0.re.min(s.1.re).min(m.re) - pad, s.0.im.min(s.1.im).min(m.im) - pad);
                let hi = C64::new(s.0.re.max(s.1.re).max(m.re) + pad, s.0.im.max(s.1.im).max(m.im) + pad);
                (lo, hi)
            })
            .collect();
        let (mut lo, mut hi) = (C64::new(f64::INFINITY, f64::INFINITY), C64::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for b in &boxes {
            lo = C64::new(lo.re.min(b.0.re), lo.im.min(b.0.im));
            hi = C64::new(hi.re.max(b.1.re), hi.im.max(b.1.im));
        }
        if !(hi.re > lo.re && hi.im > lo.im) {
            lo = C64::new(-1.0, -1.0);
            hi = C64::new(1.0, 1.0);
        }
        let side = ((segs.len() as f64 / 2.0).sqrt() as usize).clamp(16, 4096);
        let (nx, ny) = (side, side);
        let cell = C64::new((hi.re - lo.re) / nx as f64 * (1.0 + 1e-12), (hi.im - lo.im) / ny as f64 * (1.0 + 1e-12));
        let range = |b: &(C64, C64)| {
            let cx0 = (((b.0.re - lo.re) / cell.re).floor().max(0.0) as usize).min(nx - 1);
            let cx1 = (((b.1.re - lo.re) / cell.re).floor().max(0.0) as usize).min(nx - 1);
            let cy0 = (((b.0.im - lo.im) / cell.im).floor().max(0.0) as usize).min(ny - 1);
            let cy1 = (((b.1.im - lo.im) / cell.im).floor().max(0.0) as usize).min(ny - 1);
            (cx0, cx1, cy0, cy1)
        };
        let mut count = vec![0u32; nx * ny + 1];
        for b in &boxes {
            let (cx0, cx1, cy0, cy1) = range(b);
            for cy in cy0..=cy1 {
                for cx in cx0..=cx1 {
                    count[cy * nx + cx + 1] += 1;
                }
            }
        }
        for i in 1..count.len() {
            count[i] += count[i - 1];
        }
        let start = count;
        let mut fill = start.clone();
        let mut items = vec![0u32; start[nx * ny] as usize];
        for (i, b) in boxes.iter().enumerate() {
            let (cx0, cx1, cy0, cy1) = range(b);
            for cy in cy0..=cy1 {
                for cx in cx0..=cx1 {
                    let k = cy * nx + cx;
                    items[fill[k] as usize] = i as u32;
                    fill[k] += 1;
                }
            }
        }
        let mut loc = Locator { c, segs, start, items, nx, ny, x0: lo, cell, outer: 0 };
        if g.is_finalized() {
            // The outer face has negative signed area in X.
            let mut best = (f64::INFINITY, 0);
            for f in 0..g.face_count() {
                let poly: Vec<C64> = g.face_polyline(f).iter().map(|p| loc.chart(*p)).collect();
                let area: f64 = poly.windows(2).map(|w| (w[0].conj() * w[1]).im).sum::<f64>() * 0.5;
                if area < best.0 {
                    best = (area, f);
                }
            }
            loc.outer = best.1;
        }
        loc
    }

    fn chart(&self, p: Point) -> C64 {
        match p {
            Point::Infinity => C64::new(0.0, 0.0),
            Point::Finite(z) => (z - self.c).inv(),
        }
    }

    fn unchart(&self, x: C64) -> Point {
        if x.norm() == 0.0 {
            Point::Infinity
        } else {
            Point::Finite(self.c + x.inv())
        }
    }

    fn cell_items(&self, cx: usize, cy: usize) -> &[u32] {
        let k = cy * self.nx + cx;
        &self.items[self.start[k] as usize..self.start[k + 1] as usize]
    }

    /// Grid coordinate of `v` along one axis, unclamped.
    fn coord(v: f64, lo: f64, step: f64) -> f64 {
        ((v - lo) / step).floor()
    }

    fn face_hit(&self, g: &PlanarGraph, p: Point) -> usize {
        let x = self.chart(p);
        if !(x.re.is_finite() && x.im.is_finite()) {
            return self.outer;
        }
        let cy = Self::coord(x.im, self.x0.im, self.cell.im);
        if cy < 0.0 || cy >= self.ny as f64 {
            return self.outer;
        }
        let cy = cy as usize;
        let cx0 = Self::coord(x.re, self.x0.re, self.cell.re).max(0.0);
        let mut best: Option<(f64, u32, bool)> = None;
        // Walk cells rightwards until the nearest crossing is inside the cells seen.
        let mut cx = cx0 as usize;
        while cx < self.nx {
            for &i in self.cell_items(cx, cy) {
                let (a, b, d, k) = self.segs[i as usize];
                let e = &g.edges[(d / 2) as usize];
                let (p0, p1) = (e.pts[k as usize], e.pts[k as usize + 1]);
                for (xs, up) in self.ray_crossings(p0, p1, a, b, x) {
                    if xs > x.re && best.is_none_or(|bb| xs < bb.0) {
                        best = Some((xs, d, up));
                    }
                }
            }
            let right = self.x0.re + self.cell.re * (cx + 1) as f64;
            if best.is_some_and(|bb| bb.0 <= right) {
                break;
            }
            cx += 1;
        }
        match best {
            None => self.outer,
            Some((_, d, up)) => {
                let dart = if up { d as usize } else { d as usize ^ 1 };
                g.face_of_dart(dart)
            }
        }
    }

    /// Crossings of the rightward horizontal ray from `x` with the segment `p0 p1`
    /// (end points `a`, `b` in X), as (Re X, upward). A point counts as above the ray
    /// when Im X > Im x, so shared end points are counted once.
    fn ray_crossings(&self, p0: Point, p1: Point, a: C64, b: C64, x: C64) -> Vec<(f64, bool)> {
        let y = x.im;
        let (lo, hi) = (a.im.min(b.im), a.im.max(b.im));
        // The arc stays within |a - b| of its chord for the short segments stored.
        let reach = (a - b).norm();
        if y < lo - reach || y > hi + reach || a.re.max(b.re) + reach < x.re {
            return Vec::new();
        }
        let sag = (self.mobius(p0, p1).map_or(a, |m| eval_mobius(m, 0.5)) - (a + b) * 0.5).norm();
        if y < lo - sag || y > hi + sag {
            return Vec::new();
        }
        let Some(m) = self.mobius(p0, p1) else {
            // Geodesic fallback: treat as straight in X.
            let up = a.im <= y && y < b.im;
            let down = b.im <= y && y < a.im;
            if !(up || down) {
                return Vec::new();
            }
            let t = (y - a.im) / (b.im - a.im);
            return vec![(a.re + t * (b.re - a.re), up)];
        };
        let (al, be, ga, de) = m;
        // Im X(t) = y  <=>  Im[(al t + be) conj(ga t + de)] - y |ga t + de|^2 = 0.
        let qa = (al * ga.conj()).im - y * ga.norm_sqr();
        let qb = (al * de.conj() + be * ga.conj()).im - 2.0 * y * (ga * de.conj()).re;
        let qc = (be * de.conj()).im - y * de.norm_sqr();
        let mut roots: Vec<f64> = Vec::new();
        if qa.abs() <= 1e-14 * (qb.abs() + qc.abs()) {
            if qb != 0.0 {
                roots.push(-qc / qb);
            }
        } else {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let q = -0.5 * (qb + qb.signum() * disc.sqrt());
                if q != 0.0 {
                    roots.push(q / qa);
                    roots.push(qc / q);
                } else {
                    roots.push(0.0);
                }
            }
        }
        roots.retain(|t| *t > 0.0 && *t < 1.0);
        roots.sort_by(f64::total_cmp);
        let above = |z: C64| z.im > y;
        let mut out = Vec::new();
        let mut prev = (above(a), 0.0, a);
        let mut breaks = roots.clone();
        breaks.push(1.0);
        let mut t0 = 0.0;
        for &t1 in &breaks {
            let mid = eval_mobius(m, 0.5 * (t0 + t1));
            let cur = above(mid);
            if cur != prev.0 {
                out.push((prev.2.re, cur));
            }
            let at = if t1 == 1.0 { b } else { eval_mobius(m, t1) };
            prev = (cur, t1, at);
            t0 = t1;
        }
        if above(b) != prev.0 {
            out.push((b.re, above(b)));
        }
        out
    }

    /// Coefficients of t -> X(segment_point(p0, p1, t)) as (al t + be) / (ga t + de).
    fn mobius(&self, p0: Point, p1: Point) -> Option<(C64, C64, C64, C64)> {
        let ch = crate::sphere::segment_chart(p0, p1)?;
        let (u, v) = (p0.in_chart(ch)?, p1.in_chart(ch)?);
        let d = v - u;
        let one = C64::new(1.0, 0.0);
        Some(match ch {
            Chart::Z => (C64::new(0.0, 0.0), one, d, u - self.c),
            Chart::W => (d, u, -self.c * d, one - self.c * u),
        })
    }

    fn locate(&self, g: &PlanarGraph, p: Point, eps: f64) -> Option<usize> {
        if eps > 0.0 && self.near_graph(g, p, eps) {
            return None;
        }
        Some(self.face_hit(g, p))
    }

    fn near_graph(&self, g: &PlanarGraph, p: Point, eps: f64) -> bool {
        let mut hit = false;
        self.visit_near(g, p, eps, |_, _| {
            hit = true;
            true
        });
        hit
    }

    /// Calls `f(edge, distance)` for stored segments within chordal `eps` of `p`
    /// until it returns true.
    fn visit_near(&self, g: &PlanarGraph, p: Point, eps: f64, mut f: impl FnMut(usize, f64) -> bool) {
        let x = self.chart(p);
        if !(x.re.is_finite() && x.im.is_finite()) {
            return;
        }
        // eps is chordal; convert with the local scale of X.
        let scale = match p {
            Point::Infinity => 1.0,
            Point::Finite(z) => {
                let dz = (z - self.c).norm_sqr();
                (1.0 + z.norm_sqr()) / (2.0 * dz)
            }
        };
        let ex = eps * scale * 2.0;
        let (cx0, cx1) = (Self::coord(x.re - ex, self.x0.re, self.cell.re), Self::coord(x.re + ex, self.x0.re, self.cell.re));
        let (cy0, cy1) = (Self::coord(x.im - ex, self.x0.im, self.cell.im), Self::coord(x.im + ex, self.x0.im, self.cell.im));
        if cx1 < 0.0 || cy1 < 0.0 || cx0 >= self.nx as f64 || cy0 >= self.ny as f64 {
            return;
        }
        let clamp = |v: f64, n: usize| (v.max(0.0) as usize).min(n - 1);
        for cy in clamp(cy0, self.ny)..=clamp(cy1, self.ny) {
            for cx in clamp(cx0, self.nx)..=clamp(cx1, self.nx) {
                for &i in self.cell_items(cx, cy) {
                    let (a, b, d, k) = self.segs[i as usize];
                    // Cheap reject in X before the exact chordal distance.
                    if seg_dist(x, a, b) > ex + (a - b).norm() {
                        continue;
                    }
                    let e = (d / 2) as usize;
                    let pts = &g.edges[e].pts;
                    let dist = crate::sphere::chordal_to_segment(p, pts[k as usize], pts[k as usize + 1]);
                    if dist <= eps && f(e, dist) {
                        return;
                    }
                }
            }
        }
    }

    fn find_crossing(&self, g: &PlanarGraph, vertex_eps: f64) -> Option<(usize, usize)> {
        // Each pair of segments sharing a cell is tested once per cell.
        let seg_edge: Vec<usize> = self.segs.iter().map(|s| (s.2 / 2) as usize).collect();
        let mut seg_index = Vec::with_capacity(self.segs.len());
        for (e, edge) in g.edges.iter().enumerate() {
            for i in 0..edge.pts.len().saturating_sub(1) {
                seg_index.push((e, i));
            }
        }
        let vx: Vec<C64> = g.vertices.iter().map(|v| self.chart(v.pos)).collect();
        for k in 0..self.nx * self.ny {
            let row = &self.items[self.start[k] as usize..self.start[k + 1] as usize];
            for (ii, &i) in row.iter().enumerate() {
                let (a, b, _, _) = self.segs[i as usize];
                for &j in &row[ii + 1..] {
                    let (c, d, _, _) = self.segs[j as usize];
                    let (ei, si) = seg_index[i as usize];
                    let (ej, sj) = seg_index[j as usize];
                    if ei == ej && (si as i64 - sj as i64).abs() <= 1 {
                        continue;
                    }
                    if !bbox_overlap(a, b, c, d) {
                        continue;
                    }
                    if let Some(x) = seg_intersection(a, b, c, d) {
                        // Crossings at shared vertices are allowed.
                        let shared = [g.edges[ei].a, g.edges[ei].b]
                            .iter()
                            .any(|&v| (g.edges[ej].a == v || g.edges[ej].b == v) && near_x(self, x, vx[v], vertex_eps));
                        if !shared {
                            let _ = &seg_edge;
                            return Some((ei.min(ej), ei.max(ej)));
                        }
                    }
                }
            }
        }
        None
    }
}

fn near_x(loc: &Locator, x: C64, v: C64, eps: f64) -> bool {
    chordal(loc.unchart(x), loc.unchart(v)) <= eps
}

fn bbox_overlap(a: C64, b: C64, c: C64, d: C64) -> bool {
    a.re.min(b.re) <= c.re.max(d.re) && c.re.min(d.re) <= a.re.max(b.re) && a.im.min(b.im) <= c.im.max(d.im) && c.im.min(d.im) <= a.im.max(b.im)
}

fn cross(a: C64, b: C64) -> f64 {
    a.re * b.im - a.im * b.re
}

/// Intersection point of two closed segments, if any.
fn seg_intersection(a: C64, b: C64, c: C64, d: C64) -> Option<C64> {
    let r = b - a;
    let s = d - c;
    let den = cross(r, s);
    if den == 0.0 {
        return None;
    }
    let t = cross(c - a, s) / den;
    let u = cross(c - a, r) / den;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some(a + r * t)
    } else {
        None
    }
}

fn seg_dist(x: C64, a: C64, b: C64) -> f64 {
    let d = b - a;
    let dd = d.norm_sqr();
    let t = if dd > 0.0 { (((x - a) * d.conj()).re / dd).clamp(0.0, 1.0) } else { 0.0 };
    (x - (a + d * t)).norm()
}

/// A point of the sphere far from every vertex and polyline point.
fn pick_reference(g: &PlanarGraph) -> C64 {
    let mut sample: Vec<Point> = g.vertices.iter().map(|v| v.pos).collect();
    let total: usize = g.edges.iter().map(|e| e.pts.len()).sum();
    let stride = (total / 20_000).max(1);
    let mut k = 0;
    for e in &g.edges {
        for p in &e.pts {
            if k % stride == 0 {
                sample.push(*p);
            }
            k += 1;
        }
    }
    let n = 256;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut best = (f64::NEG_INFINITY, C64::new(0.0, 0.0));
    for i in 0..n {
        let zc = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let r = (1.0 - zc * zc).sqrt();
        let t = golden * i as f64;
        let cand = Point::from_sphere([r * t.cos(), r * t.sin(), zc]);
        let Point::Finite(cz) = cand else { continue };
        let d = sample.iter().map(|p| chordal(*p, cand)).fold(f64::INFINITY, f64::min);
        if d > best.0 {
            best = (d, cz);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(key: u64, re: f64, im: f64) -> GVertex {
        GVertex { key, pos: Point::new(re, im), kind: VertexKind::Auxiliary }
    }

    fn e(a: usize, b: usize, pts: Vec<Point>) -> GEdge {
        GEdge { a, b, pts, provenance: Provenance { id: None, lifts: None, iterate: 0, role: EdgeRole::Ray } }
    }

    fn seg(p: Point, q: Point, n: usize) -> Vec<Point> {
        (0..=n).map(|i| crate::sphere::segment_point(p, q, i as f64 / n as f64)).collect()
    }

    /// Star with three spokes from the origin to infinity, like the channel diagram of z^3 - 1.
    fn star() -> PlanarGraph {
        let mut vs = vec![GVertex { key: 0, pos: Point::Infinity, kind: VertexKind::Infinity }];
        let mut es = Vec::new();
        for j in 0..3 {
            let dir = C64::from_polar(1.0, TAU * j as f64 / 3.0);
            vs.push(GVertex { key: 1 + j, pos: Point::Finite(dir), kind: VertexKind::Root { root: j as usize } });
            let mut pts: Vec<Point> = (0..=40).map(|i| Point::Finite(dir * 1.2f64.powi(i))).collect();
            pts.push(Point::Infinity);
            es.push(e(1 + j as usize, 0, pts));
        }
        PlanarGraph::new(0, vs, es)
    }

    #[test]
    fn star_has_one_face() {
        let mut g = star();
        g.finalize().unwrap();
        assert_eq!(g.face_count(), 1);
        assert_eq!(g.euler_characteristic(), 2);
        assert_eq!(g.count_accesses(0), 3);
        assert_eq!(g.count_accesses(1), 1);
    }

    #[test]
    fn square_with_diagonal() {
        let pts = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0)];
        let vs: Vec<GVertex> = pts.iter().enumerate().map(|(i, p)| v(i as u64, p.finite().unwrap().re, p.finite().unwrap().im)).collect();
        let mut es = Vec::new();
        for i in 0..4 {
            es.push(e(i, (i + 1) % 4, seg(pts[i], pts[(i + 1) % 4], 10)));
        }
        es.push(e(0, 2, seg(pts[0], pts[2], 10)));
        let mut g = PlanarGraph::new(0, vs, es);
        g.finalize().unwrap();
        assert_eq!(g.face_count(), 3);
        assert_eq!(g.euler_characteristic(), 2);
        g.build_locator();
        let a = g.locate(Point::new(0.7, 0.2), 1e-9).unwrap();
        let b = g.locate(Point::new(0.2, 0.7), 1e-9).unwrap();
        let c = g.locate(Point::new(3.0, 3.0), 1e-9).unwrap();
        assert!(a != b && b != c && a != c);
        assert_eq!(c, g.outer_face());
        assert_eq!(g.locate_by_winding(Point::new(0.7, 0.2)), a);
        assert_eq!(g.locate_by_winding(Point::new(0.2, 0.7)), b);
        assert_eq!(g.locate_by_winding(Point::Infinity), c);
        assert_eq!(g.locate(Point::new(0.5, 0.5), 1e-6), None);
        for f in 0..3 {
            for p in g.interior_samples(f, 3) {
                assert_eq!(g.locate_by_winding(p), f);
            }
        }
        assert!(g.find_crossing(1e-9).is_none());
    }

    #[test]
    fn crossing_detected() {
        let vs = vec![v(0, 0.0, 0.0), v(1, 1.0, 1.0), v(2, 1.0, 0.0), v(3, 0.0, 1.0)];
        let es = vec![
            e(0, 1, seg(Point::new(0.0, 0.0), Point::new(1.0, 1.0), 8)),
            e(2, 3, seg(Point::new(1.0, 0.0), Point::new(0.0, 1.0), 8)),
        ];
        let g = PlanarGraph::new(0, vs, es);
        assert_eq!(g.find_crossing(1e-9), Some((0, 1)));
    }

    #[test]
    fn json_round_trip() {
        let g = star();
        let s = serde_json::to_string(&g).unwrap();
        let h: PlanarGraph = serde_json::from_str(&s).unwrap();
        assert_eq!(serde_json::to_string(&h).unwrap(), s);
        assert_eq!(g, h);
    }
}
