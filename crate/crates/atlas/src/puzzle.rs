//! Truncated puzzles and puzzle pieces for an iterate of the Newton map.
//!
//! The base truncated graph cuts every edge of the augmented graph where it meets
//! the truncation circle of its Fatou end and adds those circles, split at the cut
//! points. Deeper truncated graphs are pullbacks of the base one, so the Markov
//! property holds combinatorially; the checks here confirm it geometrically.

use crate::basin::{basin_of, lift_closed, trace_equipotential};
use crate::error::{Error, Result};
use crate::graph::{EdgeRole, PlanarGraph, VertexKind};
use crate::lift::{is_anchor, Curve};
use crate::newton_graph::{Atlas, Augmented};
use crate::rational::RationalMap;
use crate::sphere::{chordal, chordal_to_polyline, chordal_to_segment, Point};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// Default cap on (depth + 2) * M.
pub const MAX_LEVELS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PuzzleConfig {
    pub pole_level: usize,
    pub nu: usize,
    /// Iterate of the Newton map the puzzle is Markov for; at least 1.
    pub m: usize,
}

/// Base truncated graph and its pullbacks.
pub struct Truncation {
    /// Edge ids of the base truncated graph.
    pub base: Vec<usize>,
    /// Truncation circles of the base graph by center vertex.
    pub circles: BTreeMap<usize, Curve>,
    levels: Vec<Vec<usize>>,
}

/// Closed curve rotated to start (and end) at the point nearest to `p`, with `p` spliced in.
fn rotate_closed(c: &Curve, p: Point) -> Curve {
    let n = c.len() - 1;
    let (i, _) = nearest_segment(&c.pts, p);
    let mut pts: Vec<Point> = Vec::with_capacity(n + 2);
    pts.push(p);
    for s in 1..=n {
        let q = c.pts[(i + s) % n];
        if chordal(q, p) > 1e-13 {
            pts.push(q);
        }
    }
    pts.push(p);
    let g = vec![c.g[0]; pts.len()];
    Curve::new(pts, g)
}

fn nearest_segment(pts: &[Point], p: Point) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for i in 0..pts.len() - 1 {
        let d = chordal_to_segment(p, pts[i], pts[i + 1]);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Anchor potential of a Fatou vertex at prefixed level `j` in a basin of degree `k`,
/// for the root-level cut at potential `g0`.
fn cut_potential(k: usize, j: usize, g0: f64) -> f64 {
    g0 * (k as f64).powi(-(j as i32))
}

impl Truncation {
    /// Cuts the augmented graph at the truncation circles and registers the result.
    /// `g0` is the log2 potential of the root-level equipotential and must be an anchor.
    pub fn new(atlas: &mut Atlas, aug0: &[usize], g0: f64) -> Result<Truncation> {
        if let Some(c) = atlas.charts.iter().find(|c| !is_anchor(g0, c.local_degree)) {
            return Err(Error::Precondition(format!("potential {g0} is not -k^i for basin degree {}", c.local_degree)));
        }
        let mut memo: HashMap<usize, Curve> = HashMap::new();
        let mut by_center: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
        for &e in aug0 {
            let rec = &atlas.edges[e];
            let j = atlas
                .fatou_level(rec.a)
                .ok_or_else(|| Error::Topology(format!("edge {e} has no Fatou end")))?;
            let k = atlas.charts[rec.root].local_degree;
            let ia = rec
                .curve
                .anchor_index(cut_potential(k, j, g0))
                .ok_or_else(|| Error::Topology(format!("edge {e} lacks its truncation anchor")))?;
            by_center.entry(rec.a).or_default().push((e, ia));
        }
        let mut circles = BTreeMap::new();
        for (&c, list) in &by_center {
            let circle = center_circle(atlas, list[0].0, g0, &mut memo)?;
            circles.insert(c, circle);
        }
        let mut base = Vec::new();
        for (&c, list) in &by_center {
            let circle = &circles[&c];
            let root = atlas.edges[list[0].0].root;
            // Anchor vertices and stubs.
            let mut anchors = Vec::new();
            for &(e, ia) in list {
                let rec = atlas.edges[e].clone();
                let p = rec.curve.pts[ia];
                let v = atlas.add_auxiliary(p);
                let stub = Curve::new(rec.curve.pts[ia..].to_vec(), rec.curve.g[ia..].to_vec());
                base.push(atlas.add_base_edge(v, rec.b, stub, rec.root, EdgeRole::Stub));
                anchors.push((v, p));
            }
            for (a, b, arc) in split_circle(atlas, circle, &anchors) {
                base.push(atlas.add_base_edge(a, b, arc, root, EdgeRole::Arc));
            }
        }
        base.sort_unstable();
        let first = atlas.infinity_component(&base);
        Ok(Truncation { base, circles, levels: vec![first] })
    }

    /// Edge ids of the truncated graph at level `n`.
    pub fn level(&mut self, atlas: &mut Atlas, n: usize) -> Result<Vec<usize>> {
        while self.levels.len() <= n {
            let next = atlas.pullback(&self.levels.last().unwrap().clone())?;
            self.levels.push(next);
        }
        Ok(self.levels[n].clone())
    }
}

/// Truncation circle of the Fatou end of edge `e`, starting at the edge's anchor.
fn center_circle(atlas: &Atlas, e: usize, g0: f64, memo: &mut HashMap<usize, Curve>) -> Result<Curve> {
    let rec = &atlas.edges[e];
    let c = rec.a;
    if let Some(curve) = memo.get(&c) {
        return Ok(curve.clone());
    }
    let chart = &atlas.charts[rec.root];
    let k = chart.local_degree;
    let j = atlas.fatou_level(c).unwrap();
    let curve = if j == 0 {
        trace_equipotential(atlas.map(), chart, g0, &atlas.tol)?.curve
    } else {
        let parent = rec.parent;
        if atlas.edges[parent].a != atlas.vertices[c].image {
            return Err(Error::Topology(format!("edge {e} does not lift an edge at the image of its center")));
        }
        let pc = center_circle(atlas, parent, g0, memo)?;
        let missing = || Error::Topology(format!("edge {e} lacks the anchor for its circle"));
        let pa = atlas.edges[parent].curve.anchor_index(cut_potential(k, j - 1, g0)).ok_or_else(missing)?;
        let sa = rec.curve.anchor_index(cut_potential(k, j, g0)).ok_or_else(missing)?;
        let rotated = rotate_closed(&pc, atlas.edges[parent].curve.pts[pa]);
        lift_closed(atlas.map(), &rotated, rec.curve.pts[sa], atlas.vertices[c].local_degree, k, &atlas.tol)?
    };
    memo.insert(c, curve.clone());
    Ok(curve)
}

/// Splits a closed circle at the anchors; a lone anchor gets an auxiliary partner.
fn split_circle(atlas: &mut Atlas, circle: &Curve, anchors: &[(usize, Point)]) -> Vec<(usize, usize, Curve)> {
    let g = circle.g[0];
    let n = circle.len() - 1;
    // Position of each anchor: segment index, then distance from the segment start.
    let mut placed: Vec<(usize, f64, usize, Point)> = anchors
        .iter()
        .map(|&(v, p)| {
            let (i, _) = nearest_segment(&circle.pts, p);
            (i, chordal(circle.pts[i], p), v, p)
        })
        .collect();
    placed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    // Cyclic point list with anchors inserted, and their positions.
    let mut pts: Vec<Point> = Vec::with_capacity(n + placed.len());
    let mut marks: Vec<(usize, usize)> = Vec::new();
    let mut next = 0;
    for i in 0..n {
        if !placed[..next].iter().any(|q| chordal(q.3, circle.pts[i]) <= 1e-13) {
            pts.push(circle.pts[i]);
        }
        while next < placed.len() && placed[next].0 == i {
            let (_, _, v, p) = placed[next];
            if let Some(last) = pts.last() {
                if chordal(*last, p) <= 1e-13 {
                    pts.pop();
                }
            }
            marks.push((pts.len(), v));
            pts.push(p);
            next += 1;
        }
    }
    let m = pts.len();
    if marks.len() == 1 {
        let at = (marks[0].0 + m / 2) % m;
        let v = atlas.add_auxiliary(pts[at]);
        marks.push((at, v));
        marks.sort_unstable();
    }
    let mut out = Vec::new();
    for w in 0..marks.len() {
        let (s, a) = marks[w];
        let (t, b) = marks[(w + 1) % marks.len()];
        let len = (t + m - s) % m;
        let len = if len == 0 { m } else { len };
        let arc: Vec<Point> = (0..=len).map(|i| pts[(s + i) % m]).collect();
        let gs = vec![g; arc.len()];
        out.push((a, b, Curve::new(arc, gs)));
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PuzzlePiece {
    pub id: usize,
    pub depth: usize,
    /// Face index in the puzzle graph.
    pub face: usize,
    /// Closed boundary polyline.
    pub boundary: Vec<Point>,
    /// Registry ids of Julia vertices on the boundary.
    pub julia_vertices: Vec<usize>,
    /// Whether the boundary walk visits no vertex twice.
    pub simple: bool,
    /// Critical points of the Newton map strictly inside.
    pub critical_points: Vec<Point>,
    pub diameter: f64,
}

pub struct Puzzle {
    pub depth: usize,
    pub level: usize,
    pub graph: PlanarGraph,
    pub pieces: Vec<PuzzlePiece>,
    face_piece: Vec<Option<usize>>,
}

impl Puzzle {
    pub fn piece_at_face(&self, f: usize) -> Option<usize> {
        self.face_piece[f]
    }

    /// Piece ids making up P_n(x): several when x is a Julia vertex.
    pub fn pieces_containing(&self, x: Point) -> Result<Vec<usize>> {
        let g = &self.graph;
        if let Some(v) = (0..g.vertices.len()).find(|&v| g.vertices[v].kind.is_julia() && chordal(g.vertices[v].pos, x) < 1e-12) {
            let mut ids: Vec<usize> = g.rotation(v).iter().filter_map(|&d| self.face_piece[g.face_of_dart(d)]).collect();
            ids.sort_unstable();
            ids.dedup();
            return Ok(ids);
        }
        let f = g.locate_any(x);
        self.face_piece[f]
            .map(|p| vec![p])
            .ok_or_else(|| Error::Topology(format!("point {x:?} lies in a truncation disk")))
    }

    /// Chordal diameter of a union of pieces.
    pub fn union_diameter(&self, ids: &[usize]) -> f64 {
        let pts: Vec<Point> = ids.iter().flat_map(|&i| self.pieces[i].boundary.iter().copied()).collect();
        diameter(&pts)
    }
}

/// Chordal diameter of a point set (subsampled above 1500 points).
pub fn diameter(pts: &[Point]) -> f64 {
    let step = (pts.len() / 1500).max(1);
    let s: Vec<[f64; 3]> = pts.iter().step_by(step).map(|p| p.to_sphere()).collect();
    let mut best = 0.0f64;
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            let d = ((s[i][0] - s[j][0]).powi(2) + (s[i][1] - s[j][1]).powi(2) + (s[i][2] - s[j][2]).powi(2)).sqrt();
            best = best.max(d);
        }
    }
    best
}

/// Puzzles of every depth for one Newton map.
pub struct PuzzleEngine {
    pub config: PuzzleConfig,
    pub trunc: Truncation,
    pub max_levels: usize,
    puzzles: BTreeMap<usize, Puzzle>,
}

impl PuzzleEngine {
    /// Engine truncating at potential -1, i.e. modulus 1/2 of the Böttcher coordinate.
    pub fn new(atlas: &mut Atlas, aug: &mut Augmented) -> Result<PuzzleEngine> {
        PuzzleEngine::with_equipotential(atlas, aug, -1.0)
    }

    pub fn with_equipotential(atlas: &mut Atlas, aug: &mut Augmented, g0: f64) -> Result<PuzzleEngine> {
        let base = aug.level(atlas, 0)?;
        let trunc = Truncation::new(atlas, &base, g0)?;
        let config = PuzzleConfig { pole_level: aug.pole_level, nu: aug.circles.nu, m: aug.period };
        Ok(PuzzleEngine { config, trunc, max_levels: MAX_LEVELS, puzzles: BTreeMap::new() })
    }

    pub fn level_of(&self, depth: usize) -> usize {
        (depth + 2) * self.config.m
    }

    /// Largest depth within the level cap.
    pub fn max_depth(&self) -> Option<usize> {
        (self.max_levels / self.config.m).checked_sub(2)
    }

    pub fn puzzle(&mut self, atlas: &mut Atlas, depth: usize) -> Result<&Puzzle> {
        if !self.puzzles.contains_key(&depth) {
            let level = self.level_of(depth);
            if level > self.max_levels {
                return Err(Error::DepthExhausted(depth));
            }
            let es = self.trunc.level(atlas, level)?;
            let p = build_puzzle(atlas, depth, level, &es)?;
            self.puzzles.insert(depth, p);
        }
        Ok(&self.puzzles[&depth])
    }

    pub fn get(&self, depth: usize) -> Option<&Puzzle> {
        self.puzzles.get(&depth)
    }
}

/// Drops subgraphs hanging from a bridge that carry no Julia vertex.
///
/// A truncation circle reached by a single stub would otherwise leave a slit in the
/// surrounding face; merging its disk into that face keeps piece boundaries Jordan.
pub fn prune_hanging(atlas: &Atlas, es: &[usize]) -> Vec<usize> {
    let mut index: HashMap<usize, usize> = HashMap::new();
    let mut verts: Vec<usize> = Vec::new();
    let mut id = |v: usize, verts: &mut Vec<usize>| *index.entry(v).or_insert_with(|| {
        verts.push(v);
        verts.len() - 1
    });
    let ends: Vec<(usize, usize)> =
        es.iter().map(|&e| (id(atlas.edges[e].a, &mut verts), id(atlas.edges[e].b, &mut verts))).collect();
    let Some(&root) = index.get(&atlas.infinity) else { return es.to_vec() };
    let n = verts.len();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (i, &(a, b)) in ends.iter().enumerate() {
        adj[a].push((b, i));
        if a != b {
            adj[b].push((a, i));
        }
    }
    // Iterative DFS from infinity: discovery order, low links, Julia counts per subtree.
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut julia: Vec<usize> = verts.iter().map(|&v| atlas.vertices[v].kind.is_julia() as usize).collect();
    let mut parent_edge = vec![usize::MAX; n];
    let mut cut_below = vec![false; n];
    let mut t = 0;
    let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
    disc[root] = t;
    low[root] = t;
    while let Some(&mut (u, ref mut next)) = stack.last_mut() {
        if *next < adj[u].len() {
            let (w, e) = adj[u][*next];
            *next += 1;
            if e == parent_edge[u] {
                continue;
            }
            if disc[w] == usize::MAX {
                t += 1;
                disc[w] = t;
                low[w] = t;
                parent_edge[w] = e;
                stack.push((w, 0));
            } else {
                low[u] = low[u].min(disc[w]);
            }
        } else {
            stack.pop();
            if let Some(&(p, _)) = stack.last() {
                low[p] = low[p].min(low[u]);
                julia[p] += julia[u];
                cut_below[u] = low[u] > disc[p] && julia[u] == 0;
            }
        }
    }
    // A vertex is dropped when it or an ancestor hangs from a Julia-free bridge.
    let mut dropped = vec![false; n];
    let mut order: Vec<usize> = (0..n).filter(|&v| disc[v] != usize::MAX).collect();
    order.sort_unstable_by_key(|&v| disc[v]);
    for &v in &order {
        if v == root {
            continue;
        }
        let (a, b) = ends[parent_edge[v]];
        let p = if a == v { b } else { a };
        dropped[v] = cut_below[v] || dropped[p];
    }
    es.iter()
        .zip(&ends)
        .filter(|(_, &(a, b))| !dropped[a] && !dropped[b])
        .map(|(&e, _)| e)
        .collect()
}

/// Faces of the truncated graph meeting the Julia set.
pub fn build_puzzle(atlas: &Atlas, depth: usize, level: usize, es: &[usize]) -> Result<Puzzle> {
    let es = prune_hanging(atlas, es);
    let mut graph = atlas.planar_graph(level, &es)?;
    if graph.euler_characteristic() != 2 {
        return Err(Error::Topology(format!("truncated graph at level {level} has Euler characteristic {}", graph.euler_characteristic())));
    }
    graph.build_locator();
    let crit: Vec<Point> = atlas.desc.critical_points.iter().map(|c| c.0).collect();
    let eps = atlas.tol.membership_eps;
    let faces: Vec<Option<PuzzlePiece>> = (0..graph.face_count())
        .into_par_iter()
        .map(|f| {
            let vs = graph.face_vertices(f);
            let julia: BTreeSet<usize> =
                vs.iter().filter(|&&v| graph.vertices[v].kind.is_julia()).map(|&v| graph.vertices[v].key as usize).collect();
            if julia.is_empty() {
                return None;
            }
            let simple = vs.iter().collect::<BTreeSet<_>>().len() == vs.len();
            let boundary = graph.face_polyline(f);
            let critical_points = crit.iter().copied().filter(|&c| graph.locate(c, eps) == Some(f)).collect();
            let diameter = diameter(&boundary);
            Some(PuzzlePiece {
                id: 0,
                depth,
                face: f,
                boundary,
                julia_vertices: julia.into_iter().collect(),
                simple,
                critical_points,
                diameter,
            })
        })
        .collect();
    let mut pieces = Vec::new();
    let mut face_piece = vec![None; graph.face_count()];
    for p in faces.into_iter().flatten() {
        face_piece[p.face] = Some(pieces.len());
        pieces.push(PuzzlePiece { id: pieces.len(), ..p });
    }
    Ok(Puzzle { depth, level, graph, pieces, face_piece })
}

/// P_n(x), refusing points attracted to a root.
pub fn piece_of(atlas: &Atlas, puzzle: &Puzzle, x: Point) -> Result<Vec<usize>> {
    if let Some(r) = basin_of(&atlas.desc, x, atlas.tol.max_iter, &atlas.tol) {
        return Err(Error::InBasin(r));
    }
    puzzle.pieces_containing(x)
}

/// Critical points of the m-th iterate with their local degrees.
pub fn iterate_critical_points(atlas: &Atlas, m: usize) -> Vec<(Point, usize)> {
    let map = atlas.map();
    let crit = &atlas.desc.critical_points;
    let deg_at = |w: Point| 1 + crit.iter().filter(|(c, _)| chordal(*c, w) < 1e-7).map(|c| c.1).sum::<usize>();
    let mut found: Vec<Point> = Vec::new();
    for &(c, _) in crit {
        let mut layer = vec![c];
        for i in 0..m {
            for &z in &layer {
                if !found.iter().any(|q| chordal(*q, z) < 1e-9) {
                    found.push(z);
                }
            }
            if i + 1 < m {
                layer = layer.iter().flat_map(|&z| map.preimages(z, 1e-6).into_iter().map(|p| p.0)).collect();
            }
        }
    }
    let mut out: Vec<(Point, usize)> = found
        .into_iter()
        .map(|z| {
            let mut d = 1;
            let mut w = z;
            for _ in 0..m {
                d *= deg_at(w);
                w = map.eval(w);
            }
            (z, d)
        })
        .filter(|p| p.1 > 1)
        .collect();
    out.sort_by(|a, b| crate::rational::cmp_points(&a.0, &b.0));
    out
}

/// All solutions of f^m(z) = t, with multiplicity.
pub fn iterated_preimages(map: &RationalMap, t: Point, m: usize) -> Vec<Point> {
    let mut layer = vec![t];
    for _ in 0..m {
        layer = layer
            .iter()
            .flat_map(|&z| map.preimages(z, 1e-6).into_iter().flat_map(|(p, k)| std::iter::repeat_n(p, k)))
            .collect();
    }
    layer
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MarkovEntry {
    pub piece: usize,
    /// Piece of the shallower puzzle covered by the image; `None` if images scatter.
    pub target: Option<usize>,
    pub degree_critical: usize,
    /// Preimage counts of sampled targets inside the piece.
    pub degree_preimage: Vec<usize>,
    /// Largest distance from a boundary image to the target boundary.
    pub boundary_residual: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MarkovReport {
    pub depth: usize,
    pub steps: usize,
    pub iterate: usize,
    pub entries: Vec<MarkovEntry>,
    pub pass: bool,
}

impl MarkovReport {
    pub fn into_result(self) -> Result<MarkovReport> {
        match self.entries.iter().find(|e| !e.pass) {
            Some(e) => Err(Error::MarkovViolation(format!("piece {} (target {:?}, residual {:e})", e.piece, e.target, e.boundary_residual))),
            None => Ok(self),
        }
    }
}

/// Faces met on a small circle of chordal radius about `r` around `z`.
fn nearby_faces(g: &PlanarGraph, z: Point, r: f64) -> BTreeSet<usize> {
    let (ch, u) = z.chart();
    // Chordal radius r is about r (1 + |u|^2) / 2 in either chart.
    let scale = 0.5 * (1.0 + u.norm_sqr());
    let mut out: BTreeSet<usize> = (0..8)
        .map(|i| {
            let w = u + crate::sphere::C64::from_polar(r * scale, std::f64::consts::TAU * i as f64 / 8.0);
            g.locate_any(Point::from_chart(ch, w))
        })
        .collect();
    out.insert(g.locate_any(z));
    out
}

/// Spherical derivative of the `n`-th iterate at `x`, by finite differences per step.
pub fn spherical_derivative(map: &RationalMap, x: Point, n: usize) -> f64 {
    let mut z = x;
    let mut out = 1.0;
    for _ in 0..n {
        let (ch, u) = z.chart();
        let h = 1e-7 * (1.0 + u.norm());
        let w = Point::from_chart(ch, u + h);
        let (fz, fw) = (map.eval(z), map.eval(w));
        out *= chordal(fz, fw) / chordal(z, w);
        z = fz;
    }
    out
}

/// Checks that g^k maps every depth-(n+k) piece onto a depth-n piece as a branched cover.
///
/// The boundary residual is measured back in the source: the distance from the
/// image of a boundary point to the target boundary, divided by the spherical
/// derivative of the iterate there (at least 1).
pub fn verify_markov(atlas: &Atlas, shallow: &Puzzle, deep: &Puzzle, m: usize) -> MarkovReport {
    let k = deep.depth - shallow.depth;
    let iterate = m * k;
    let map = atlas.map();
    let eps = atlas.tol.membership_eps;
    let crit = iterate_critical_points(atlas, iterate);
    // Preimage counts per shallow piece: for each target, deep face -> count, plus the
    // faces a preimage too close to the deep graph might belong to. A target is only
    // used for pieces it is unambiguous about.
    let clear = 2.0 * atlas.tol.curve_dev;
    let counts: Vec<Vec<(HashMap<usize, usize>, BTreeSet<usize>)>> = shallow
        .pieces
        .par_iter()
        .map(|t| {
            shallow
                .graph
                .deep_samples(t.face, 20)
                .into_iter()
                .map(|y| {
                    let mut hits = HashMap::new();
                    let mut unsure = BTreeSet::new();
                    for z in iterated_preimages(map, y, iterate) {
                        match deep.graph.locate(z, clear) {
                            Some(f) => *hits.entry(f).or_insert(0) += 1,
                            None => unsure.extend(nearby_faces(&deep.graph, z, 3.0 * clear)),
                        }
                    }
                    (hits, unsure)
                })
                .collect()
        })
        .collect();
    let crit_faces: Vec<(Option<usize>, usize)> = crit.iter().map(|(z, d)| (deep.graph.locate(*z, eps), *d)).collect();
    // Edges bounding each shallow piece, sorted.
    let target_edges: Vec<Vec<usize>> = shallow
        .pieces
        .iter()
        .map(|t| {
            let mut es: Vec<usize> = shallow.graph.face_darts(t.face).iter().map(|d| d / 2).collect();
            es.sort_unstable();
            es.dedup();
            es
        })
        .collect();
    let entries: Vec<MarkovEntry> = deep
        .pieces
        .par_iter()
        .map(|p| {
            let samples = deep.graph.interior_samples(p.face, 8);
            let faces: BTreeSet<usize> = samples.iter().map(|&x| shallow.graph.locate_any(map.iterate(x, iterate))).collect();
            let target = if faces.len() == 1 { shallow.piece_at_face(*faces.iter().next().unwrap()) } else { None };
            let degree_critical = 1 + crit_faces.iter().filter(|c| c.0 == Some(p.face)).map(|c| c.1 - 1).sum::<usize>();
            let (boundary_residual, degree_preimage) = match target {
                Some(t) => {
                    let tb = &shallow.pieces[t].boundary;
                    let step = (p.boundary.len() / 64).max(1);
                    let r = p
                        .boundary
                        .iter()
                        .step_by(step)
                        .map(|&x| {
                            let y = map.iterate(x, iterate);
                            let scale = spherical_derivative(map, x, iterate).max(1.0);
                            // Indexed search near the image; the full polyline only when nothing is close.
                            let es = &target_edges[t];
                            let d = shallow
                                .graph
                                .distance_within(y, 4.0 * eps * scale, |e| es.binary_search(&e).is_ok())
                                .unwrap_or_else(|| chordal_to_polyline(y, tb));
                            d / scale
                        })
                        .fold(0.0, f64::max);
                    let found = counts[t]
                        .iter()
                        .filter(|(_, unsure)| !unsure.contains(&p.face))
                        .take(5)
                        .map(|(h, _)| h.get(&p.face).copied().unwrap_or(0))
                        .collect();
                    (r, found)
                }
                None => (f64::INFINITY, Vec::new()),
            };
            let pass = target.is_some()
                && !samples.is_empty()
                && boundary_residual <= eps
                && degree_preimage.len() == 5
                && degree_preimage.iter().all(|&c| c == degree_critical);
            MarkovEntry { piece: p.id, target, degree_critical, degree_preimage, boundary_residual, pass }
        })
        .collect();
    let pass = entries.iter().all(|e| e.pass);
    MarkovReport { depth: shallow.depth, steps: k, iterate, entries, pass }
}

/// Deep pieces that are not inside a single shallow piece.
pub fn nesting_violations(atlas: &Atlas, shallow: &Puzzle, deep: &Puzzle) -> Vec<usize> {
    let eps = atlas.tol.membership_eps;
    deep.pieces
        .par_iter()
        .filter_map(|p| {
            let inner = deep.graph.interior_samples(p.face, 6);
            let faces: BTreeSet<usize> = inner.iter().map(|&x| shallow.graph.locate_any(x)).collect();
            let ok = faces.len() == 1 && {
                let f = *faces.iter().next().unwrap();
                shallow.piece_at_face(f).is_some()
                    && p.boundary
                        .iter()
                        .step_by((p.boundary.len() / 256).max(1))
                        .all(|&x| shallow.graph.locate(x, eps).is_none_or(|g| g == f))
            };
            (!ok).then_some(p.id)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FiberNest {
    pub point: Point,
    /// Whether x is infinity or a prepole, so that P_n(x) is a union of pieces.
    pub union: bool,
    pub pieces: Vec<Vec<usize>>,
    pub diameters: Vec<f64>,
    /// For n >= 1: P_n(x) lies in the interior of P_(n-1)(x) (no shared vertex).
    pub interior: Vec<bool>,
    pub trivial: bool,
}

/// Nest of pieces around `x` over the given puzzles (consecutive depths from 0).
pub fn fiber_nest(atlas: &Atlas, puzzles: &[&Puzzle], x: Point) -> Result<FiberNest> {
    if let Some(r) = basin_of(&atlas.desc, x, atlas.tol.max_iter, &atlas.tol) {
        return Err(Error::InBasin(r));
    }
    let mut pieces = Vec::new();
    let mut diameters = Vec::new();
    let mut union = false;
    for pz in puzzles {
        let ids = pz.pieces_containing(x)?;
        union |= pz.graph.vertices.iter().any(|v| v.kind.is_julia() && chordal(v.pos, x) < 1e-12);
        diameters.push(pz.union_diameter(&ids));
        pieces.push(ids);
    }
    let mut interior = Vec::new();
    for n in 1..puzzles.len() {
        let outer: BTreeSet<usize> = pieces[n - 1]
            .iter()
            .flat_map(|&i| vertex_keys(puzzles[n - 1], i))
            .collect();
        let inner: BTreeSet<usize> = pieces[n].iter().flat_map(|&i| vertex_keys(puzzles[n], i)).collect();
        interior.push(!union && outer.is_disjoint(&inner));
    }
    let floor = 10.0 * atlas.tol.membership_eps;
    let decreasing = diameters.len() >= 3 && diameters.windows(2).rev().take(2).all(|w| w[1] < w[0]);
    let trivial = decreasing && diameters.last().is_some_and(|&d| d < floor);
    Ok(FiberNest { point: x, union, pieces, diameters, interior, trivial })
}

fn vertex_keys(pz: &Puzzle, piece: usize) -> Vec<usize> {
    let f = pz.pieces[piece].face;
    pz.graph
        .face_vertices(f)
        .into_iter()
        .filter(|&v| pz.graph.vertices[v].kind != VertexKind::Auxiliary)
        .map(|v| pz.graph.vertices[v].key as usize)
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecurrenceNest {
    pub point: Point,
    /// Depths n_0 < n_1 < ... of the nest.
    pub depths: Vec<usize>,
    /// First return times k_i of g to P_(n_i)(q).
    pub returns: Vec<usize>,
    /// Minimal chordal distance between consecutive boundaries.
    pub gaps: Vec<f64>,
    /// First index i with P_(n_(i+1)) compactly inside P_(n_i), if reached.
    pub contained_at: Option<usize>,
}

/// Nest of first-return pieces around a periodic point under g = N^m.
pub fn recurrence_nest(atlas: &Atlas, puzzles: &[&Puzzle], q: Point, m: usize, n0: usize) -> Result<RecurrenceNest> {
    if let Some(r) = basin_of(&atlas.desc, q, atlas.tol.max_iter, &atlas.tol) {
        return Err(Error::InBasin(r));
    }
    let map = atlas.map();
    let mut depths = vec![n0];
    let mut returns = Vec::new();
    let mut gaps = Vec::new();
    let mut contained_at = None;
    let mut n = n0;
    while n < puzzles.len() {
        let pz = puzzles[n];
        let home = pz.pieces_containing(q)?;
        if home.len() != 1 {
            return Err(Error::Precondition("periodic point lies on a puzzle boundary".into()));
        }
        let mut x = q;
        let mut k = None;
        for t in 1..=64 {
            x = map.iterate(x, m);
            if pz.pieces_containing(x)? == home {
                k = Some(t);
                break;
            }
        }
        let k = k.ok_or(Error::DepthExhausted(n))?;
        returns.push(k);
        let next = n + k;
        if next >= puzzles.len() {
            break;
        }
        let inner = puzzles[next].pieces_containing(q)?;
        let outer_b = &pz.pieces[home[0]].boundary;
        let inner_b = &puzzles[next].pieces[inner[0]].boundary;
        let gap = PlanarGraph::polyline_distance(outer_b, inner_b);
        gaps.push(gap);
        depths.push(next);
        if gap > 5.0 * atlas.tol.lift_eps {
            contained_at = Some(depths.len() - 2);
            break;
        }
        n = next;
    }
    if contained_at.is_none() && n + 1 >= puzzles.len() && gaps.len() == returns.len() {
        // Ran out of computed depths.
    }
    Ok(RecurrenceNest { point: q, depths, returns, gaps, contained_at })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::newton::newton_map;
    use crate::newton_graph::{pole_coverage_level, search_circles, Atlas, Augmented, N_MAX};
    use crate::poly::ComplexPolynomial;
    use crate::tolerances::Tolerances;

    pub(crate) fn engine(coeffs: &[f64]) -> (Atlas, PuzzleEngine) {
        let tol = Tolerances::default();
        let d = newton_map(&ComplexPolynomial::from_real(coeffs), &tol).unwrap();
        let mut a = Atlas::new(&d, &tol).unwrap();
        let pc = pole_coverage_level(&mut a, N_MAX).unwrap();
        let c = search_circles(&mut a, pc.level, N_MAX).unwrap();
        let mut aug = Augmented::new(&a, c, pc.level);
        let e = PuzzleEngine::new(&mut a, &mut aug).unwrap();
        (a, e)
    }

    #[test]
    fn cube_roots_base_truncation() {
        let (mut a, mut e) = engine(&[-1.0, 0.0, 0.0, 1.0]);
        assert_eq!(e.trunc.circles.len(), 3);
        let base = e.trunc.level(&mut a, 0).unwrap();
        let g = a.planar_graph(0, &base).unwrap();
        assert_eq!(g.components(), 1);
        assert_eq!(g.euler_characteristic(), 2);
        for r in &a.root_vertices {
            assert!(g.vertices.iter().all(|v| v.key != *r as u64));
        }
        let p0 = e.puzzle(&mut a, 0).unwrap();
        assert!(p0.pieces.iter().all(|p| p.simple));
        assert!(matches!(piece_of(&a, p0, Point::new(1.0, 0.0)), Err(Error::InBasin(_))));
        let at_pole = p0.pieces_containing(Point::new(0.0, 0.0)).unwrap();
        assert!(at_pole.len() >= 2);
    }

    #[test]
    fn cube_roots_markov_and_nesting() {
        let (mut a, mut e) = engine(&[-1.0, 0.0, 0.0, 1.0]);
        e.puzzle(&mut a, 0).unwrap();
        e.puzzle(&mut a, 1).unwrap();
        let (p0, p1) = (e.get(0).unwrap(), e.get(1).unwrap());
        assert!(p1.pieces.len() >= p0.pieces.len());
        assert!(p1.pieces.iter().all(|p| p.simple));
        let r = verify_markov(&a, p0, p1, e.config.m);
        assert!(r.pass, "{:?}", r.entries.iter().find(|x| !x.pass));
        assert!(nesting_violations(&a, p0, p1).is_empty());
        // Identity case: every piece covers itself once.
        let id = verify_markov(&a, p0, p0, e.config.m);
        assert!(id.entries.iter().all(|x| x.target == Some(x.piece) && x.degree_critical == 1));
        let f = fiber_nest(&a, &[p0, p1], Point::Infinity).unwrap();
        assert!(f.union);
        assert!(f.diameters[1] < f.diameters[0]);
        assert!(matches!(e.puzzle(&mut a, 9), Err(Error::DepthExhausted(9))));
    }
}
