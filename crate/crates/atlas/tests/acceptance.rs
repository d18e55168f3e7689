//! Acceptance criteria 1 to 11, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines always reach stdout. The process
//! fails when a criterion fails that is not listed in `KNOWN_RED`.

use newton_atlas::fsi::{perturb_and_check, polynomial_fs_count, revalidate, CertificateKind};
use newton_atlas::io::{mask_to_pgm, to_json};
use newton_atlas::newton_graph::{access_census, is_subset, search_circles, Atlas, N_MAX};
use newton_atlas::orbits::OrbitClass;
use newton_atlas::render::{render_basins, Frame, Overlay};
use newton_atlas::report::{Pipeline, RunConfig, EXAMPLES};
use newton_atlas::sphere::chordal;
use newton_atlas::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};

/// Relative error allowed on (m-1)/m and d/(d-1).
const MULTIPLIER_REL: f64 = 1e-9;
/// Forward invariance of Newton graphs, in units of lift_eps.
const INVARIANCE_LIFT_EPS: f64 = 10.0;
/// Fiber diameters must fall below this chordal size by depth 3.
const FIBER_DIAMETER: f64 = 1e-3;
const FIBER_DEPTH: usize = 3;
/// Pixel tolerance between filled-Julia masks at 512².
const MASK_PIXELS: usize = 2;
const MASK_RESOLUTION: usize = 512;
/// Perturbation law: multiplier relative error and periodicity residual.
const PERTURB_REL: f64 = 1e-10;
const PERTURB_RESIDUAL: f64 = 1e-12;
const IMAGE_RESOLUTION: usize = 512;

/// Criteria expected to fail, with the reason printed next to the FAIL line.
const KNOWN_RED: &[(usize, &str)] = &[(
    6,
    "pieces touching the repelling fixed point at infinity shrink like ((d-1)/d)^level; \
     at depth 3 the fibers at infinity and at the pole are still of size ~1",
)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn cube_roots_of_unity() -> ComplexPolynomial {
    ComplexPolynomial::from_real(&[-1.0, 0.0, 0.0, 1.0])
}

fn cubic_with_cycle() -> ComplexPolynomial {
    ComplexPolynomial::from_real(&[2.0, -2.0, 0.0, 1.0])
}

fn random_c64(rng: &mut ChaCha8Rng, r: f64) -> C64 {
    C64::from_polar(r * rng.gen::<f64>().sqrt(), std::f64::consts::TAU * rng.gen::<f64>())
}

/// Distinct roots at least `sep` apart in the disk of radius 2.
fn separated_roots(rng: &mut ChaCha8Rng, n: usize, sep: f64) -> Vec<C64> {
    let mut out: Vec<C64> = Vec::new();
    while out.len() < n {
        let z = random_c64(rng, 2.0);
        if out.iter().all(|w| (w - z).norm() > sep) {
            out.push(z);
        }
    }
    out
}

fn close(a: C64, b: C64, rel: f64) -> bool {
    (a - b).norm() <= rel * b.norm().max(1.0)
}

fn multiplier_formulas(tol: &Tolerances) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    for case in 0..10 {
        let distinct = 3 + case % 2;
        let roots = separated_roots(&mut rng, distinct, 0.5);
        let mut with_mult = Vec::new();
        let mut mults = Vec::new();
        for (i, &z) in roots.iter().enumerate() {
            // Cycle multiplicities so each of 1, 2, 3 occurs.
            let m = 1 + (i + case) % 3;
            mults.push(m);
            with_mult.extend(std::iter::repeat_n(z, m));
        }
        let p = ComplexPolynomial::from_roots(&with_mult);
        let d = match newton_map(&p, tol) {
            Ok(d) => d,
            Err(e) => return outcome(false, format!("case {case}: {e}")),
        };
        if d.roots.len() != distinct {
            return outcome(false, format!("case {case}: {} roots found, expected {distinct}", d.roots.len()));
        }
        for r in &d.roots {
            let m = r.multiplicity as f64;
            let mu = d.multiplier_at_fixed_point(Point::Finite(r.position), tol).unwrap();
            if !close(mu, C64::new((m - 1.0) / m, 0.0), MULTIPLIER_REL) {
                return outcome(false, format!("case {case}: root of multiplicity {m} has multiplier {mu}"));
            }
            checked += 1;
        }
        let n = p.degree() as f64;
        let mu = d.multiplier_at_fixed_point(Point::Infinity, tol).unwrap();
        if !close(mu, C64::new(n / (n - 1.0), 0.0), MULTIPLIER_REL) {
            return outcome(false, format!("case {case}: multiplier {mu} at infinity for degree {n}"));
        }
        checked += 1;
    }
    outcome(true, format!("{checked} fixed points over 10 polynomials"))
}

fn head_round_trip(tol: &Tolerances) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..20 {
        let n = 3 + case % 4;
        let p = ComplexPolynomial::from_roots(&separated_roots(&mut rng, n, 0.3));
        let d = newton_map(&p, tol).unwrap();
        match head_check(&d.map, tol) {
            Ok(h) if h.is_newton => {}
            other => return outcome(false, format!("Newton map of degree {n} rejected: {other:?}")),
        }
    }
    let cube = RationalMap::new(ComplexPolynomial::from_real(&[0.0, 0.0, 0.0, 1.0]), ComplexPolynomial::one()).unwrap();
    if head_check(&cube, tol).map_or(true, |h| h.is_newton) {
        return outcome(false, "z^3 accepted");
    }
    let mut rejected = 0;
    for case in 0..5 {
        let d = 3 + case % 2;
        let num: Vec<C64> = (0..=d).map(|_| random_c64(&mut rng, 1.0)).collect();
        let den: Vec<C64> = (0..d).map(|_| random_c64(&mut rng, 1.0)).collect();
        let f = RationalMap::new(ComplexPolynomial::new(num), ComplexPolynomial::new(den)).unwrap();
        match head_check(&f, tol) {
            Ok(h) if !h.is_newton => rejected += 1,
            other => return outcome(false, format!("random rational {case} not rejected: {other:?}")),
        }
    }
    outcome(true, format!("20 Newton maps accepted; z^3 and {rejected} random rationals rejected"))
}

fn access_identity(tol: &Tolerances) -> Outcome {
    let mut basins = 0;
    for (name, text) in EXAMPLES {
        let d = newton_map(&ComplexPolynomial::parse(text).unwrap(), tol).unwrap();
        let atlas = Atlas::new(&d, tol).unwrap();
        for a in access_census(&atlas).unwrap() {
            if !(a.fixed_rays + 1 == a.local_degree && a.accesses_at_infinity == a.fixed_rays) {
                return outcome(false, format!("{name}: root {} has {a:?}", a.root));
            }
            basins += 1;
        }
    }
    outcome(true, format!("{basins} basins over {} examples", EXAMPLES.len()))
}

fn graph_laws(tol: &Tolerances) -> Outcome {
    let mut notes = Vec::new();
    for (name, p, top) in [("z^3-1", cube_roots_of_unity(), 5), ("z^3-2z+2", cubic_with_cycle(), 5)] {
        let cfg = RunConfig::new(p);
        let mut pl = Pipeline::new(cfg).unwrap();
        let atlas = &mut pl.atlas;
        let mut prev: Option<Vec<usize>> = None;
        let mut worst: f64 = 0.0;
        for n in 0..=top {
            let es = atlas.newton_graph(n).unwrap();
            if let Some(pr) = &prev {
                if !is_subset(pr, &es) {
                    return outcome(false, format!("{name}: level {} not inside level {n}", n - 1));
                }
                let r = atlas.forward_invariance_residual(&es, 16);
                worst = worst.max(r);
                if r > INVARIANCE_LIFT_EPS * tol.lift_eps {
                    return outcome(false, format!("{name}: forward invariance residual {r:e} at level {n}"));
                }
            }
            let g = atlas.planar_graph(n, &es).unwrap();
            if g.euler_characteristic() != 2 {
                return outcome(false, format!("{name}: V - E + F = {} at level {n}", g.euler_characteristic()));
            }
            prev = Some(es);
        }
        // Poles are vertices of the graph at the coverage level.
        let es = atlas.newton_graph(pl.coverage.level).unwrap();
        let vs = atlas.vertex_set(&es);
        for (pole, _) in &atlas.desc.poles {
            if !vs.iter().any(|&v| chordal(atlas.vertices[v].pos, Point::Finite(*pole)) < 1e-8) {
                return outcome(false, format!("{name}: pole {pole} missing at level {}", pl.coverage.level));
            }
        }
        let m = pl.aug.period;
        for i in 1..=2 {
            let a = pl.aug.level(atlas, (i - 1) * m).unwrap();
            let b = pl.aug.level(atlas, i * m).unwrap();
            if !is_subset(&a, &b) {
                return outcome(false, format!("{name}: augmented level {} not inside level {}", (i - 1) * m, i * m));
            }
        }
        notes.push(format!("{name}: levels 0..={top}, poles at {}, period {m}, residual {worst:.1e}", pl.coverage.level));
    }
    outcome(true, notes.join("; "))
}

fn circle_separation(tol: &Tolerances) -> Outcome {
    let d = newton_map(&cubic_with_cycle(), tol).unwrap();
    let mut atlas = Atlas::new(&d, tol).unwrap();
    let cs = match search_circles(&mut atlas, 0, N_MAX) {
        Ok(c) => c,
        Err(e) => return outcome(false, e.to_string()),
    };
    let mut checked = 0;
    for c in &cs.circles {
        // Re-chain the cycle as one closed polyline and count windings directly.
        let mut closed: Vec<Point> = Vec::new();
        for (i, &e) in c.edges.iter().enumerate() {
            let rec = &atlas.edges[e];
            let from = c.vertices[i];
            let mut pts = rec.curve.pts.clone();
            if rec.a != from {
                pts.reverse();
            }
            closed.extend(pts);
        }
        closed.push(closed[0]);
        if closed.iter().any(|p| p.is_infinite()) {
            return outcome(false, "circle passes through infinity");
        }
        for cv in &c.critical_values {
            let w = newton_atlas::basin::winding_number(&closed, cv.finite().unwrap());
            // A bounded closed curve winds zero times around infinity.
            if w == 0 {
                return outcome(false, format!("critical value {cv:?} on the side of infinity"));
            }
            checked += 1;
        }
    }
    let has_one = cs.circles.iter().any(|c| c.critical_values.iter().any(|v| chordal(*v, Point::new(1.0, 0.0)) < 1e-9));
    outcome(
        has_one && checked > 0,
        format!("{} circle(s) at level {} (nu = {}), {checked} critical value(s) re-certified by winding", cs.circles.len(), cs.level, cs.nu),
    )
}

fn puzzle_theorem() -> Outcome {
    let mut cfg = RunConfig::new(cube_roots_of_unity());
    cfg.depth = FIBER_DEPTH;
    let mut pl = Pipeline::new(cfg).unwrap();
    let census = pl.puzzle_census().unwrap();
    let mut structural = census.depths.len() == FIBER_DEPTH + 1 && census.depths.iter().all(|d| d.simple);
    structural &= census.steps.iter().all(|s| s.markov_pass && s.nesting_violations == 0);
    // The cubic with a free critical point, at the depths its level cap allows.
    let mut cfg = RunConfig::new(cubic_with_cycle());
    cfg.depth = 1;
    let mut pl2 = Pipeline::new(cfg).unwrap();
    let c2 = pl2.puzzle_census().unwrap();
    structural &= c2.depths.len() == 2 && c2.depths.iter().all(|d| d.simple);
    structural &= c2.steps.iter().all(|s| s.markov_pass && s.nesting_violations == 0);
    let critical_pieces = c2.depths.iter().map(|d| d.with_critical).sum::<usize>();
    let last: Vec<String> = census
        .fibers
        .iter()
        .map(|f| format!("{} {:.3}", f.at, f.diameters.last().copied().unwrap_or(f64::NAN)))
        .collect();
    let shrunk = census.fibers.iter().all(|f| f.diameters.get(FIBER_DEPTH).is_some_and(|&d| d < FIBER_DIAMETER));
    let detail = format!(
        "nesting and Markov with degree cross-check: {} (z^3-1 depths 0..={FIBER_DEPTH}, z^3-2z+2 depths 0..=1 with {critical_pieces} critical pieces); \
         fiber diameters at depth {FIBER_DEPTH}: {}",
        if structural { "ok" } else { "FAILED" },
        last.join(", ")
    );
    Outcome { pass: structural && shrunk, detail: if structural { detail } else { format!("structural: {detail}") } }
}

fn renormalization(pl: &mut Pipeline) -> Outcome {
    let rs = pl.restrictions().unwrap();
    let Some(r) = rs.iter().find(|r| pl.inventory.as_ref().unwrap().orbits[r.orbit].period == 2) else {
        return outcome(false, "no restriction around a 2-cycle");
    };
    let (Some(low), Some(dist)) = (&r.lowest, r.masks_distance) else {
        return outcome(false, format!("restriction failed: {:?}", r.error));
    };
    let pass = low.degree == 2 && low.certified && low.fiber_period == 2 && low.mask_connected && dist <= MASK_PIXELS;
    outcome(
        pass,
        format!(
            "degree {}, fiber period {}, gap {:.2e}, residual {:.1e}, mask distance {dist} px at {MASK_RESOLUTION}²",
            low.degree, low.fiber_period, low.containment_gap, low.boundary_residual
        ),
    )
}

fn injection_for(pl: &mut Pipeline, expected: usize) -> std::result::Result<String, String> {
    let rep = pl.injection().map_err(|e| e.to_string())?;
    let inv = pl.inventory.clone().unwrap();
    if !rep.injective || rep.pairs.len() != expected || !rep.undecided.is_empty() {
        return Err(format!("{} pairs, injective {}, {} undecided", rep.pairs.len(), rep.injective, rep.undecided.len()));
    }
    let desc = pl.atlas.desc.clone();
    let is_root = |i: usize| inv.orbits[i].period == 1 && desc.root_near(inv.orbits[i].points[0].finite().unwrap(), 1e-7).is_some();
    let mut root_vs_cycle = 0;
    for c in &rep.certificates {
        if is_root(c.a) != is_root(c.b) {
            if !matches!(c.certificate, CertificateKind::GraphFace { .. }) {
                return Err(format!("orbits {} and {} lack a graph-face certificate", c.a, c.b));
            }
            root_vs_cycle += 1;
        }
        let (a, b) = (&inv.orbits[c.a].points, &inv.orbits[c.b].points);
        if !revalidate(&mut pl.atlas, &mut pl.engine, c, a, b).map_err(|e| e.to_string())? {
            return Err(format!("certificate for orbits {} and {} does not re-validate", c.a, c.b));
        }
    }
    Ok(format!("{expected} pairs, {} certificates ({root_vs_cycle} root-vs-cycle)", rep.certificates.len()))
}

fn perturbation_law(tol: &Tolerances) -> Outcome {
    let theta = (5f64.sqrt() - 1.0) / 2.0;
    let mu = C64::from_polar(1.0, std::f64::consts::TAU * theta);
    let p = ComplexPolynomial::new(vec![mu / 2.0 - mu * mu / 4.0, C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
    let eps = [1e-3, -1e-3, 1e-4, -1e-4, -1e-5];
    let r = match perturb_and_check(&p, &[vec![mu / 2.0]], &eps, tol) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let (mut rel, mut res): (f64, f64) = (0.0, 0.0);
    for e in &r.entries {
        for c in &e.cycles {
            rel = rel.max(c.relative_error);
            res = res.max(c.periodicity_residual);
            if c.class != OrbitClass::IrrationallyIndifferent || (e.epsilon < 0.0 && c.perturbed_class != OrbitClass::Attracting) {
                return outcome(false, format!("epsilon {}: {:?} became {:?}", e.epsilon, c.class, c.perturbed_class));
            }
        }
    }
    let pass = r.entries.len() == eps.len() && rel < PERTURB_REL && res < PERTURB_RESIDUAL;
    outcome(pass, format!("{} epsilons, relative error {rel:.1e}, residual {res:.1e}", eps.len()))
}

fn polynomial_count(tol: &Tolerances) -> Outcome {
    let real = |c: &[f64]| ComplexPolynomial::from_real(c);
    let theta = (5f64.sqrt() - 1.0) / 2.0;
    let mu = C64::from_polar(1.0, std::f64::consts::TAU * theta);
    let mut corpus = vec![
        real(&[0.0, 0.0, 1.0]),
        real(&[-1.0, 0.0, 1.0]),
        real(&[0.25, 0.0, 1.0]),
        real(&[-0.75, 0.0, 1.0]),
        ComplexPolynomial::new(vec![mu / 2.0 - mu * mu / 4.0, C64::new(0.0, 0.0), C64::new(1.0, 0.0)]),
        real(&[0.0, 0.0, 3.0, -2.0]),
        real(&[0.0, 0.5, 0.0, 1.0]),
        real(&[0.0, 0.0, 0.0, 0.0, 1.0]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for d in [3, 4] {
        let mut c: Vec<C64> = (0..d).map(|_| random_c64(&mut rng, 0.5)).collect();
        c.push(C64::new(1.0, 0.0));
        corpus.push(ComplexPolynomial::new(c));
    }
    let mut counts = Vec::new();
    for p in &corpus {
        match polynomial_fs_count(p, 4, tol) {
            Ok(c) if c.nonrepelling < p.degree() => counts.push(format!("{}/{}", c.nonrepelling, p.degree() - 1)),
            Ok(c) => return outcome(false, format!("{} non-repelling for degree {}", c.nonrepelling, p.degree())),
            Err(e) => return outcome(false, format!("{}: {e}", p.to_text())),
        }
    }
    outcome(true, format!("{} polynomials, counts/bound {}", corpus.len(), counts.join(" ")))
}

/// Report, basin image and filled-Julia masks of one full run, as bytes.
fn full_run(pl: &mut Pipeline) -> Vec<Vec<u8>> {
    let report = pl.report().unwrap();
    let mut out = vec![to_json(&report).unwrap().into_bytes()];
    for r in &report.restrictions {
        for s in [&r.full, &r.lowest].into_iter().flatten() {
            out.push(mask_to_pgm(s.mask.as_ref().unwrap()));
        }
    }
    let es = pl.atlas.newton_graph(pl.config.level).unwrap();
    let overlay = Overlay { polylines: es.iter().map(|&e| pl.atlas.edges[e].curve.pts.clone()).collect(), color: [255, 255, 255] };
    let desc = pl.desc().clone();
    out.push(render_basins(&desc, &Frame::covering(&desc), IMAGE_RESOLUTION, &[overlay]).unwrap().to_ppm());
    out
}

fn main() {
    let tol = Tolerances::default();
    let mut failures = Vec::new();
    let mut report = |n: usize, budget: Duration, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let mut o = f();
        let took = t.elapsed();
        if took > budget {
            o.pass = false;
            o.detail = format!("{} (over the {:?} budget)", o.detail, budget);
        }
        let known = KNOWN_RED.iter().find(|k| k.0 == n);
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {tag} [{:.1} s] {}", took.as_secs_f64(), o.detail);
        match (o.pass, known) {
            (false, Some(k)) => println!("             known red: {}", k.1),
            (false, None) => failures.push(n),
            (true, Some(_)) => println!("             listed as known red but passed"),
            _ => {}
        }
    };
    let secs = Duration::from_secs;
    report(1, secs(1), &mut || multiplier_formulas(&tol));
    report(2, secs(5), &mut || head_round_trip(&tol));
    report(3, secs(30), &mut || access_identity(&tol));
    report(4, secs(300), &mut || graph_laws(&tol));
    report(5, secs(120), &mut || circle_separation(&tol));
    report(6, secs(600), &mut puzzle_theorem);

    let mut cfg = RunConfig::new(cubic_with_cycle());
    cfg.resolution = MASK_RESOLUTION;
    let mut first = Pipeline::new(cfg.clone()).unwrap();
    report(7, secs(300), &mut || renormalization(&mut first));
    report(8, secs(120), &mut || {
        let mut unity = Pipeline::new(RunConfig::new(cube_roots_of_unity())).unwrap();
        let a = injection_for(&mut unity, 3);
        let b = injection_for(&mut first, 4);
        match (a, b) {
            (Ok(a), Ok(b)) => outcome(true, format!("z^3-1: {a}; z^3-2z+2: {b}")),
            (Err(e), _) => outcome(false, format!("z^3-1: {e}")),
            (_, Err(e)) => outcome(false, format!("z^3-2z+2: {e}")),
        }
    });
    report(9, secs(10), &mut || perturbation_law(&tol));
    report(10, secs(60), &mut || polynomial_count(&tol));
    report(11, secs(900), &mut || {
        let runs: Vec<Vec<Vec<u8>>> = (0..2).map(|_| full_run(&mut Pipeline::new(cfg.clone()).unwrap())).collect();
        let bytes: usize = runs[0].iter().map(Vec::len).sum();
        outcome(runs[0] == runs[1], format!("2 runs, {} artifacts, {bytes} bytes each", runs[0].len()))
    });

    if !failures.is_empty() {
        eprintln!("unexpected failures: {failures:?}");
        std::process::exit(1);
    }
}
