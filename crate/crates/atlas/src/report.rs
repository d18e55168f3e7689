//! The full analysis pipeline and its versioned report.

use crate::basin::AccessReport;
use crate::error::{Error, Result};
use crate::fsi::{injection_report, InjectionReport};
use crate::io::SCHEMA;
use crate::newton::{newton_map, NewtonMapDescriptor};
use crate::newton_graph::{access_census, pole_coverage_level, search_circles, Atlas, Augmented, PoleCoverage, N_MAX};
use crate::orbits::{newton_orbits, OrbitInventory};
use crate::poly::ComplexPolynomial;
use crate::puzzle::{fiber_nest, nesting_violations, verify_markov, Puzzle, PuzzleEngine};
use crate::renorm::{extract_renormalization, filled_julia_mask, lowest_period_restriction, mask_distance, mask_frame, JuliaMask, PolynomialLikeRestriction};
use crate::sphere::{Point, C64};
use crate::tolerances::Tolerances;
use serde::{Deserialize, Serialize};

/// Shipped example polynomials as (name, coefficient text in ascending powers).
pub const EXAMPLES: &[(&str, &str)] = &[
    ("z^3-1", "-1,0,0,1"),
    ("z^3-2z+2", "2,-2,0,1"),
    ("z^3+1", "1,0,0,1"),
    ("z^3-z", "0,-1,0,1"),
    ("z^4-1", "-1,0,0,0,1"),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub poly: ComplexPolynomial,
    pub tol: Tolerances,
    pub max_period: usize,
    /// Deepest puzzle depth.
    pub depth: usize,
    /// Deepest Newton graph level in the census.
    pub level: usize,
    /// Modulus of the Böttcher coordinate on the root-level truncation circle.
    pub equipotential_level: f64,
    /// Side of rendered images and filled-Julia masks.
    pub resolution: usize,
}

impl RunConfig {
    pub fn new(poly: ComplexPolynomial) -> RunConfig {
        RunConfig { poly, tol: Tolerances::default(), max_period: 4, depth: 0, level: 3, equipotential_level: 0.5, resolution: 512 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_period == 0 || self.resolution == 0 || self.level > N_MAX {
            return Err(Error::Precondition("caps must be positive and level at most 12".into()));
        }
        if !(self.equipotential_level > 0.0 && self.equipotential_level < 1.0) {
            return Err(Error::Precondition("equipotential level must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Everything computed for one polynomial, shared between stages.
pub struct Pipeline {
    pub config: RunConfig,
    pub atlas: Atlas,
    pub aug: Augmented,
    pub engine: PuzzleEngine,
    pub coverage: PoleCoverage,
    pub inventory: Option<OrbitInventory>,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Pipeline> {
        config.validate()?;
        let desc = newton_map(&config.poly, &config.tol)?;
        let mut atlas = Atlas::new(&desc, &config.tol)?;
        let coverage = pole_coverage_level(&mut atlas, N_MAX)?;
        let circles = search_circles(&mut atlas, coverage.level, N_MAX)?;
        let mut aug = Augmented::new(&atlas, circles, coverage.level);
        let engine = PuzzleEngine::with_equipotential(&mut atlas, &mut aug, config.equipotential_level.log2())?;
        Ok(Pipeline { config, atlas, aug, engine, coverage, inventory: None })
    }

    pub fn desc(&self) -> &NewtonMapDescriptor {
        &self.atlas.desc
    }

    pub fn inventory(&mut self) -> Result<&OrbitInventory> {
        if self.inventory.is_none() {
            self.inventory = Some(newton_orbits(&self.atlas.desc, self.config.max_period, 64, &self.config.tol)?);
        }
        Ok(self.inventory.as_ref().unwrap())
    }

    pub fn graph_census(&mut self) -> Result<Vec<GraphCensus>> {
        (0..=self.config.level)
            .map(|n| {
                let es = self.atlas.newton_graph(n)?;
                let g = self.atlas.planar_graph(n, &es)?;
                Ok(GraphCensus {
                    level: n,
                    vertices: g.vertices.len(),
                    edges: g.edges.len(),
                    faces: g.face_count(),
                    euler: g.euler_characteristic(),
                    invariance_residual: if n == 0 { 0.0 } else { self.atlas.forward_invariance_residual(&es, 16) },
                })
            })
            .collect()
    }

    /// Puzzles of depth 0..=depth, stopping at the level cap.
    pub fn puzzles(&mut self) -> Result<Vec<&Puzzle>> {
        let mut top = None;
        for d in 0..=self.config.depth {
            match self.engine.puzzle(&mut self.atlas, d) {
                Ok(_) => top = Some(d),
                Err(Error::DepthExhausted(_)) => break,
                Err(e) => return Err(e),
            }
        }
        Ok(top.map_or(Vec::new(), |t| (0..=t).map(|d| self.engine.get(d).unwrap()).collect()))
    }

    pub fn puzzle_census(&mut self) -> Result<PuzzleCensus> {
        let requested = self.config.depth;
        let m = self.engine.config.m;
        self.puzzles()?;
        let atlas = &self.atlas;
        let ps: Vec<&Puzzle> = (0..=requested).map_while(|d| self.engine.get(d)).collect();
        let depths = ps
            .iter()
            .map(|p| DepthCensus {
                depth: p.depth,
                level: p.level,
                pieces: p.pieces.len(),
                simple: p.pieces.iter().all(|q| q.simple),
                with_critical: p.pieces.iter().filter(|q| !q.critical_points.is_empty()).count(),
            })
            .collect();
        let mut steps = Vec::new();
        for w in ps.windows(2) {
            let r = verify_markov(atlas, w[0], w[1], m);
            let failures: Vec<usize> = r.entries.iter().filter(|e| !e.pass).map(|e| e.piece).take(16).collect();
            steps.push(StepCensus {
                from: w[0].depth,
                to: w[1].depth,
                nesting_violations: nesting_violations(atlas, w[0], w[1]).len(),
                markov_pass: r.pass,
                markov_failures: failures,
                max_boundary_residual: r.entries.iter().map(|e| e.boundary_residual).fold(0.0, f64::max),
            })
        }
        let mut fibers = Vec::new();
        let marks = [("infinity", Point::Infinity)]
            .into_iter()
            .chain(self.atlas.desc.poles.iter().map(|p| ("pole", Point::Finite(p.0))));
        for (name, x) in marks {
            match fiber_nest(atlas, &ps, x) {
                Ok(f) => fibers.push(FiberCensus { at: name.into(), point: x, diameters: f.diameters, pieces: f.pieces }),
                Err(Error::InBasin(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(PuzzleCensus { period: m, requested_depth: requested, depths, steps, fibers })
    }

    /// Restrictions around every non-repelling cycle of period at least 2.
    pub fn restrictions(&mut self) -> Result<Vec<RestrictionEntry>> {
        let inv = self.inventory()?.clone();
        let m = self.engine.config.m;
        self.engine.puzzle(&mut self.atlas, 0)?;
        let p0 = self.engine.get(0).unwrap();
        let mut out = Vec::new();
        for (id, o) in inv.nonrepelling().filter(|(_, o)| o.period >= 2) {
            let q = o.points[0];
            let full = extract_renormalization(&mut self.atlas, p0, q, m);
            let low = lowest_period_restriction(&mut self.atlas, p0, p0, q, m);
            let (full, low) = match (full, low) {
                (Ok(f), Ok(l)) => (f, l),
                (Err(e), _) | (_, Err(e)) => {
                    out.push(RestrictionEntry { orbit: id, error: Some(e.to_string()), full: None, lowest: None, masks_distance: None });
                    continue;
                }
            };
            let res = self.config.resolution;
            let frame = mask_frame(&low)?;
            let mf = filled_julia_mask(&self.atlas, &full, res, Some(frame), 64)?;
            let ml = filled_julia_mask(&self.atlas, &low, res, Some(frame), 64 * full.iterate / low.iterate)?;
            let d = mask_distance(&mf.bits, &ml.bits, res);
            out.push(RestrictionEntry {
                orbit: id,
                error: None,
                full: Some(RestrictionSummary::new(&full, &self.atlas.tol, mf)),
                lowest: Some(RestrictionSummary::new(&low, &self.atlas.tol, ml)),
                masks_distance: Some(d),
            });
        }
        Ok(out)
    }

    /// Restrictions recomputed as objects, for association evidence.
    pub fn restriction_objects(&mut self) -> Result<Vec<PolynomialLikeRestriction>> {
        let inv = self.inventory()?.clone();
        let m = self.engine.config.m;
        self.engine.puzzle(&mut self.atlas, 0)?;
        let p0 = self.engine.get(0).unwrap();
        Ok(inv
            .nonrepelling()
            .filter(|(_, o)| o.period >= 2)
            .filter_map(|(_, o)| extract_renormalization(&mut self.atlas, p0, o.points[0], m).ok())
            .collect())
    }

    pub fn injection(&mut self) -> Result<InjectionReport> {
        let rs = self.restriction_objects()?;
        let inv = self.inventory()?.clone();
        let level = self.engine.level_of(self.config.depth).min(self.engine.max_levels);
        injection_report(&mut self.atlas, &mut self.aug, &mut self.engine, &inv, &rs, level)
    }

    /// All stages in order.
    pub fn report(&mut self) -> Result<Report> {
        let desc = DescriptorSummary::new(self.desc());
        let access = access_census(&self.atlas)?;
        let orbits = self.inventory()?.clone();
        let graphs = self.graph_census()?;
        let puzzles = self.puzzle_census()?;
        let restrictions = self.restrictions()?;
        let injection = self.injection()?;
        let circles = CircleSummary {
            level: self.aug.circles.level,
            nu: self.aug.circles.nu,
            count: self.aug.circles.circles.len(),
            period: self.aug.period,
        };
        let mut r = Report {
            schema: SCHEMA,
            config: self.config.clone(),
            descriptor: desc,
            access,
            orbits,
            graphs,
            pole_coverage: self.coverage.clone(),
            circles,
            puzzles: Some(puzzles),
            restrictions,
            injection: Some(injection),
            violations: Vec::new(),
        };
        r.violations = r.find_violations();
        Ok(r)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DescriptorSummary {
    pub degree: usize,
    pub polynomial: String,
    pub roots: Vec<RootSummary>,
    pub critical_points: Vec<(Point, usize)>,
    pub poles: Vec<(C64, usize)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RootSummary {
    pub position: C64,
    pub multiplicity: usize,
    pub multiplier: C64,
    pub superattracting: bool,
}

impl DescriptorSummary {
    pub fn new(d: &NewtonMapDescriptor) -> DescriptorSummary {
        let roots = d
            .roots
            .iter()
            .map(|r| {
                let mu = d.map.fixed_multiplier(Point::Finite(r.position));
                RootSummary { position: r.position, multiplicity: r.multiplicity, multiplier: mu, superattracting: mu.norm() < 1e-9 }
            })
            .collect();
        DescriptorSummary {
            degree: d.degree,
            polynomial: d.source.to_text(),
            roots,
            critical_points: d.critical_points.clone(),
            poles: d.poles.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphCensus {
    pub level: usize,
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub euler: i64,
    /// Largest distance from the image of a sampled edge point to the graph one level down.
    pub invariance_residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CircleSummary {
    pub level: usize,
    pub nu: usize,
    pub count: usize,
    pub period: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DepthCensus {
    pub depth: usize,
    pub level: usize,
    pub pieces: usize,
    pub simple: bool,
    pub with_critical: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepCensus {
    pub from: usize,
    pub to: usize,
    pub nesting_violations: usize,
    pub markov_pass: bool,
    /// First failing pieces, if any.
    pub markov_failures: Vec<usize>,
    pub max_boundary_residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FiberCensus {
    pub at: String,
    pub point: Point,
    pub diameters: Vec<f64>,
    pub pieces: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PuzzleCensus {
    pub period: usize,
    pub requested_depth: usize,
    pub depths: Vec<DepthCensus>,
    pub steps: Vec<StepCensus>,
    pub fibers: Vec<FiberCensus>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RestrictionSummary {
    pub iterate: usize,
    pub period: usize,
    pub fiber_period: usize,
    pub degree: usize,
    pub degree_preimage: Vec<usize>,
    pub critical_per_step: Vec<usize>,
    pub containment_gap: f64,
    pub boundary_residual: f64,
    pub connected: bool,
    pub certified: bool,
    pub thickened: usize,
    pub mask_components: usize,
    pub mask_pixels: usize,
    pub mask_connected: bool,
    #[serde(skip)]
    pub mask: Option<JuliaMask>,
}

impl RestrictionSummary {
    fn new(r: &PolynomialLikeRestriction, tol: &Tolerances, mask: JuliaMask) -> RestrictionSummary {
        RestrictionSummary {
            iterate: r.iterate,
            period: r.period,
            fiber_period: r.fiber_period,
            degree: r.degree,
            degree_preimage: r.degree_preimage.clone(),
            critical_per_step: r.critical_steps.iter().map(|c| c.iter().map(|x| x.1).sum()).collect(),
            containment_gap: r.containment_gap,
            boundary_residual: r.boundary_residual,
            connected: r.connected,
            certified: r.certified(tol),
            thickened: r.thickened.len(),
            mask_components: mask.components,
            mask_pixels: mask.bits.iter().filter(|&&b| b).count(),
            mask_connected: mask.connected,
            mask: Some(mask),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RestrictionEntry {
    pub orbit: usize,
    pub error: Option<String>,
    pub full: Option<RestrictionSummary>,
    pub lowest: Option<RestrictionSummary>,
    /// Largest pixel distance between the two filled-Julia masks.
    pub masks_distance: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub config: RunConfig,
    pub descriptor: DescriptorSummary,
    pub access: Vec<AccessReport>,
    pub orbits: OrbitInventory,
    pub graphs: Vec<GraphCensus>,
    pub pole_coverage: PoleCoverage,
    pub circles: CircleSummary,
    pub puzzles: Option<PuzzleCensus>,
    pub restrictions: Vec<RestrictionEntry>,
    pub injection: Option<InjectionReport>,
    /// Verified properties that failed.
    pub violations: Vec<String>,
}

impl Report {
    /// Checked properties that do not hold, one line each.
    pub fn find_violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for a in self.access.iter().filter(|a| !a.consistent) {
            v.push(format!("access census of root {} is inconsistent", a.root));
        }
        for g in self.graphs.iter().filter(|g| g.euler != 2) {
            v.push(format!("Euler characteristic {} at level {}", g.euler, g.level));
        }
        if let Some(p) = &self.puzzles {
            for d in p.depths.iter().filter(|d| !d.simple) {
                v.push(format!("non-simple piece at depth {}", d.depth));
            }
            for s in &p.steps {
                if !s.markov_pass {
                    v.push(format!("Markov check fails from depth {} to {}", s.from, s.to));
                }
                if s.nesting_violations > 0 {
                    v.push(format!("{} nesting violations from depth {} to {}", s.nesting_violations, s.from, s.to));
                }
            }
        }
        for r in &self.restrictions {
            if let Some(e) = &r.error {
                v.push(format!("restriction around orbit {}: {e}", r.orbit));
            }
            if let Some(l) = &r.lowest {
                if !l.certified || !l.mask_connected {
                    v.push(format!("lowest-period restriction around orbit {} is not certified", r.orbit));
                }
            }
            if r.masks_distance.is_some_and(|d| d > 2) {
                v.push(format!("filled-Julia masks around orbit {} differ", r.orbit));
            }
        }
        if let Some(i) = &self.injection {
            if !i.injective {
                v.push("critical-orbit assignment is not injective".into());
            }
            for (a, b, why) in &i.undecided {
                v.push(format!("orbits {a} and {b}: {why}"));
            }
        }
        v
    }
}
