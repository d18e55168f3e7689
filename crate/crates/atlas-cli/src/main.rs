//! `newton-atlas`: Newton graphs, puzzles, renormalization and critical-orbit
//! injection for the Newton map of a polynomial.
//!
//! Exit status: 0 on success, 2 when a verified property fails, 1 on usage or IO errors.

mod cache;

use cache::Cache;
use clap::{Args, Parser, Subcommand, ValueEnum};
use newton_atlas::fsi::{marked_cycles, perturb_and_check, polynomial_fs_count, polynomial_orbits, PerturbationReport, PolynomialCount};
use newton_atlas::io::{graph_to_dot, graph_to_json, mask_to_pgm, to_json, write_atomic};
use newton_atlas::render::{render_basins, root_color, Frame, Overlay};
use newton_atlas::report::{Pipeline, RunConfig};
use newton_atlas::{ComplexPolynomial, Error};
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "newton-atlas", version, about = "Dynamics of Newton maps of polynomials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline report.
    Analyze(Common),
    /// Export the Newton graph at --level.
    Graph(Common),
    /// Puzzle census up to --depth with Markov and nesting checks.
    Puzzle(Common),
    /// Polynomial-like restrictions around non-repelling cycles.
    Renorm(Common),
    /// Critical-orbit injection with separation certificates.
    Fsi(Common),
    /// Basin image with the Newton graph at --level drawn on top.
    Render(Common),
    /// Perturbation law and cycle count for the polynomial itself.
    Perturb(PerturbArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Coefficients as re:im pairs in ascending powers, e.g. "-1:0,0:0,0:0,1:0".
    #[arg(long, allow_hyphen_values = true)]
    poly: String,
    #[arg(long, default_value_t = 4)]
    max_period: usize,
    #[arg(long, default_value_t = 0)]
    depth: usize,
    #[arg(long, default_value_t = 3)]
    level: usize,
    /// Modulus of the Böttcher coordinate on root-level truncation circles.
    #[arg(long, default_value_t = 0.5)]
    equipotential_level: f64,
    #[arg(long, default_value_t = 512)]
    resolution: usize,
    /// Cache directory; NEWTON_ATLAS_CACHE is used when absent.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Output file; standard output when absent (text formats only).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Tolerance override, repeatable.
    #[arg(long = "eps", value_name = "NAME=VALUE")]
    eps: Vec<String>,
}

#[derive(Args, Clone)]
struct PerturbArgs {
    #[command(flatten)]
    common: Common,
    /// Perturbation sizes; defaults to ±1e-3, ±1e-4, ±1e-5.
    #[arg(long = "epsilon", allow_hyphen_values = true)]
    epsilon: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Dot,
    Ppm,
    Pgm,
}

/// A failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure { code: 1, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

fn config(c: &Common) -> Result<RunConfig, Failure> {
    let poly = ComplexPolynomial::parse(&c.poly)?;
    let mut cfg = RunConfig::new(poly);
    cfg.max_period = c.max_period;
    cfg.depth = c.depth;
    cfg.level = c.level;
    cfg.equipotential_level = c.equipotential_level;
    cfg.resolution = c.resolution;
    for kv in &c.eps {
        let (name, value) = kv.split_once('=').ok_or_else(|| usage(format!("--eps expects name=value, got {kv:?}")))?;
        let value: f64 = value.parse().map_err(|_| usage(format!("--eps {name}: not a number")))?;
        cfg.tol.set(name, value).map_err(usage)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cache_of(c: &Common) -> Option<Cache> {
    c.cache_dir.clone().or_else(|| std::env::var_os("NEWTON_ATLAS_CACHE").map(PathBuf::from)).map(Cache::new)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(p) => write_atomic(p, bytes).map_err(Failure::from),
        None => std::io::stdout().write_all(bytes).map_err(|e| usage(e.to_string())),
    }
}

/// Runs `f` unless the cache already holds its output for this stage and input.
fn cached(c: &Common, cfg: &RunConfig, stage: &str, f: impl FnOnce() -> Result<Vec<u8>, Failure>) -> Result<Vec<u8>, Failure> {
    let cache = cache_of(c);
    let input = to_json(cfg)?;
    let k = cache::key(&[b"schema-1", stage.as_bytes(), input.as_bytes()]);
    if let Some(hit) = cache.as_ref().and_then(|c| c.get(&k)) {
        return Ok(hit);
    }
    let bytes = f()?;
    if let Some(c) = cache {
        c.put(&k, &bytes)?;
    }
    Ok(bytes)
}

fn json<T: Serialize>(v: &T) -> Result<Vec<u8>, Failure> {
    Ok(to_json(v)?.into_bytes())
}

/// Stage outputs carry a `violations` list; a non-empty one means exit 2.
fn verdict(bytes: &[u8]) -> u8 {
    let v: serde_json::Value = serde_json::from_slice(bytes).unwrap_or_default();
    match v.get("violations").and_then(|x| x.as_array()) {
        Some(a) if !a.is_empty() => 2,
        _ => 0,
    }
}

#[derive(Serialize)]
struct Staged<T: Serialize> {
    schema: u32,
    config: RunConfig,
    #[serde(flatten)]
    body: T,
    violations: Vec<String>,
}

fn staged<T: Serialize>(cfg: &RunConfig, body: T, violations: Vec<String>) -> Result<Vec<u8>, Failure> {
    json(&Staged { schema: newton_atlas::io::SCHEMA, config: cfg.clone(), body, violations })
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let started = Instant::now();
    let (stage, code) = match cli.command {
        Command::Analyze(c) => {
            let cfg = config(&c)?;
            let out = cached(&c, &cfg, "analyze", || json(&Pipeline::new(cfg.clone())?.report()?))?;
            emit(c.out.as_deref(), &out)?;
            ("analyze", verdict(&out))
        }
        Command::Graph(c) => {
            let cfg = config(&c)?;
            let format = c.format.unwrap_or(Format::Json);
            if !matches!(format, Format::Json | Format::Dot) {
                return Err(usage("graph supports --format json or dot"));
            }
            let stage = if format == Format::Dot { "graph-dot" } else { "graph-json" };
            let out = cached(&c, &cfg, stage, || {
                let mut p = Pipeline::new(cfg.clone())?;
                let es = p.atlas.newton_graph(cfg.level)?;
                let g = p.atlas.planar_graph(cfg.level, &es)?;
                Ok(if format == Format::Dot { graph_to_dot(&g).into_bytes() } else { graph_to_json(&g)?.into_bytes() })
            })?;
            emit(c.out.as_deref(), &out)?;
            ("graph", 0)
        }
        Command::Puzzle(c) => {
            let cfg = config(&c)?;
            let out = cached(&c, &cfg, "puzzle", || {
                let mut p = Pipeline::new(cfg.clone())?;
                let census = p.puzzle_census()?;
                let mut v = Vec::new();
                if census.depths.len() <= cfg.depth {
                    v.push(format!("depth {} exceeds the level cap", cfg.depth));
                }
                for s in &census.steps {
                    if !s.markov_pass {
                        v.push(format!("Markov check fails from depth {} to {}", s.from, s.to));
                    }
                    if s.nesting_violations > 0 {
                        v.push(format!("{} nesting violations from depth {} to {}", s.nesting_violations, s.from, s.to));
                    }
                }
                staged(&cfg, census, v)
            })?;
            emit(c.out.as_deref(), &out)?;
            ("puzzle", verdict(&out))
        }
        Command::Renorm(c) => {
            let cfg = config(&c)?;
            let mut p = Pipeline::new(cfg.clone())?;
            let rs = p.restrictions()?;
            if let Some(out) = &c.out {
                // Masks go next to the report.
                let stem = out.with_extension("");
                for r in &rs {
                    for (name, s) in [("full", &r.full), ("lowest", &r.lowest)] {
                        if let Some(m) = s.as_ref().and_then(|s| s.mask.as_ref()) {
                            let path = PathBuf::from(format!("{}-orbit{}-{name}.pgm", stem.display(), r.orbit));
                            write_atomic(&path, &mask_to_pgm(m))?;
                        }
                    }
                }
            }
            let mut v = Vec::new();
            for r in &rs {
                if let Some(e) = &r.error {
                    v.push(format!("orbit {}: {e}", r.orbit));
                }
                if r.lowest.as_ref().is_some_and(|l| !l.certified || !l.mask_connected) || r.masks_distance.is_some_and(|d| d > 2) {
                    v.push(format!("orbit {}: restriction not certified", r.orbit));
                }
            }
            #[derive(Serialize)]
            struct Body {
                restrictions: Vec<newton_atlas::report::RestrictionEntry>,
            }
            let out = staged(&cfg, Body { restrictions: rs }, v)?;
            emit(c.out.as_deref(), &out)?;
            ("renorm", verdict(&out))
        }
        Command::Fsi(c) => {
            let cfg = config(&c)?;
            let out = cached(&c, &cfg, "fsi", || {
                let mut p = Pipeline::new(cfg.clone())?;
                let inv = p.inventory()?.clone();
                let inj = p.injection()?;
                let mut v = Vec::new();
                if !inj.injective {
                    v.push("critical-orbit assignment is not injective".into());
                }
                for (a, b, why) in &inj.undecided {
                    v.push(format!("orbits {a} and {b}: {why}"));
                }
                #[derive(Serialize)]
                struct Body {
                    orbits: newton_atlas::orbits::OrbitInventory,
                    injection: newton_atlas::fsi::InjectionReport,
                }
                staged(&cfg, Body { orbits: inv, injection: inj }, v)
            })?;
            emit(c.out.as_deref(), &out)?;
            ("fsi", verdict(&out))
        }
        Command::Render(c) => {
            let cfg = config(&c)?;
            if c.format.is_some_and(|f| f != Format::Ppm) {
                return Err(usage("render writes --format ppm"));
            }
            let out_path = c.out.clone().ok_or_else(|| usage("render needs --out"))?;
            let out = cached(&c, &cfg, "render", || {
                let mut p = Pipeline::new(cfg.clone())?;
                let es = p.atlas.newton_graph(cfg.level)?;
                let overlay = Overlay { polylines: es.iter().map(|&e| p.atlas.edges[e].curve.pts.clone()).collect(), color: [255, 255, 255] };
                let desc = p.desc().clone();
                let frame = Frame::covering(&desc);
                let mut im = render_basins(&desc, &frame, cfg.resolution, &[overlay])?;
                // Root markers.
                for (i, r) in desc.roots.iter().enumerate() {
                    if let Some((x, y)) = frame.pixel(cfg.resolution, r.position) {
                        for dx in 0..3 {
                            for dy in 0..3 {
                                im.put((x as usize + dx).saturating_sub(1), (y as usize + dy).saturating_sub(1), root_color(i).map(|c| c / 3));
                            }
                        }
                    }
                }
                Ok(im.to_ppm())
            })?;
            emit(Some(&out_path), &out)?;
            ("render", 0)
        }
        Command::Perturb(a) => {
            let c = &a.common;
            let cfg = config(c)?;
            let eps = if a.epsilon.is_empty() { vec![1e-3, -1e-3, 1e-4, -1e-4, 1e-5, -1e-5] } else { a.epsilon.clone() };
            #[derive(Serialize)]
            struct Body {
                perturbation: PerturbationReport,
                count: PolynomialCount,
            }
            let inv = polynomial_orbits(&cfg.poly, cfg.max_period, 48, &cfg.tol)?;
            let cycles: Vec<Vec<_>> = marked_cycles(&inv).iter().map(|o| o.points.iter().filter_map(|p| p.finite()).collect()).collect();
            let perturbation = perturb_and_check(&cfg.poly, &cycles, &eps, &cfg.tol)?;
            let count = match polynomial_fs_count(&cfg.poly, cfg.max_period, &cfg.tol) {
                Ok(c) => c,
                Err(Error::BoundViolated(m)) => return Err(Failure { code: 2, message: m }),
                Err(e) => return Err(e.into()),
            };
            let v = if perturbation.pass { Vec::new() } else { vec!["perturbation law fails".to_string()] };
            let out = staged(&cfg, Body { perturbation, count }, v)?;
            emit(c.out.as_deref(), &out)?;
            ("perturb", verdict(&out))
        }
    };
    // Timing stays out of the report so reports are byte-identical across runs.
    eprintln!("{stage}: {:.3} s", started.elapsed().as_secs_f64());
    Ok(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
