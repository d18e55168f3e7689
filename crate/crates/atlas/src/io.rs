//! Serialization: canonical JSON, graph export and raster images.

use crate::error::{Error, Result};
use crate::graph::{PlanarGraph, VertexKind};
use crate::renorm::JuliaMask;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

/// Report schema version.
pub const SCHEMA: u32 = 1;

/// Pretty JSON with a trailing newline. Floats use the shortest round-trip form.
pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json<T: DeserializeOwned>(s: &str) -> Result<T> {
    Ok(serde_json::from_str(s)?)
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| Error::Precondition(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn kind_name(k: VertexKind) -> (&'static str, usize) {
    match k {
        VertexKind::Root { .. } => ("root", 0),
        VertexKind::Infinity => ("infinity", 0),
        VertexKind::Prepole { level } => ("prepole", level),
        VertexKind::Prefixed { level, .. } => ("prefixed", level),
        VertexKind::Auxiliary => ("auxiliary", 0),
    }
}

/// DOT text carrying the combinatorics: vertex kinds and levels, and for each
/// edge its position in the rotation at both ends.
pub fn graph_to_dot(g: &PlanarGraph) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "graph delta {{");
    let _ = writeln!(s, "  graph [level={}];", g.level);
    for (i, v) in g.vertices.iter().enumerate() {
        let (kind, level) = kind_name(v.kind);
        let _ = writeln!(s, "  v{i} [kind=\"{kind}\", level={level}, key={}];", v.key);
    }
    for (e, ed) in g.edges.iter().enumerate() {
        let role = serde_json::to_value(ed.provenance.role).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        let (ra, rb) = if g.is_finalized() { (g.rotation_index(2 * e), g.rotation_index(2 * e + 1)) } else { (0, 0) };
        let _ = writeln!(s, "  v{} -- v{} [id={e}, role=\"{role}\", tail_rotation={ra}, head_rotation={rb}];", ed.a, ed.b);
    }
    s.push_str("}\n");
    s
}

/// JSON carrying the geometry.
pub fn graph_to_json(g: &PlanarGraph) -> Result<String> {
    to_json(g)
}

/// Parses and finalizes a graph written by [`graph_to_json`].
pub fn graph_from_json(s: &str) -> Result<PlanarGraph> {
    let mut g: PlanarGraph = from_json(s)?;
    if !g.vertices.is_empty() {
        g.finalize()?;
    }
    Ok(g)
}

/// 8-bit RGB raster, row 0 at the top.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Image {
        Image { width, height, rgb: vec![0; 3 * width * height] }
    }

    pub fn put(&mut self, x: usize, y: usize, c: [u8; 3]) {
        if x < self.width && y < self.height {
            let i = 3 * (y * self.width + x);
            self.rgb[i..i + 3].copy_from_slice(&c);
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    /// Binary PPM (P6).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.rgb);
        out
    }
}

/// Binary PGM (P5) of a mask, set pixels white, top row first.
pub fn mask_to_pgm(m: &JuliaMask) -> Vec<u8> {
    let n = m.resolution;
    let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
    for row in (0..n).rev() {
        out.extend(m.bits[row * n..(row + 1) * n].iter().map(|&b| if b { 255u8 } else { 0 }));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::newton::newton_map;
    use crate::newton_graph::Atlas;
    use crate::poly::ComplexPolynomial;
    use crate::tolerances::Tolerances;

    #[test]
    fn channel_diagram_exports() {
        let tol = Tolerances::default();
        let d = newton_map(&ComplexPolynomial::from_real(&[-1.0, 0.0, 0.0, 1.0]), &tol).unwrap();
        let a = Atlas::new(&d, &tol).unwrap();
        let g = a.planar_graph(0, &a.channel).unwrap();
        let dot = graph_to_dot(&g);
        assert_eq!(dot.matches(" [kind=").count(), 4);
        assert_eq!(dot.matches(" -- ").count(), 3);
        let js = graph_to_json(&g).unwrap();
        let back = graph_from_json(&js).unwrap();
        assert_eq!(graph_to_json(&back).unwrap(), js);
        assert_eq!(back.face_count(), g.face_count());
    }

    #[test]
    fn empty_graph_round_trips() {
        let g = PlanarGraph::new(0, Vec::new(), Vec::new());
        let js = graph_to_json(&g).unwrap();
        let v: serde_json::Value = serde_json::from_str(&js).unwrap();
        assert_eq!(v["vertices"].as_array().unwrap().len(), 0);
        assert_eq!(graph_to_json(&graph_from_json(&js).unwrap()).unwrap(), js);
        assert!(graph_to_dot(&g).starts_with("graph delta {"));
    }

    #[test]
    fn ppm_header() {
        let mut im = Image::new(2, 1);
        im.put(1, 0, [1, 2, 3]);
        let b = im.to_ppm();
        assert!(b.starts_with(b"P6\n2 1\n255\n"));
        assert_eq!(&b[b.len() - 3..], &[1, 2, 3]);
    }
}
