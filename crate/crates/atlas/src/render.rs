//! Basin rendering with polyline overlays.

use crate::error::{Error, Result};
use crate::io::Image;
use crate::newton::NewtonMapDescriptor;
use crate::sphere::{Point, C64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest accepted side length.
pub const MAX_RESOLUTION: usize = 8192;

/// Square window: pixel (i, j) samples center + half_width·e^{i·rotation}·(x + iy)
/// with x, y in (-1, 1), y pointing up.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub center: C64,
    pub half_width: f64,
    pub rotation: f64,
}

impl Frame {
    /// Centered at the root barycenter, covering the roots with margin.
    pub fn covering(desc: &NewtonMapDescriptor) -> Frame {
        let n = desc.roots.len() as f64;
        let center = desc.roots.iter().map(|r| r.position).sum::<C64>() / n;
        let extent = desc.roots.iter().map(|r| (r.position - center).norm()).fold(0.0, f64::max);
        Frame { center, half_width: 1.5 * extent.max(0.5), rotation: 0.0 }
    }

    pub fn sample(&self, res: usize, col: usize, row: usize) -> C64 {
        let h = 2.0 / res as f64;
        let x = -1.0 + (col as f64 + 0.5) * h;
        let y = 1.0 - (row as f64 + 0.5) * h;
        self.center + C64::from_polar(self.half_width, self.rotation) * C64::new(x, y)
    }

    /// Pixel coordinates of a point, if finite.
    pub fn pixel(&self, res: usize, z: C64) -> Option<(f64, f64)> {
        let w = (z - self.center) / C64::from_polar(self.half_width, self.rotation);
        let px = (w.re + 1.0) * res as f64 / 2.0;
        let py = (1.0 - w.im) * res as f64 / 2.0;
        (px.is_finite() && py.is_finite()).then_some((px, py))
    }
}

/// Root reached from `z` and the number of Newton steps taken, within `max_iter`.
pub fn basin_and_steps(desc: &NewtonMapDescriptor, z: C64, max_iter: usize) -> Option<(usize, usize)> {
    let mut p = Point::Finite(z);
    for it in 0..max_iter {
        if let Point::Finite(w) = p {
            for (i, r) in desc.roots.iter().enumerate() {
                if (w - r.position).norm() < 1e-6 {
                    return Some((i, it));
                }
            }
        }
        p = desc.map.eval(p);
    }
    None
}

/// Basin index per pixel, row-major from the top.
pub fn basin_grid(desc: &NewtonMapDescriptor, frame: &Frame, res: usize, max_iter: usize) -> Vec<Option<(usize, usize)>> {
    (0..res * res)
        .into_par_iter()
        .map(|i| basin_and_steps(desc, frame.sample(res, i % res, i / res), max_iter))
        .collect()
}

const PALETTE: [[u8; 3]; 8] = [
    [230, 80, 60],
    [60, 150, 230],
    [90, 200, 90],
    [240, 200, 60],
    [170, 90, 220],
    [60, 210, 200],
    [240, 140, 40],
    [200, 200, 200],
];

pub fn root_color(i: usize) -> [u8; 3] {
    PALETTE[i % PALETTE.len()]
}

/// Polylines drawn in one color.
#[derive(Clone, Debug)]
pub struct Overlay {
    pub polylines: Vec<Vec<Point>>,
    pub color: [u8; 3],
}

/// Basin colors shaded by iteration count, then overlays.
pub fn render_basins(desc: &NewtonMapDescriptor, frame: &Frame, res: usize, overlays: &[Overlay]) -> Result<Image> {
    if res == 0 || res > MAX_RESOLUTION {
        return Err(Error::Precondition(format!("resolution must be in 1..={MAX_RESOLUTION}, got {res}")));
    }
    let grid = basin_grid(desc, frame, res, 256);
    let mut im = Image::new(res, res);
    for (i, cell) in grid.iter().enumerate() {
        if let Some((root, steps)) = *cell {
            let shade = 1.0 - (steps.min(48) as f64) / 64.0;
            let c = root_color(root).map(|x| (x as f64 * shade).round() as u8);
            im.put(i % res, i / res, c);
        }
    }
    for o in overlays {
        for line in &o.polylines {
            draw_polyline(&mut im, frame, line, o.color);
        }
    }
    Ok(im)
}

fn draw_polyline(im: &mut Image, frame: &Frame, line: &[Point], color: [u8; 3]) {
    let res = im.width;
    let px = |p: &Point| p.finite().and_then(|z| frame.pixel(res, z));
    for w in line.windows(2) {
        let (Some(a), Some(b)) = (px(&w[0]), px(&w[1])) else { continue };
        let len = (b.0 - a.0).hypot(b.1 - a.1);
        // Segments far outside the frame are skipped whole.
        if len > 4.0 * res as f64 {
            continue;
        }
        let steps = (2.0 * len).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let (x, y) = (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
            if x >= 0.0 && y >= 0.0 {
                im.put(x as usize, y as usize, color);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::newton::newton_map;
    use crate::poly::ComplexPolynomial;
    use crate::tolerances::Tolerances;

    #[test]
    fn zero_resolution_is_rejected() {
        let d = newton_map(&ComplexPolynomial::from_real(&[-1.0, 0.0, 0.0, 1.0]), &Tolerances::default()).unwrap();
        assert!(matches!(render_basins(&d, &Frame::covering(&d), 0, &[]), Err(Error::Precondition(_))));
    }

    #[test]
    fn frame_pixel_inverts_sample() {
        let f = Frame { center: C64::new(0.3, -0.1), half_width: 2.0, rotation: 0.7 };
        let z = f.sample(64, 10, 20);
        let (x, y) = f.pixel(64, z).unwrap();
        assert!((x - 10.5).abs() < 1e-9 && (y - 20.5).abs() < 1e-9);
    }
}
