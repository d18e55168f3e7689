use newton_atlas::io::Image;
use newton_atlas::render::{basin_grid, render_basins, Frame};
use newton_atlas::*;

fn unity() -> NewtonMapDescriptor {
    newton_map(&ComplexPolynomial::from_real(&[-1.0, 0.0, 0.0, 1.0]), &Tolerances::default()).unwrap()
}

#[test]
fn cube_roots_of_unity_basins_share_the_disk_equally() {
    let d = unity();
    let frame = Frame::covering(&d);
    let res = 256;
    let grid = basin_grid(&d, &frame, res, 256);
    let mut counts = [0usize; 3];
    for (i, cell) in grid.iter().enumerate() {
        let z = frame.sample(res, i % res, i / res) - frame.center;
        if z.norm() < frame.half_width {
            if let Some((root, _)) = cell {
                counts[*root] += 1;
            }
        }
    }
    let mean = counts.iter().sum::<usize>() as f64 / 3.0;
    for c in counts {
        assert!((c as f64 - mean).abs() < 0.01 * mean, "{counts:?}");
    }
}

#[test]
fn rotating_the_frame_by_a_third_turn_permutes_basins() {
    let d = unity();
    let base = Frame::covering(&d);
    let turned = Frame { rotation: std::f64::consts::TAU / 3.0, ..base };
    let res = 128;
    let (a, b) = (basin_grid(&d, &base, res, 256), basin_grid(&d, &turned, res, 256));
    let omega = C64::from_polar(1.0, std::f64::consts::TAU / 3.0);
    let image_of = |r: usize| d.root_near(omega * d.roots[r].position, 1e-9).unwrap();
    let agree = a.iter().zip(&b).filter(|(x, y)| x.map(|v| image_of(v.0)) == y.map(|v| v.0)).count();
    assert!(agree as f64 > 0.99 * a.len() as f64, "{agree} of {}", a.len());
}

#[test]
fn rendering_is_deterministic() {
    let d = unity();
    let f = Frame::covering(&d);
    let a: Image = render_basins(&d, &f, 64, &[]).unwrap();
    assert_eq!(a, render_basins(&d, &f, 64, &[]).unwrap());
    assert!(matches!(render_basins(&d, &f, 100_000, &[]), Err(Error::Precondition(_))));
}
