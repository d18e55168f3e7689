use newton_atlas::basin::winding_number;
use newton_atlas::fsi::{hermite_vanishing, HermiteNode};
use newton_atlas::orbits::{classify, OrbitClass};
use newton_atlas::render::Frame;
use newton_atlas::renorm::{count_components, mask_distance};
use newton_atlas::sphere::chordal;
use newton_atlas::*;
use proptest::prelude::*;

fn c64() -> impl Strategy<Value = C64> {
    (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(re, im)| C64::new(re, im))
}

fn point() -> impl Strategy<Value = Point> {
    prop_oneof![9 => c64().prop_map(Point::Finite), 1 => Just(Point::Infinity)]
}

/// `n` roots pairwise at least `sep` apart.
fn separated(n: usize, sep: f64) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec(c64(), n).prop_filter("roots too close", move |v| {
        (0..v.len()).all(|i| (i + 1..v.len()).all(|j| (v[i] - v[j]).norm() > sep))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chordal_is_a_metric(a in point(), b in point(), c in point()) {
        let (ab, bc, ac) = (chordal(a, b), chordal(b, c), chordal(a, c));
        prop_assert!((ab - chordal(b, a)).abs() < 1e-15);
        prop_assert!(ab <= 2.0 + 1e-15);
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert!(chordal(a, a) < 1e-15);
    }

    #[test]
    fn sphere_embedding_round_trips(a in point()) {
        prop_assert!(chordal(Point::from_sphere(a.to_sphere()), a) < 1e-12);
    }

    #[test]
    fn polynomial_text_round_trips(cs in prop::collection::vec(c64(), 1..7)) {
        let p = ComplexPolynomial::new(cs);
        let q = ComplexPolynomial::parse(&p.to_text()).unwrap();
        prop_assert_eq!(p, q);
    }

    #[test]
    fn fixed_point_multipliers_follow_multiplicity(
        roots in separated(3, 0.5),
        mult in prop::collection::vec(1usize..=3, 3),
    ) {
        let tol = Tolerances::default();
        let all: Vec<C64> = roots.iter().zip(&mult).flat_map(|(&z, &m)| std::iter::repeat_n(z, m)).collect();
        let p = ComplexPolynomial::from_roots(&all);
        let d = newton_map(&p, &tol).unwrap();
        prop_assert_eq!(d.roots.len(), 3);
        for r in &d.roots {
            let m = r.multiplicity as f64;
            let mu = d.multiplier_at_fixed_point(Point::Finite(r.position), &tol).unwrap();
            prop_assert!((mu - (m - 1.0) / m).norm() < 1e-9, "multiplicity {} gives {}", m, mu);
        }
        let n = all.len() as f64;
        let mu = d.multiplier_at_fixed_point(Point::Infinity, &tol).unwrap();
        prop_assert!((mu - n / (n - 1.0)).norm() < 1e-9 * n);
    }

    #[test]
    fn newton_maps_pass_head_check(roots in separated(4, 0.3)) {
        let tol = Tolerances::default();
        let d = newton_map(&ComplexPolynomial::from_roots(&roots), &tol).unwrap();
        let h = head_check(&d.map, &tol).unwrap();
        prop_assert!(h.is_newton);
        prop_assert_eq!(h.witnesses.len(), 4);
    }

    #[test]
    fn hermite_interpolant_meets_its_data(zs in separated(3, 0.1), slopes in prop::collection::vec(c64(), 3)) {
        let nodes: Vec<HermiteNode> = zs.iter().zip(&slopes).map(|(&z, &slope)| HermiteNode { z, slope }).collect();
        let q = hermite_vanishing(&nodes).unwrap();
        let dq = q.derivative();
        for n in &nodes {
            prop_assert!(q.eval(n.z).norm() < 1e-9);
            prop_assert!((dq.eval(n.z) - n.slope).norm() < 1e-8 * (1.0 + n.slope.norm()));
        }
    }

    #[test]
    fn circles_wind_once_around_their_center(c in c64(), r in 0.01..5.0f64, far in 1.5..10.0f64) {
        let pts: Vec<Point> = (0..=64)
            .map(|i| Point::Finite(c + C64::from_polar(r, std::f64::consts::TAU * i as f64 / 64.0)))
            .collect();
        prop_assert_eq!(winding_number(&pts, c), 1);
        prop_assert_eq!(winding_number(&pts, c + far * r), 0);
    }

    #[test]
    fn multipliers_classify_by_modulus(r in 0.0..3.0f64, turns in 0.0..1.0f64) {
        let tol = Tolerances::default();
        let (class, _) = classify(C64::from_polar(r, std::f64::consts::TAU * turns), &tol);
        if r < 1e-9 {
            prop_assert_eq!(class, OrbitClass::Superattracting);
        } else if r < 1.0 - tol.band {
            prop_assert_eq!(class, OrbitClass::Attracting);
        } else if r > 1.0 + tol.band {
            prop_assert_eq!(class, OrbitClass::Repelling);
        } else {
            prop_assert!(class.is_indifferent());
        }
    }

    #[test]
    fn frame_pixels_invert_samples(c in c64(), hw in 0.1..10.0f64, rot in 0.0..6.3f64, col in 0usize..256, row in 0usize..256) {
        let f = Frame { center: c, half_width: hw, rotation: rot };
        let (x, y) = f.pixel(256, f.sample(256, col, row)).unwrap();
        prop_assert!((x - col as f64 - 0.5).abs() < 1e-6 && (y - row as f64 - 0.5).abs() < 1e-6);
    }

    #[test]
    fn mask_distance_is_symmetric(a in prop::collection::vec(any::<bool>(), 64), b in prop::collection::vec(any::<bool>(), 64)) {
        prop_assert_eq!(mask_distance(&a, &a, 8), 0);
        prop_assert_eq!(mask_distance(&a, &b, 8), mask_distance(&b, &a, 8));
        prop_assert!(count_components(&a, 8) <= a.iter().filter(|&&x| x).count());
    }
}
