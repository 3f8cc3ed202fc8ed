use hmcf::fit::fit_exponent;
use hmcf::flow::{FlowConfig, Hmcf, Stepper};
use hmcf::geometry::{build_cache, compute_metric};
use hmcf::io::{format_number, read_mesh, write_mesh, ROUND_TRIP_DIGITS};
use hmcf::radial::{apex_radius, integrate_radial, RadialState, DEFAULT_TOL};
use hmcf::stability::{graph_domain, graph_immersion, graph_metric};
use hmcf::{Shape, Vec3};
use nalgebra::{Matrix3, Rotation3, Unit};
use proptest::prelude::*;

fn shapes() -> impl Strategy<Value = Shape> {
    prop_oneof![
        (0.5..2.0f64).prop_map(|r| Shape::Circle { r }),
        (0.6..1.5f64, 0.6..1.5f64).prop_map(|(a, b)| Shape::Ellipse { a, b }),
        (0.5..2.0f64).prop_map(|r| Shape::Cylinder { r, length: 2.0 }),
        (1.5..2.5f64, 0.3..0.9f64).prop_map(|(major, minor)| Shape::Torus { major, minor }),
    ]
}

/// Rotation about z for curves, about a random axis for surfaces.
fn rotation(shape: &Shape, axis: [f64; 3], angle: f64) -> Matrix3<f64> {
    let axis = if shape.dim() == 1 {
        Vec3::z()
    } else {
        Vec3::new(axis[0], axis[1], axis[2] + 0.1)
    };
    Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle).into_inner()
}

fn shift(shape: &Shape, s: [f64; 3]) -> Vec3 {
    if shape.dim() == 1 {
        Vec3::new(s[0], s[1], 0.0)
    } else {
        Vec3::new(s[0], s[1], s[2])
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 24,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn collapse_time_scales_linearly_with_radius(r0 in 0.2..5.0f64, lambda in 0.2..5.0f64, c in prop_oneof![Just(1.0), Just(2.0)]) {
        let t = |r: f64| integrate_radial(RadialState::new(r, 0.0, c), 100.0, DEFAULT_TOL).unwrap().collapse_time().unwrap();
        let (t1, t2) = (t(r0), t(lambda * r0));
        prop_assert!((t2 - lambda * t1).abs() <= 1e-6 * t2.max(1.0));
    }

    #[test]
    fn first_integral_is_conserved(r1 in -2.0..2.0f64, c in prop_oneof![Just(1.0), Just(2.0)]) {
        let tr = integrate_radial(RadialState::new(1.0, r1, c), 30.0, DEFAULT_TOL).unwrap();
        prop_assert!(tr.max_drift <= 10.0 * DEFAULT_TOL, "drift {}", tr.max_drift);
    }

    #[test]
    fn outward_start_peaks_at_apex_radius(r1 in 0.05..2.0f64, c in prop_oneof![Just(1.0), Just(2.0)]) {
        let tr = integrate_radial(RadialState::new(1.0, r1, c), 40.0, DEFAULT_TOL).unwrap();
        prop_assert_eq!(tr.velocity_sign_changes(), 1);
        let bound = apex_radius(1.0, r1, c);
        prop_assert!((bound - (r1 * r1 / (2.0 * c)).exp()).abs() <= 1e-14 * bound);
        prop_assert!(tr.max_radius() <= bound * (1.0 + 1e-9));
        prop_assert!(tr.max_radius() >= bound * (1.0 - 1e-3));
    }

    #[test]
    fn curvature_is_invariant_under_rigid_motions(
        shape in shapes(),
        axis in prop::array::uniform3(-1.0..1.0f64),
        angle in 0.0..std::f64::consts::TAU,
        s in prop::array::uniform3(-3.0..3.0f64),
    ) {
        let im = shape.immersion(32).unwrap();
        let moved = im.transformed(&rotation(&shape, axis, angle), shift(&shape, s)).unwrap();
        let (a, b) = (build_cache(&im).unwrap(), build_cache(&moved).unwrap());
        for i in 0..im.len() {
            prop_assert!(rel(b.mean_curvature[i], a.mean_curvature[i]) <= 1e-10);
            prop_assert!(rel(b.norm_a_sq[i], a.norm_a_sq[i]) <= 1e-10);
            prop_assert!(rel(b.det_metric(i), a.det_metric(i)) <= 1e-10);
        }
    }

    #[test]
    fn one_step_commutes_with_rotation(
        shape in shapes(),
        axis in prop::array::uniform3(-1.0..1.0f64),
        angle in 0.0..std::f64::consts::TAU,
    ) {
        let q = rotation(&shape, axis, angle);
        let stepper = Stepper::new(Hmcf, FlowConfig::default());
        let im = shape.immersion(32).unwrap();
        let rotated = im.transformed(&q, Vec3::zeros()).unwrap();
        let rest = vec![Vec3::zeros(); im.len()];
        let a = stepper.init(im, rest.clone()).unwrap();
        let b = stepper.init(rotated, rest).unwrap();
        let dt = stepper.next_dt(&a).unwrap();
        let (a, b) = (stepper.step_with(&a, dt).unwrap(), stepper.step_with(&b, dt).unwrap());
        for (p, r) in a.immersion.points().iter().zip(b.immersion.points()) {
            prop_assert!((q * p - r).norm() <= 1e-12);
        }
    }

    #[test]
    fn graph_metric_matches_general_metric(
        dim in 1usize..=2,
        coeffs in prop::array::uniform6(-0.3..0.3f64),
    ) {
        let grid = graph_domain(dim, 16, std::f64::consts::TAU).unwrap();
        let y: Vec<Vec3> = (0..grid.len())
            .map(|i| {
                let c = grid.coords(i);
                let (x, z) = (c[0] as f64 * grid.spacing(0), c[1] as f64 * grid.spacing(dim - 1));
                Vec3::new(
                    coeffs[0] * x.sin() + coeffs[1] * z.cos(),
                    coeffs[2] * (x + z).cos(),
                    if dim == 1 { 0.0 } else { coeffs[3] * (2.0 * x).sin() + coeffs[4] * z.sin() + coeffs[5] },
                )
            })
            .collect();
        let general = compute_metric(&graph_immersion(&grid, &y).unwrap()).unwrap();
        for (a, b) in general.iter().zip(graph_metric(&grid, &y)) {
            prop_assert!((a - b).amax() <= 1e-12 * b.amax());
        }
    }

    #[test]
    fn mesh_round_trip_is_bitwise(shape in shapes(), n in 8usize..40) {
        let im = shape.immersion(n).unwrap();
        let mut buf = Vec::new();
        write_mesh(&mut buf, &im).unwrap();
        let back = read_mesh(std::str::from_utf8(&buf).unwrap()).unwrap().into_immersion(im.grid().clone()).unwrap();
        for (a, b) in im.points().iter().zip(back.points()) {
            for k in 0..3 {
                prop_assert_eq!(a[k].to_bits(), b[k].to_bits());
            }
        }
    }

    #[test]
    fn numbers_round_trip(v in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        let back: f64 = format_number(v, ROUND_TRIP_DIGITS).parse().unwrap();
        prop_assert_eq!(back.to_bits(), v.to_bits());
    }

    #[test]
    fn fit_recovers_power_laws(p in 0.5..4.0f64, a in 1e-3..1e3f64) {
        let xs = [0.1, 0.05, 0.025, 0.0125];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| a * x.powf(p)).collect();
        let e = fit_exponent(&xs, &ys).unwrap();
        prop_assert!((e - p).abs() <= 1e-10);
    }
}
