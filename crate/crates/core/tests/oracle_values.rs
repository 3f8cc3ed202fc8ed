//! Collapse times from rest-or-moving starts at r0 = 1, computed independently
//! in 30-digit arithmetic (mpmath quadrature of the first integral) and frozen.

use hmcf::radial::{collapse_time_quadrature, integrate_radial, RadialState, DEFAULT_TOL};

const TABLE: [(f64, f64, f64); 12] = [
    (1.0, -1.0, 0.65567954241879847),
    (1.0, -0.5, 0.87636445645369235),
    (1.0, 0.0, 1.2533141373155002),
    (1.0, 0.5, 1.9640174953579935),
    (1.0, 1.0, 3.4770518117036944),
    (1.0, 2.0, 18.100247711126151),
    (2.0, -1.0, 0.54564136076504704),
    (2.0, -0.5, 0.68270185252878754),
    (2.0, 0.0, 0.88622692545275801),
    (2.0, 0.5, 1.2040654504477558),
    (2.0, 1.0, 1.7302344337037003),
    (2.0, 2.0, 4.4390930166280657),
];

#[test]
fn quadrature_matches_reference_table() {
    for (c, r1, t0) in TABLE {
        let q = collapse_time_quadrature(1.0, r1, c, 1e-13).unwrap();
        assert!((q - t0).abs() <= 1e-10 * t0.max(1.0), "c={c} r1={r1}: {q} vs {t0}");
    }
}

#[test]
fn ode_event_matches_reference_table() {
    for (c, r1, t0) in TABLE {
        let tr = integrate_radial(RadialState::new(1.0, r1, c), 2.0 * t0, DEFAULT_TOL).unwrap();
        let t = tr.collapse_time().unwrap();
        assert!((t - t0).abs() <= 1e-6 * t0.max(1.0), "c={c} r1={r1}: {t} vs {t0}");
    }
}

#[test]
fn rest_start_is_sqrt_half_pi_over_c() {
    for (c, r1, t0) in TABLE {
        if r1 == 0.0 {
            assert!((t0 - (std::f64::consts::PI / (2.0 * c)).sqrt()).abs() < 1e-15);
        }
    }
}
