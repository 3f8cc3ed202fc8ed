//! Collapse times of the radial reduction `r_tt = -c/r` from ODE and quadrature.

use hmcf::radial::{classify_radial_phase, collapse_time_quadrature, integrate_radial, RadialState, DEFAULT_TOL};

fn main() -> hmcf::Result<()> {
    println!("{:>3} {:>5} {:>16} {:>16}  phase", "c", "r1", "t0 (ode)", "t0 (quadrature)");
    for c in [1.0, 2.0] {
        for r1 in [-1.0, 0.0, 0.5, 1.0] {
            let tr = integrate_radial(RadialState::new(1.0, r1, c), 60.0, DEFAULT_TOL)?;
            let ode = tr.collapse_time().unwrap_or(f64::NAN);
            let quad = collapse_time_quadrature(1.0, r1, c, 1e-13)?;
            println!("{c:>3} {r1:>5} {ode:>16.10} {quad:>16.10}  {:?}", classify_radial_phase(1.0, r1, c));
        }
    }
    Ok(())
}
