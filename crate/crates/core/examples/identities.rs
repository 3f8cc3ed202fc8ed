//! Residuals of the Simons and evolution identities on an exact shrinking
//! sphere, under grid refinement.

use hmcf::identities::{convergence_reports, radial_family_triple, ResidualContext};
use hmcf::radial::{integrate_radial, RadialState, DEFAULT_TOL};
use hmcf::Shape;

fn main() -> hmcf::Result<()> {
    let shape = Shape::SphereBand { r: 1.0, alpha_max: std::f64::consts::FRAC_PI_4 };
    let tr = integrate_radial(RadialState::new(1.0, 0.0, 2.0), 2.0, DEFAULT_TOL)?;
    let levels = [32usize, 64, 128]
        .iter()
        .map(|&n| Ok((n, radial_family_triple(shape, n, &tr, 0.4, 0.25 * std::f64::consts::TAU / n as f64)?)))
        .collect::<hmcf::Result<Vec<_>>>()?;
    for rep in convergence_reports(ResidualContext::AnalyticSphere, &levels, 1.0)? {
        let norms: Vec<String> = rep.residual_norms.iter().map(|r| format!("{r:.2e}")).collect();
        let status = if rep.exact_to_roundoff {
            "exact to roundoff".to_string()
        } else {
            format!("orders {:?}", rep.estimated_orders.iter().map(|o| (o * 100.0).round() / 100.0).collect::<Vec<_>>())
        };
        println!("{:<26} {}  {status}", rep.identity.name(), norms.join(" "));
    }
    Ok(())
}
