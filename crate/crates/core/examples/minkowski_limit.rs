//! Extremal surfaces in Minkowski space with velocity ε·X₁ against the flow.
//! The right-hand sides differ at order ε²; so do the trajectories on a
//! flat band.

use hmcf::geometry::build_cache;
use hmcf::minkowski::{limit_scaling, rhs_scaling};
use hmcf::{Shape, Vec3};
use std::f64::consts::TAU;

fn main() -> hmcf::Result<()> {
    let circle = Shape::Circle { r: 1.0 };
    let im = circle.immersion(128)?;
    let profile = circle.radial_velocity(128, 1.0)?;
    let rhs = rhs_scaling(&im, &build_cache(&im)?, &profile, &[0.1, 0.05, 0.025])?;
    println!("rhs discrepancy {:?}, exponent {:.3}", rhs.discrepancy, rhs.exponent.unwrap_or(f64::NAN));

    let band = Shape::Flat { dim: 2, length: TAU };
    let n = 32;
    let im = band.immersion(n)?;
    let h = TAU / n as f64;
    let profile: Vec<Vec3> = im.points().iter().map(|p| Vec3::new(0.0, 0.0, p.x.sin() * p.y.cos())).collect();
    let (curves, exponent) = limit_scaling(&im, &profile, &[0.1, 0.05, 0.025], 0.5, 0.25 * h)?;
    for c in &curves {
        println!("eps = {:<6} max |X_flow - X_extremal| = {:.3e}", c.eps, c.max_discrepancy());
    }
    println!("trajectory exponent {:.3}", exponent.unwrap_or(f64::NAN));
    Ok(())
}
