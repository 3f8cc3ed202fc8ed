//! Latitude band of a sphere with boundary rows driven by the radial solution.

use hmcf::flow::{FlowConfig, Hmcf, RadialBandBoundary, Stepper};
use hmcf::radial::{integrate_radial, RadialState, DEFAULT_TOL};
use hmcf::{Shape, Vec3};

fn main() -> hmcf::Result<()> {
    let shape = Shape::SphereBand { r: 1.0, alpha_max: std::f64::consts::FRAC_PI_4 };
    let trajectory = integrate_radial(RadialState::new(1.0, 0.0, 2.0), 2.0, DEFAULT_TOL)?;
    let t0 = trajectory.collapse_time().expect("sphere collapses");
    let boundary = RadialBandBoundary { shape, trajectory: trajectory.clone() };
    let stepper = Stepper::new(Hmcf, FlowConfig::default()).with_boundary(&boundary);
    let im = shape.immersion(64)?;
    let mut fs = stepper.init(im.clone(), vec![Vec3::zeros(); im.len()])?;
    let mut next_report = 0.0;
    while fs.t < 0.9 * t0 {
        let dt = stepper.next_dt(&fs)?.min(0.9 * t0 - fs.t);
        fs = stepper.step_with(&fs, dt)?;
        if fs.t >= next_report {
            let exact = trajectory.sample(fs.t).unwrap().r;
            let worst = fs.radii().iter().map(|r| (r - exact).abs() / exact).fold(0.0, f64::max);
            println!("t = {:.4}  r = {exact:.6}  max relative error {worst:.2e}", fs.t);
            next_report += 0.1;
        }
    }
    println!("oracle collapse time {t0:.10}");
    Ok(())
}
