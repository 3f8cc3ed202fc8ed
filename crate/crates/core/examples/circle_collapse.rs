//! A circle released from rest shrinks to a point at t = √(π/2).

use hmcf::flow::{FlowConfig, FlowEvent, Hmcf, Stepper};
use hmcf::{Shape, Vec3};

fn main() -> hmcf::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(256);
    let im = Shape::Circle { r: 1.0 }.immersion(n)?;
    let stepper = Stepper::new(Hmcf, FlowConfig::default());
    let fs = stepper.init(im.clone(), vec![Vec3::zeros(); im.len()])?;
    let (_, summary) = stepper.run(fs, 2.0, 100, |fs| {
        let d = fs.diagnostics();
        println!("t = {:.4}  r = {:.6}  max|H| = {:.3}", d.t, d.r_mean, d.h_max);
    })?;
    match summary.event {
        FlowEvent::Collapse { t, bracket, .. } => println!(
            "collapse at t = {t:.6} (bracket {:.6}..{:.6}), exact {:.6}",
            bracket.0,
            bracket.1,
            (std::f64::consts::PI / 2.0).sqrt()
        ),
        other => println!("no collapse: {other:?}"),
    }
    Ok(())
}
