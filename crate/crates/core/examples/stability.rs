//! Small graph perturbations of the flat plane: deviation from the linear
//! wave against ε, over a short horizon.

use hmcf::stability::{epsilon_scaling, Profile, ScalingSetup, Verdict};

fn main() -> hmcf::Result<()> {
    let setup = ScalingSetup::new(2, 32, Profile::SineMixed { mode: 1 }, Profile::Zero, 1.0);
    let report = epsilon_scaling(&setup, &[0.4, 0.2, 0.02, 0.01, 0.005])?;
    for run in &report.runs {
        let dev = match run.verdict {
            Verdict::Regular => format!("{:.3e}", run.max_deviation()),
            _ => "-".into(),
        };
        println!("eps = {:<6} {:<9} max deviation {dev}", run.epsilon, run.verdict.name());
    }
    println!("exponent {:.3}, empirical eps0 {:?}", report.exponent.unwrap_or(f64::NAN), report.eps0);
    Ok(())
}
