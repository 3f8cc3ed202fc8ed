//! Tracks the DeTurck diffeomorphism alongside the flow. On a circle it
//! stays the identity; on an ellipse it moves.

use hmcf::deturck::{deturck_step, DeTurckState};
use hmcf::flow::{FlowConfig, Hmcf, Stepper};
use hmcf::{Shape, Vec3};

fn main() -> hmcf::Result<()> {
    for shape in [Shape::Circle { r: 1.0 }, Shape::Ellipse { a: 1.2, b: 0.8 }] {
        let stepper = Stepper::new(Hmcf, FlowConfig::default());
        let im = shape.immersion(64)?;
        let mut fs = stepper.init(im.clone(), vec![Vec3::zeros(); im.len()])?;
        let mut ds = DeTurckState::identity(im.grid(), &fs.cache)?;
        while fs.t < 0.6 {
            (fs, ds) = deturck_step(&stepper, &fs, &ds)?;
        }
        println!("{shape:?}: t = {:.3}, max |y - id| = {:.3e}", fs.t, ds.identity_deviation());
    }
    Ok(())
}
