//! Writes a torus to the plain-text mesh format and reads it back.

use hmcf::io::{read_mesh, write_mesh};
use hmcf::Shape;

fn main() -> hmcf::Result<()> {
    let im = Shape::Torus { major: 2.0, minor: 0.7 }.immersion(8)?;
    let mut buf = Vec::new();
    write_mesh(&mut buf, &im)?;
    let text = String::from_utf8(buf).expect("ascii");
    for line in text.lines().take(4) {
        println!("{line}");
    }
    println!("... {} lines", text.lines().count());
    let back = read_mesh(&text)?.into_immersion(im.grid().clone())?;
    println!("bitwise equal after round trip: {}", back.points() == im.points());
    Ok(())
}
