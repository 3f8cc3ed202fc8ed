//! Numerical laboratory for the hyperbolic mean curvature flow `X_tt = H n`
//! of curves in the plane and surfaces in space.

pub mod config;
pub mod deturck;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod identities;
pub mod io;
pub mod minkowski;
pub mod radial;
pub mod shapes;
pub mod stability;

pub use error::{HmcfError, Result};
pub use grid::{Axis, Boundary, Grid, Immersion, Mat2, Vec3};
pub use shapes::Shape;
