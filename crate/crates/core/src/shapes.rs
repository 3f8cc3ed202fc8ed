//! Analytic test immersions sampled on structured grids.

use crate::error::{HmcfError, Result};
use crate::grid::{Axis, Grid, Immersion, Vec3};
use std::f64::consts::TAU;

/// Ghost layers on each side of the latitude axis of a sphere band.
pub const SPHERE_BAND_GHOST: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    /// Circle of radius `r` centred at the origin, counter-clockwise.
    Circle { r: f64 },
    /// Ellipse with semi-axes `a` (x) and `b` (y).
    Ellipse { a: f64, b: f64 },
    /// Sphere of radius `r` restricted to latitudes `|α| ≤ alpha_max`,
    /// `X = r (cos α cos β, cos α sin β, sin α)`.
    SphereBand { r: f64, alpha_max: f64 },
    /// `X = (r cos α, r sin α, ρ)` with ρ periodic of period `length`.
    Cylinder { r: f64, length: f64 },
    /// Torus with centre-line radius `major` and tube radius `minor`.
    Torus { major: f64, minor: f64 },
    /// Flat line (dim 1) or plane (dim 2), periodic with period `length`.
    Flat { dim: usize, length: f64 },
}

impl Shape {
    pub fn dim(&self) -> usize {
        match self {
            Shape::Circle { .. } | Shape::Ellipse { .. } => 1,
            Shape::Flat { dim, .. } => *dim,
            _ => 2,
        }
    }

    /// Curvature coefficient `c` of the radial reduction `r_tt = -c / r`.
    pub fn radial_coefficient(&self) -> Option<f64> {
        match self {
            Shape::Circle { .. } | Shape::Cylinder { .. } => Some(1.0),
            Shape::SphereBand { .. } => Some(2.0),
            _ => None,
        }
    }

    /// The same shape with its radius replaced, for radial families.
    pub fn with_radius(&self, radius: f64) -> Self {
        match *self {
            Shape::Circle { .. } => Shape::Circle { r: radius },
            Shape::SphereBand { alpha_max, .. } => Shape::SphereBand {
                r: radius,
                alpha_max,
            },
            Shape::Cylinder { length, .. } => Shape::Cylinder { r: radius, length },
            other => other,
        }
    }

    pub fn radius(&self) -> Option<f64> {
        match *self {
            Shape::Circle { r } | Shape::SphereBand { r, .. } | Shape::Cylinder { r, .. } => Some(r),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Circle { r } => r > 0.0,
            Shape::Ellipse { a, b } => a > 0.0 && b > 0.0,
            Shape::SphereBand { r, alpha_max } => {
                r > 0.0 && alpha_max > 0.0 && alpha_max < std::f64::consts::FRAC_PI_2 * 0.9
            }
            Shape::Cylinder { r, length } => r > 0.0 && length > 0.0,
            Shape::Torus { major, minor } => minor > 0.0 && major > minor,
            Shape::Flat { dim, length } => (dim == 1 || dim == 2) && length > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(HmcfError::InvalidImmersion(format!("invalid shape parameters {self:?}")))
        }
    }

    /// Grid with `n` points per axis. For the sphere band `n` counts the
    /// ghost rows as well; the evolved rows span `[-alpha_max, alpha_max]`.
    pub fn grid(&self, n: usize) -> Result<Grid> {
        self.validate()?;
        let ring = TAU / n as f64;
        let axes = match *self {
            Shape::Circle { .. } | Shape::Ellipse { .. } => vec![Axis::periodic(n, ring)],
            Shape::SphereBand { alpha_max, .. } => {
                if n < 2 * SPHERE_BAND_GHOST + 8 {
                    return Err(HmcfError::InvalidImmersion(format!(
                        "sphere band needs at least {} latitude rows",
                        2 * SPHERE_BAND_GHOST + 8
                    )));
                }
                let d_alpha = 2.0 * alpha_max / (n - 2 * SPHERE_BAND_GHOST - 1) as f64;
                vec![
                    Axis::padded(n, d_alpha, SPHERE_BAND_GHOST),
                    Axis::periodic(n, ring),
                ]
            }
            Shape::Cylinder { length, .. } => vec![
                Axis::periodic(n, ring),
                Axis::lifted(n, length / n as f64, Vec3::new(0.0, 0.0, length)),
            ],
            Shape::Torus { .. } => vec![Axis::periodic(n, ring), Axis::periodic(n, ring)],
            Shape::Flat { dim, length } => {
                let h = length / n as f64;
                let mut axes = vec![Axis::lifted(n, h, Vec3::new(length, 0.0, 0.0))];
                if dim == 2 {
                    axes.push(Axis::lifted(n, h, Vec3::new(0.0, length, 0.0)));
                }
                axes
            }
        };
        Grid::new(axes)
    }

    /// Parameter coordinates of a grid coordinate.
    pub fn params(&self, grid: &Grid, c: [usize; 2]) -> [f64; 2] {
        match *self {
            Shape::SphereBand { alpha_max, .. } => {
                let d_alpha = grid.spacing(0);
                let alpha = -alpha_max + (c[0] as f64 - SPHERE_BAND_GHOST as f64) * d_alpha;
                [alpha, c[1] as f64 * grid.spacing(1)]
            }
            _ => {
                let u = c[0] as f64 * grid.spacing(0);
                let v = if grid.dim() == 2 {
                    c[1] as f64 * grid.spacing(1)
                } else {
                    0.0
                };
                [u, v]
            }
        }
    }

    /// Position at parameter coordinates.
    pub fn point(&self, u: [f64; 2]) -> Vec3 {
        match *self {
            Shape::Circle { r } => Vec3::new(r * u[0].cos(), r * u[0].sin(), 0.0),
            Shape::Ellipse { a, b } => Vec3::new(a * u[0].cos(), b * u[0].sin(), 0.0),
            Shape::SphereBand { r, .. } => {
                let (sa, ca) = u[0].sin_cos();
                let (sb, cb) = u[1].sin_cos();
                r * Vec3::new(ca * cb, ca * sb, sa)
            }
            Shape::Cylinder { r, .. } => Vec3::new(r * u[0].cos(), r * u[0].sin(), u[1]),
            Shape::Torus { major, minor } => {
                let rr = major + minor * u[1].cos();
                Vec3::new(rr * u[0].cos(), rr * u[0].sin(), minor * u[1].sin())
            }
            Shape::Flat { dim, .. } => {
                if dim == 1 {
                    Vec3::new(u[0], 0.0, 0.0)
                } else {
                    Vec3::new(u[0], u[1], 0.0)
                }
            }
        }
    }

    /// Unit vector along which a radial family moves (zero for other shapes).
    pub fn radial_direction(&self, u: [f64; 2]) -> Vec3 {
        match *self {
            Shape::Circle { .. } => Vec3::new(u[0].cos(), u[0].sin(), 0.0),
            Shape::SphereBand { .. } => {
                let (sa, ca) = u[0].sin_cos();
                let (sb, cb) = u[1].sin_cos();
                Vec3::new(ca * cb, ca * sb, sa)
            }
            Shape::Cylinder { .. } => Vec3::new(u[0].cos(), u[0].sin(), 0.0),
            _ => Vec3::zeros(),
        }
    }

    pub fn immersion(&self, n: usize) -> Result<Immersion> {
        let grid = self.grid(n)?;
        let g2 = grid.clone();
        Immersion::from_fn(grid, |c| self.point(self.params(&g2, c)))
    }

    /// Velocity field `speed · radial_direction` on the grid of `n` points per axis.
    pub fn radial_velocity(&self, n: usize, speed: f64) -> Result<Vec<Vec3>> {
        let grid = self.grid(n)?;
        Ok((0..grid.len())
            .map(|i| speed * self.radial_direction(self.params(&grid, grid.coords(i))))
            .collect())
    }
}
