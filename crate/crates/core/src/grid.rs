//! Structured parameter grids and the immersions that live on them.
//!
//! A grid has one axis per parameter direction (one for curves, two for
//! surfaces), stored row-major with axis 0 slowest. Every axis is either
//! periodic, optionally with a translation `lift` so that unbounded shapes
//! such as an infinite cylinder or a flat plane repeat as
//! `X(x + L) = X(x) + lift`, or padded: a finite interval whose outermost
//! `ghost` layers on each side carry prescribed data and are never evolved.
//!
//! All derivatives are second-order finite differences. Padded axes fall
//! back to one-sided second-order stencils at the two array ends.

use crate::error::{HmcfError, Result};
use std::ops::{Add, Mul};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat2 = nalgebra::Matrix2<f64>;

/// Minimum number of points per axis.
pub const MIN_AXIS_LEN: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub enum Boundary {
    Periodic { lift: Vec3 },
    Padded { ghost: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub len: usize,
    pub spacing: f64,
    pub boundary: Boundary,
}

impl Axis {
    pub fn periodic(len: usize, spacing: f64) -> Self {
        Self::lifted(len, spacing, Vec3::zeros())
    }

    pub fn lifted(len: usize, spacing: f64, lift: Vec3) -> Self {
        Axis {
            len,
            spacing,
            boundary: Boundary::Periodic { lift },
        }
    }

    pub fn padded(len: usize, spacing: f64, ghost: usize) -> Self {
        Axis {
            len,
            spacing,
            boundary: Boundary::Padded { ghost },
        }
    }

    fn ghost(&self) -> usize {
        match self.boundary {
            Boundary::Periodic { .. } => 0,
            Boundary::Padded { ghost } => ghost,
        }
    }

    fn lift(&self) -> Vec3 {
        match self.boundary {
            Boundary::Periodic { lift } => lift,
            Boundary::Padded { .. } => Vec3::zeros(),
        }
    }

    /// First-derivative weights at coordinate `i`: (coordinate, weight, wrap).
    fn d1(&self, i: usize) -> Weights {
        let h = self.spacing;
        let n = self.len;
        match self.boundary {
            Boundary::Periodic { .. } => {
                let (im, wm) = if i == 0 { (n - 1, -1) } else { (i - 1, 0) };
                let (ip, wp) = if i == n - 1 { (0, 1) } else { (i + 1, 0) };
                Weights::from(&[(im, -0.5 / h, wm), (ip, 0.5 / h, wp)])
            }
            Boundary::Padded { .. } => {
                if i == 0 {
                    Weights::from(&[(0, -1.5 / h, 0), (1, 2.0 / h, 0), (2, -0.5 / h, 0)])
                } else if i == n - 1 {
                    Weights::from(&[
                        (n - 1, 1.5 / h, 0),
                        (n - 2, -2.0 / h, 0),
                        (n - 3, 0.5 / h, 0),
                    ])
                } else {
                    Weights::from(&[(i - 1, -0.5 / h, 0), (i + 1, 0.5 / h, 0)])
                }
            }
        }
    }

    /// Second-derivative weights at coordinate `i`.
    fn d2(&self, i: usize) -> Weights {
        let h2 = self.spacing * self.spacing;
        let n = self.len;
        match self.boundary {
            Boundary::Periodic { .. } => {
                let (im, wm) = if i == 0 { (n - 1, -1) } else { (i - 1, 0) };
                let (ip, wp) = if i == n - 1 { (0, 1) } else { (i + 1, 0) };
                Weights::from(&[(im, 1.0 / h2, wm), (i, -2.0 / h2, 0), (ip, 1.0 / h2, wp)])
            }
            Boundary::Padded { .. } => {
                if i == 0 {
                    Weights::from(&[
                        (0, 2.0 / h2, 0),
                        (1, -5.0 / h2, 0),
                        (2, 4.0 / h2, 0),
                        (3, -1.0 / h2, 0),
                    ])
                } else if i == n - 1 {
                    Weights::from(&[
                        (n - 1, 2.0 / h2, 0),
                        (n - 2, -5.0 / h2, 0),
                        (n - 3, 4.0 / h2, 0),
                        (n - 4, -1.0 / h2, 0),
                    ])
                } else {
                    Weights::from(&[(i - 1, 1.0 / h2, 0), (i, -2.0 / h2, 0), (i + 1, 1.0 / h2, 0)])
                }
            }
        }
    }
}

#[derive(Clone, Copy)]
struct Weights {
    n: usize,
    e: [(usize, f64, i32); 4],
}

impl Weights {
    fn from(entries: &[(usize, f64, i32)]) -> Self {
        let mut e = [(0, 0.0, 0); 4];
        e[..entries.len()].copy_from_slice(entries);
        Weights {
            n: entries.len(),
            e,
        }
    }

    fn iter(&self) -> impl Iterator<Item = &(usize, f64, i32)> {
        self.e[..self.n].iter()
    }
}

/// Values that finite-difference stencils can be applied to.
pub trait FieldValue: Copy + Add<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
}

impl FieldValue for f64 {
    fn zero() -> Self {
        0.0
    }
}

impl FieldValue for Vec3 {
    fn zero() -> Self {
        Vec3::zeros()
    }
}

impl FieldValue for Mat2 {
    fn zero() -> Self {
        Mat2::zeros()
    }
}

/// A linear stencil: flat indices, weights and per-axis wrap counts.
#[derive(Clone, Debug)]
pub struct Stencil {
    taps: Vec<(usize, f64, [i32; 2])>,
}

impl Stencil {
    pub fn apply<T: FieldValue>(&self, field: &[T]) -> T {
        self.taps
            .iter()
            .fold(T::zero(), |acc, &(idx, w, _)| acc + field[idx] * w)
    }

    fn apply_points(&self, points: &[Vec3], lifts: &[Vec3; 2]) -> Vec3 {
        self.taps.iter().fold(Vec3::zeros(), |acc, &(idx, w, wrap)| {
            acc + (points[idx] + lifts[0] * f64::from(wrap[0]) + lifts[1] * f64::from(wrap[1])) * w
        })
    }
}

/// Shape, spacing and boundary treatment of a one- or two-dimensional grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(HmcfError::InvalidImmersion(format!(
                "grid must have 1 or 2 axes, got {}",
                axes.len()
            )));
        }
        for (a, axis) in axes.iter().enumerate() {
            if axis.len < MIN_AXIS_LEN {
                return Err(HmcfError::InvalidImmersion(format!(
                    "axis {a} has {} points, need at least {MIN_AXIS_LEN}",
                    axis.len
                )));
            }
            if !(axis.spacing.is_finite() && axis.spacing > 0.0) {
                return Err(HmcfError::InvalidImmersion(format!(
                    "axis {a} spacing must be positive and finite"
                )));
            }
            if let Boundary::Padded { ghost } = axis.boundary {
                if 2 * ghost + 2 > axis.len {
                    return Err(HmcfError::InvalidImmersion(format!(
                        "axis {a}: {ghost} ghost layers leave no interior"
                    )));
                }
            }
        }
        Ok(Grid { axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, a: usize) -> &Axis {
        &self.axes[a]
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, a: usize) -> f64 {
        self.axes[a].spacing
    }

    /// Parameter-space volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing).product()
    }

    /// True when every axis is periodic without a lift (a closed curve or torus).
    pub fn is_closed(&self) -> bool {
        self.axes.iter().all(|a| match a.boundary {
            Boundary::Periodic { lift } => lift == Vec3::zeros(),
            Boundary::Padded { .. } => false,
        })
    }

    pub fn has_padding(&self) -> bool {
        self.axes.iter().any(|a| a.ghost() > 0)
    }

    pub fn lifts(&self) -> [Vec3; 2] {
        let mut out = [Vec3::zeros(); 2];
        for (a, axis) in self.axes.iter().enumerate() {
            out[a] = axis.lift();
        }
        out
    }

    pub fn coords(&self, idx: usize) -> [usize; 2] {
        if self.axes.len() == 1 {
            [idx, 0]
        } else {
            let n1 = self.axes[1].len;
            [idx / n1, idx % n1]
        }
    }

    pub fn index(&self, c: [usize; 2]) -> usize {
        if self.axes.len() == 1 {
            c[0]
        } else {
            c[0] * self.axes[1].len + c[1]
        }
    }

    /// Whether `idx` lies at least `margin` layers inside the non-ghost region.
    pub fn in_core(&self, idx: usize, margin: usize) -> bool {
        let c = self.coords(idx);
        self.axes.iter().enumerate().all(|(a, axis)| match axis.boundary {
            Boundary::Periodic { .. } => true,
            Boundary::Padded { ghost } => {
                c[a] >= ghost + margin && c[a] + ghost + margin < axis.len
            }
        })
    }

    /// Points that are evolved by the integrators (ghost layers excluded).
    pub fn is_evolved(&self, idx: usize) -> bool {
        self.in_core(idx, 0)
    }

    /// Flat indices at least `margin` layers inside the non-ghost region.
    pub fn core_indices(&self, margin: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.in_core(i, margin)).collect()
    }

    fn along(&self, idx: usize, axis: usize, w: Weights) -> Stencil {
        let c = self.coords(idx);
        let taps = w
            .iter()
            .map(|&(k, wt, wrap)| {
                let mut cc = c;
                cc[axis] = k;
                let mut wraps = [0; 2];
                wraps[axis] = wrap;
                (self.index(cc), wt, wraps)
            })
            .collect();
        Stencil { taps }
    }

    pub fn d1(&self, idx: usize, axis: usize) -> Stencil {
        let c = self.coords(idx);
        self.along(idx, axis, self.axes[axis].d1(c[axis]))
    }

    pub fn d2(&self, idx: usize, axis: usize) -> Stencil {
        let c = self.coords(idx);
        self.along(idx, axis, self.axes[axis].d2(c[axis]))
    }

    /// Mixed second derivative along axes 0 and 1 (surfaces only).
    pub fn d12(&self, idx: usize) -> Stencil {
        let c = self.coords(idx);
        let w0 = self.axes[0].d1(c[0]);
        let w1 = self.axes[1].d1(c[1]);
        let mut taps = Vec::with_capacity(w0.n * w1.n);
        for &(k0, a0, r0) in w0.iter() {
            for &(k1, a1, r1) in w1.iter() {
                taps.push((self.index([k0, k1]), a0 * a1, [r0, r1]));
            }
        }
        Stencil { taps }
    }

    /// Second derivative along `(a, b)`, dispatching to the pure or mixed stencil.
    pub fn d2ab(&self, idx: usize, a: usize, b: usize) -> Stencil {
        if a == b {
            self.d2(idx, a)
        } else {
            self.d12(idx)
        }
    }

    /// First derivative of a periodic field (no lift) along `axis`.
    pub fn diff<T: FieldValue>(&self, field: &[T], idx: usize, axis: usize) -> T {
        self.d1(idx, axis).apply(field)
    }

    /// Second derivative of a periodic field (no lift) along `(a, b)`.
    pub fn diff2<T: FieldValue>(&self, field: &[T], idx: usize, a: usize, b: usize) -> T {
        self.d2ab(idx, a, b).apply(field)
    }
}

/// Position vectors `X(x)` on a structured grid, curves in the xy-plane
/// (z = 0) and surfaces in R³.
#[derive(Clone, Debug, PartialEq)]
pub struct Immersion {
    grid: Grid,
    points: Vec<Vec3>,
}

impl Immersion {
    pub fn new(grid: Grid, points: Vec<Vec3>) -> Result<Self> {
        if points.len() != grid.len() {
            return Err(HmcfError::InvalidImmersion(format!(
                "expected {} points for shape {:?}, got {}",
                grid.len(),
                grid.shape(),
                points.len()
            )));
        }
        if let Some(index) = points.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(HmcfError::NonFiniteField {
                field: "points",
                index,
            });
        }
        if grid.dim() == 1 {
            if let Some(i) = points.iter().position(|p| p.z != 0.0) {
                return Err(HmcfError::InvalidImmersion(format!(
                    "curve point {i} leaves the xy-plane"
                )));
            }
        }
        Ok(Immersion { grid, points })
    }

    /// Builds an immersion by sampling `f` at every grid coordinate.
    pub fn from_fn(grid: Grid, f: impl Fn([usize; 2]) -> Vec3) -> Result<Self> {
        let points = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self::new(grid, points)
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Ambient dimension n + 1.
    pub fn ambient_dim(&self) -> usize {
        self.grid.dim() + 1
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn with_points(&self, points: Vec<Vec3>) -> Result<Self> {
        Self::new(self.grid.clone(), points)
    }

    /// Tangent `∂X/∂x^axis`, lift-aware.
    pub fn tangent(&self, idx: usize, axis: usize) -> Vec3 {
        self.grid
            .d1(idx, axis)
            .apply_points(&self.points, &self.grid.lifts())
    }

    /// Second derivative `∂²X/∂x^a∂x^b`, lift-aware.
    pub fn second(&self, idx: usize, a: usize, b: usize) -> Vec3 {
        self.grid
            .d2ab(idx, a, b)
            .apply_points(&self.points, &self.grid.lifts())
    }

    /// Arithmetic mean of the evolved points.
    pub fn centroid(&self) -> Vec3 {
        let mut sum = Vec3::zeros();
        let mut count = 0usize;
        for (i, p) in self.points.iter().enumerate() {
            if self.grid.is_evolved(i) {
                sum += p;
                count += 1;
            }
        }
        sum / count as f64
    }

    /// Applies a rigid motion `x -> R x + b` (lifts are rotated too).
    pub fn transformed(&self, rotation: &nalgebra::Matrix3<f64>, shift: Vec3) -> Result<Self> {
        let axes = self
            .grid
            .axes()
            .iter()
            .map(|a| match a.boundary {
                Boundary::Periodic { lift } => Axis::lifted(a.len, a.spacing, rotation * lift),
                Boundary::Padded { .. } => a.clone(),
            })
            .collect();
        let points = self.points.iter().map(|p| rotation * p + shift).collect();
        Ok(Immersion {
            grid: Grid::new(axes)?,
            points,
        })
    }
}

/// Max-norm of a scalar field over `indices`, summed in index order.
pub fn max_norm(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}
