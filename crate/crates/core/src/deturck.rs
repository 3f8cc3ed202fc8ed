//! Diffeomorphism system integrated alongside the plain flow:
//!
//! ```text
//! y^α_tt = g^jl (∂_jl y^α + ∂_j y^β ∂_l y^γ Γ̂^α_βγ - ∂_k y^α Γ̃^k_jl),
//! y(x, 0) = x,  y_t(x, 0) = 0,
//! ```
//!
//! with `Γ̃` the connection of the initial metric and `Γ̂` the current
//! connection read off at the moved positions `y(x)` by bilinear
//! interpolation. Parameter coordinates are `x^a = c_a Δx^a` for grid
//! coordinate `c`; `y` is stored as the periodic displacement `y - x`.
//! Non-evolved (ghost) points keep the identity map.

use crate::error::{HmcfError, Result};
use crate::flow::{Dynamics, FlowState, Stepper};
use crate::geometry::{Christoffel, GeometryCache};
use crate::grid::{Boundary, Grid, Mat2, Vec3};
use rayon::prelude::*;

#[derive(Clone, Debug)]
pub struct DeTurckState {
    /// `y - x` per point, in parameter units (components beyond the
    /// parameter dimension are zero).
    pub displacement: Vec<Vec3>,
    pub y_t: Vec<Vec3>,
    prev: Option<Vec<Vec3>>,
    accel: Vec<Vec3>,
    dt_current: f64,
    pub background_christoffel: Vec<Christoffel>,
}

impl DeTurckState {
    /// Identity map at rest with `Γ̃` taken from `cache`.
    pub fn identity(grid: &Grid, cache: &GeometryCache) -> Result<Self> {
        let zero = vec![Vec3::zeros(); grid.len()];
        let mut ds = DeTurckState {
            displacement: zero.clone(),
            y_t: zero,
            prev: None,
            accel: Vec::new(),
            dt_current: 0.0,
            background_christoffel: cache.christoffel.clone(),
        };
        ds.accel = deturck_rhs(grid, &ds, cache)?;
        Ok(ds)
    }

    /// `y^a` at one grid point.
    pub fn y(&self, grid: &Grid, p: usize) -> [f64; 2] {
        let c = grid.coords(p);
        let mut y = [0.0; 2];
        for (a, ya) in y.iter_mut().enumerate().take(grid.dim()) {
            *ya = c[a] as f64 * grid.spacing(a) + self.displacement[p][a];
        }
        y
    }

    /// `max |y - x|`.
    pub fn identity_deviation(&self) -> f64 {
        self.displacement.iter().map(|d| d.amax()).fold(0.0, f64::max)
    }
}

/// Bilinear interpolation of a Christoffel field at parameter position `y`.
/// Periodic axes wrap; padded axes clamp to the grid.
pub fn interpolate_christoffel(grid: &Grid, field: &[Christoffel], y: [f64; 2]) -> Christoffel {
    let dim = grid.dim();
    let shape = grid.shape();
    let mut base = [[0usize; 2]; 2];
    let mut weight = [[1.0, 0.0]; 2];
    for a in 0..dim {
        let n = shape[a];
        let s = y[a] / grid.spacing(a);
        let (i0, i1, f) = if matches!(grid.axis(a).boundary, Boundary::Periodic { .. }) {
            let fl = s.floor();
            let i0 = (fl as i64).rem_euclid(n as i64) as usize;
            (i0, (i0 + 1) % n, s - fl)
        } else {
            let s = s.clamp(0.0, (n - 1) as f64);
            let i0 = (s.floor() as usize).min(n - 2);
            (i0, i0 + 1, s - i0 as f64)
        };
        base[a] = [i0, i1];
        weight[a] = [1.0 - f, f];
    }
    let mut out = [Mat2::zeros(); 2];
    let corners = if dim == 1 { 2 } else { 4 };
    for corner in 0..corners {
        let bits = [corner & 1, (corner >> 1) & 1];
        let mut c = [0usize; 2];
        let mut w = 1.0;
        for a in 0..dim {
            c[a] = base[a][bits[a]];
            w *= weight[a][bits[a]];
        }
        if w == 0.0 {
            continue;
        }
        let g = &field[grid.index(c)];
        for k in 0..2 {
            out[k] += g[k] * w;
        }
    }
    out
}

/// Accelerations of the diffeomorphism system; `DiffeoDegenerate` where
/// the Jacobian `∂y/∂x` has non-positive determinant.
pub fn deturck_rhs(grid: &Grid, ds: &DeTurckState, cache: &GeometryCache) -> Result<Vec<Vec3>> {
    let dim = grid.dim();
    (0..grid.len())
        .into_par_iter()
        .map(|p| {
            if !grid.is_evolved(p) {
                return Ok(Vec3::zeros());
            }
            let d = &ds.displacement;
            // jac[(α, j)] = ∂_j y^α
            let mut jac = Mat2::identity();
            for j in 0..dim {
                let dj = grid.diff(d, p, j);
                for alpha in 0..dim {
                    jac[(alpha, j)] += dj[alpha];
                }
            }
            let jacobian = if dim == 1 { jac[(0, 0)] } else { jac.determinant() };
            if !(jacobian > 0.0) {
                return Err(HmcfError::DiffeoDegenerate { index: p, jacobian });
            }
            let hat = interpolate_christoffel(grid, &cache.christoffel, ds.y(grid, p));
            let tilde = &ds.background_christoffel[p];
            let g_inv = &cache.inverse_metric[p];
            let mut acc = Vec3::zeros();
            for alpha in 0..dim {
                let mut s = 0.0;
                for j in 0..dim {
                    for l in 0..dim {
                        let mut term = grid.diff2(d, p, j, l)[alpha];
                        for beta in 0..dim {
                            for gamma in 0..dim {
                                term += jac[(beta, j)] * jac[(gamma, l)] * hat[alpha][(beta, gamma)];
                            }
                        }
                        for k in 0..dim {
                            term -= jac[(alpha, k)] * tilde[k][(j, l)];
                        }
                        s += g_inv[(j, l)] * term;
                    }
                }
                acc[alpha] = s;
            }
            Ok(acc)
        })
        .collect()
}

/// Advances the flow and the diffeomorphism system together with the flow's step.
pub fn deturck_step<D: Dynamics>(
    stepper: &Stepper<'_, D>,
    fs: &FlowState,
    ds: &DeTurckState,
) -> Result<(FlowState, DeTurckState)> {
    let dt = stepper.next_dt(fs)?;
    deturck_step_with(stepper, fs, ds, dt)
}

pub fn deturck_step_with<D: Dynamics>(
    stepper: &Stepper<'_, D>,
    fs: &FlowState,
    ds: &DeTurckState,
    dt: f64,
) -> Result<(FlowState, DeTurckState)> {
    let next_fs = stepper.step_with(fs, dt)?;
    let grid = fs.immersion.grid();
    let d = &ds.displacement;
    let mut next: Vec<Vec3> = d.clone();
    for p in 0..d.len() {
        if !grid.is_evolved(p) {
            continue;
        }
        next[p] = match &ds.prev {
            None => d[p] + ds.y_t[p] * dt + ds.accel[p] * (0.5 * dt * dt),
            Some(prev) => {
                d[p] + (d[p] - prev[p]) * (dt / ds.dt_current) + ds.accel[p] * (0.5 * dt * (dt + ds.dt_current))
            }
        };
    }
    let mut out = DeTurckState {
        displacement: next,
        y_t: Vec::new(),
        prev: Some(d.clone()),
        accel: Vec::new(),
        dt_current: dt,
        background_christoffel: ds.background_christoffel.clone(),
    };
    out.accel = deturck_rhs(grid, &out, &next_fs.cache)?;
    out.y_t = (0..d.len())
        .map(|p| (out.displacement[p] - d[p]) / dt + out.accel[p] * (0.5 * dt))
        .collect();
    Ok((next_fs, out))
}
