//! Explicit time stepping of `X_tt = F(X, X_t)`, by default `F = H n`.
//!
//! The scheme is the three-level central (leapfrog) update with the
//! nonuniform-step correction
//!
//! ```text
//! X^{n+1} = X^n + (dt/dt_prev)(X^n - X^{n-1}) + dt (dt + dt_prev)/2 · F^n
//! ```
//!
//! bootstrapped by `X^1 = X^0 + dt X_1 + dt²/2 F^0`. The step size is
//! recomputed from the CFL bound every step because the wave speeds grow
//! without limit as a surface collapses.

use crate::error::{HmcfError, Result};
use crate::geometry::{
    build_cache_with, laplace_beltrami_divergence, mean_curvature_vector, metric_det,
    GeometryCache, GeometryOptions, DET_FLOOR,
};
use crate::grid::{Grid, Immersion, Vec3};
use crate::radial::RadialTrajectory;
use crate::shapes::Shape;

pub const DEFAULT_CFL_SAFETY: f64 = 0.25;
pub const DEFAULT_H_MAX: f64 = 1e6;

/// Right-hand side of a second-order-in-time geometric flow.
pub trait Dynamics: Sync {
    fn acceleration(&self, im: &Immersion, velocity: &[Vec3], cache: &GeometryCache) -> Result<Vec<Vec3>>;

    /// Whether `acceleration` reads the velocity argument.
    fn uses_velocity(&self) -> bool {
        false
    }
}

/// The hyperbolic mean curvature flow `X_tt = H n`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Hmcf;

impl Dynamics for Hmcf {
    fn acceleration(&self, _im: &Immersion, _velocity: &[Vec3], cache: &GeometryCache) -> Result<Vec<Vec3>> {
        Ok(flow_rhs(cache))
    }
}

/// `H n` at every grid point.
pub fn flow_rhs(cache: &GeometryCache) -> Vec<Vec3> {
    mean_curvature_vector(cache)
}

/// Largest `|Δ_g X - H n|` over the evolved points, with `Δ_g X` taken in
/// conservative (divergence) form.
pub fn gauss_residual(im: &Immersion, cache: &GeometryCache) -> f64 {
    let lap = laplace_beltrami_divergence(im, cache);
    let hn = mean_curvature_vector(cache);
    (0..im.len())
        .filter(|&p| im.grid().is_evolved(p))
        .map(|p| (lap[p] - hn[p]).norm())
        .fold(0.0, f64::max)
}

/// Debug variant of [`flow_rhs`]: returns `Δ_g X` and fails when it differs
/// from `H n` by more than `bound_factor · Δx² · max|H|`.
pub fn flow_rhs_checked(im: &Immersion, cache: &GeometryCache, bound_factor: f64) -> Result<Vec<Vec3>> {
    let lap = laplace_beltrami_divergence(im, cache);
    let residual = gauss_residual(im, cache);
    let dx = (0..im.dim()).map(|a| im.grid().spacing(a)).fold(0.0, f64::max);
    let bound = bound_factor * dx * dx * cache.max_abs_mean_curvature(im.grid()).max(1.0) + 1e-12;
    if residual > bound {
        return Err(HmcfError::GaussMismatch { residual, bound });
    }
    Ok(lap)
}

/// `safety · min_{p, i} Δx^i / √(g^ii)` over the evolved points.
pub fn cfl_dt(grid: &Grid, cache: &GeometryCache, safety: f64) -> Result<f64> {
    let mut dt = f64::INFINITY;
    for p in 0..cache.len() {
        if !grid.is_evolved(p) {
            continue;
        }
        let det = cache.det_metric(p);
        if !(det > 0.0) {
            return Err(HmcfError::MetricDegenerate { index: p, det });
        }
        for a in 0..grid.dim() {
            let gii = cache.inverse_metric[p][(a, a)];
            dt = dt.min(grid.spacing(a) / gii.sqrt());
        }
    }
    Ok(safety * dt)
}

/// Writes prescribed positions and velocities into the non-evolved points.
pub trait BoundaryFill: Sync {
    fn fill(&self, t: f64, grid: &Grid, points: &mut [Vec3], velocity: &mut [Vec3]) -> Result<()>;
}

/// Ghost rows of a radial family (sphere band) driven by the radial oracle.
#[derive(Clone, Debug)]
pub struct RadialBandBoundary {
    pub shape: Shape,
    pub trajectory: RadialTrajectory,
}

impl BoundaryFill for RadialBandBoundary {
    fn fill(&self, t: f64, grid: &Grid, points: &mut [Vec3], velocity: &mut [Vec3]) -> Result<()> {
        let s = match self.trajectory.sample(t) {
            Some(s) => s,
            // the prescribed boundary has itself shrunk to a point
            None if self.trajectory.collapse_time().is_some_and(|t0| t >= t0) => {
                return Err(HmcfError::CollapseDetected { t, det: 0.0 })
            }
            None => return Err(HmcfError::Domain(format!("radial oracle not available at t = {t}"))),
        };
        let shape = self.shape.with_radius(s.r);
        for p in 0..points.len() {
            if grid.is_evolved(p) {
                continue;
            }
            let u = shape.params(grid, grid.coords(p));
            points[p] = shape.point(u);
            velocity[p] = shape.radial_direction(u) * s.r_t;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FlowConfig {
    pub cfl_safety: f64,
    pub det_floor: f64,
    pub h_max: f64,
    /// Overrides the CFL step when set.
    pub fixed_dt: Option<f64>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            cfl_safety: DEFAULT_CFL_SAFETY,
            det_floor: DET_FLOOR,
            h_max: DEFAULT_H_MAX,
            fixed_dt: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlowState {
    pub immersion: Immersion,
    pub velocity: Vec<Vec3>,
    /// Previous time level; `None` before the bootstrap step.
    pub prev_immersion: Option<Immersion>,
    pub t: f64,
    pub step: usize,
    pub dt_current: f64,
    /// `F(X^n, X_t^n)`.
    pub accel: Vec<Vec3>,
    pub cache: GeometryCache,
}

/// Scalar summaries of one state, as written to trajectory files.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Diagnostics {
    pub t: f64,
    /// Mean distance from the centroid, measured across periodic lift directions.
    pub r_mean: f64,
    /// `max r - min r` of the same distances.
    pub r_spread: f64,
    pub det_g_min: f64,
    pub h_max: f64,
    /// `½ ∫ |X_t|² dA`.
    pub energy: f64,
    pub area: f64,
}

impl FlowState {
    /// Distances from the centroid with periodic lift directions projected out.
    pub fn radii(&self) -> Vec<f64> {
        let im = &self.immersion;
        let grid = im.grid();
        let c = im.centroid();
        let lifts: Vec<Vec3> = grid
            .lifts()
            .iter()
            .filter(|l| l.norm() > 0.0)
            .map(|l| l.normalize())
            .collect();
        (0..im.len())
            .filter(|&p| grid.is_evolved(p))
            .map(|p| {
                let mut d = im.points()[p] - c;
                for l in &lifts {
                    d -= l * l.dot(&d);
                }
                d.norm()
            })
            .collect()
    }

    pub fn diagnostics(&self) -> Diagnostics {
        let grid = self.immersion.grid();
        let radii = self.radii();
        let r_mean = radii.iter().sum::<f64>() / radii.len() as f64;
        let r_min = radii.iter().cloned().fold(f64::INFINITY, f64::min);
        let r_max = radii.iter().cloned().fold(0.0, f64::max);
        let cell = grid.cell_volume();
        let mut energy = 0.0;
        let mut area = 0.0;
        for p in 0..self.cache.len() {
            if !grid.is_evolved(p) {
                continue;
            }
            let da = metric_det(&self.cache.metric[p], grid.dim()).max(0.0).sqrt() * cell;
            energy += 0.5 * self.velocity[p].norm_squared() * da;
            area += da;
        }
        Diagnostics {
            t: self.t,
            r_mean,
            r_spread: r_max - r_min,
            det_g_min: self.cache.min_det(grid),
            h_max: self.cache.max_abs_mean_curvature(grid),
            energy,
            area,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FlowEvent {
    Finished { t: f64 },
    /// Collapse between the last healthy time and the failing step.
    Collapse { t: f64, bracket: (f64, f64), det: f64 },
    BlowUp { t: f64, h_max: f64 },
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub event: FlowEvent,
    pub steps: usize,
    pub snapshots: Vec<Diagnostics>,
}

pub struct Stepper<'a, D: Dynamics> {
    pub dynamics: D,
    pub config: FlowConfig,
    pub boundary: Option<&'a dyn BoundaryFill>,
}

impl<'a, D: Dynamics> Stepper<'a, D> {
    pub fn new(dynamics: D, config: FlowConfig) -> Self {
        Stepper {
            dynamics,
            config,
            boundary: None,
        }
    }

    pub fn with_boundary(mut self, boundary: &'a dyn BoundaryFill) -> Self {
        self.boundary = Some(boundary);
        self
    }

    fn cache(&self, im: &Immersion, t: f64) -> Result<GeometryCache> {
        let opts = GeometryOptions {
            det_floor: self.config.det_floor,
        };
        let cache = build_cache_with(im, &opts).map_err(|e| match e {
            HmcfError::MetricDegenerate { det, .. } => HmcfError::CollapseDetected { t, det },
            HmcfError::DegenerateFrame { .. } => HmcfError::CollapseDetected { t, det: 0.0 },
            other => other,
        })?;
        let h_max = cache.max_abs_mean_curvature(im.grid());
        if h_max >= self.config.h_max {
            return Err(HmcfError::BlowUpDetected { t, h_max });
        }
        Ok(cache)
    }

    /// State at `t = 0` from initial position and velocity.
    pub fn init(&self, immersion: Immersion, velocity: Vec<Vec3>) -> Result<FlowState> {
        if velocity.len() != immersion.len() {
            return Err(HmcfError::InvalidImmersion(format!(
                "velocity has {} entries, immersion {}",
                velocity.len(),
                immersion.len()
            )));
        }
        if let Some(index) = velocity.iter().position(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(HmcfError::NonFiniteField {
                field: "velocity",
                index,
            });
        }
        if immersion.grid().has_padding() && self.boundary.is_none() {
            return Err(HmcfError::InvalidImmersion(
                "padded grids need a boundary fill for their ghost layers".into(),
            ));
        }
        let cache = self.cache(&immersion, 0.0)?;
        let accel = self.dynamics.acceleration(&immersion, &velocity, &cache)?;
        Ok(FlowState {
            immersion,
            velocity,
            prev_immersion: None,
            t: 0.0,
            step: 0,
            dt_current: 0.0,
            accel,
            cache,
        })
    }

    pub fn next_dt(&self, fs: &FlowState) -> Result<f64> {
        match self.config.fixed_dt {
            Some(dt) => Ok(dt),
            None => cfl_dt(fs.immersion.grid(), &fs.cache, self.config.cfl_safety),
        }
    }

    /// Advances one step of size `dt`.
    pub fn step_with(&self, fs: &FlowState, dt: f64) -> Result<FlowState> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(HmcfError::StepSizeUnderflow { t: fs.t, h: dt });
        }
        let grid = fs.immersion.grid();
        let x = fs.immersion.points();
        let mut next: Vec<Vec3> = x.to_vec();
        match &fs.prev_immersion {
            None => {
                for p in 0..x.len() {
                    if grid.is_evolved(p) {
                        next[p] = x[p] + fs.velocity[p] * dt + fs.accel[p] * (0.5 * dt * dt);
                    }
                }
            }
            Some(prev) => {
                let xp = prev.points();
                let ratio = dt / fs.dt_current;
                let w = 0.5 * dt * (dt + fs.dt_current);
                for p in 0..x.len() {
                    if grid.is_evolved(p) {
                        next[p] = x[p] + (x[p] - xp[p]) * ratio + fs.accel[p] * w;
                    }
                }
            }
        }
        let t = fs.t + dt;
        let mut velocity: Vec<Vec3> = (0..x.len())
            .map(|p| (next[p] - x[p]) / dt + fs.accel[p] * (0.5 * dt))
            .collect();
        if let Some(b) = self.boundary {
            b.fill(t, grid, &mut next, &mut velocity)?;
        }
        if let Some(index) = next.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(HmcfError::NonFiniteField {
                field: "points",
                index,
            });
        }
        let immersion = fs.immersion.with_points(next)?;
        let cache = self.cache(&immersion, t)?;
        let accel = self.dynamics.acceleration(&immersion, &velocity, &cache)?;
        for p in 0..x.len() {
            if grid.is_evolved(p) {
                velocity[p] = (immersion.points()[p] - x[p]) / dt + accel[p] * (0.5 * dt);
            }
        }
        Ok(FlowState {
            immersion,
            velocity,
            prev_immersion: Some(fs.immersion.clone()),
            t,
            step: fs.step + 1,
            dt_current: dt,
            accel,
            cache,
        })
    }

    /// Advances one step with the configured step size.
    pub fn step(&self, fs: &FlowState) -> Result<FlowState> {
        let dt = self.next_dt(fs)?;
        self.step_with(fs, dt)
    }

    /// Steps until `t_end` or a terminal event. `observe` sees the initial
    /// state, every `snapshot_every`-th state and the last healthy state.
    pub fn run(
        &self,
        fs0: FlowState,
        t_end: f64,
        snapshot_every: usize,
        mut observe: impl FnMut(&FlowState),
    ) -> Result<(FlowState, RunSummary)> {
        let every = snapshot_every.max(1);
        let mut fs = fs0;
        let mut snapshots = vec![fs.diagnostics()];
        observe(&fs);
        let mut last_emitted = fs.step;
        let event = loop {
            if fs.t >= t_end * (1.0 - 1e-15) {
                break FlowEvent::Finished { t: fs.t };
            }
            let dt = self.next_dt(&fs)?.min(t_end - fs.t);
            match self.step_with(&fs, dt) {
                Ok(next) => {
                    fs = next;
                    if fs.step % every == 0 {
                        snapshots.push(fs.diagnostics());
                        observe(&fs);
                        last_emitted = fs.step;
                    }
                }
                Err(HmcfError::CollapseDetected { t, det }) => {
                    break FlowEvent::Collapse {
                        t,
                        bracket: (fs.t, t),
                        det,
                    }
                }
                Err(HmcfError::BlowUpDetected { t, h_max }) => break FlowEvent::BlowUp { t, h_max },
                Err(e) => return Err(e),
            }
        };
        if last_emitted != fs.step {
            snapshots.push(fs.diagnostics());
            observe(&fs);
        }
        let steps = fs.step;
        Ok((fs, RunSummary { event, steps, snapshots }))
    }
}

/// Integrates `k` steps at fixed `dt`, reverses the time direction and
/// integrates `k` steps back; returns `max |X_final - X_0|`.
pub fn reverse_check<D: Dynamics>(stepper: &Stepper<'_, D>, fs0: &FlowState, k: usize, dt: f64) -> Result<f64> {
    let mut fs = fs0.clone();
    let mut levels = Vec::with_capacity(2);
    for _ in 0..=k {
        let next = stepper.step_with(&fs, dt)?;
        levels.push(fs);
        if levels.len() > 1 {
            levels.remove(0);
        }
        fs = next;
    }
    // current level X^k with X^{k+1} as its "previous" level runs time backwards
    let mut back = levels.pop().unwrap();
    back.prev_immersion = Some(fs.immersion.clone());
    back.dt_current = dt;
    for _ in 0..k {
        back = stepper.step_with(&back, dt)?;
    }
    Ok(back
        .immersion
        .points()
        .iter()
        .zip(fs0.immersion.points())
        .map(|(a, b)| (a - b).amax())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::{integrate_radial, RadialState, DEFAULT_TOL};
    use std::f64::consts::{PI, TAU};

    fn circle(n: usize, r1: f64) -> (Immersion, Vec<Vec3>) {
        let s = Shape::Circle { r: 1.0 };
        (s.immersion(n).unwrap(), s.radial_velocity(n, r1).unwrap())
    }

    #[test]
    fn rhs_examples() {
        let (im, _) = circle(64, 0.0);
        let c = crate::geometry::build_cache(&im).unwrap();
        let f = flow_rhs(&c);
        for (p, x) in im.points().iter().enumerate() {
            assert!((f[p] + x).norm() < 5e-3);
        }
        let flat = Shape::Flat { dim: 2, length: 1.0 }.immersion(16).unwrap();
        let c = crate::geometry::build_cache(&flat).unwrap();
        assert!(flow_rhs(&c).iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn cfl_examples() {
        let (im, _) = circle(64, 0.0);
        let c = crate::geometry::build_cache(&im).unwrap();
        let dt = cfl_dt(im.grid(), &c, 0.25).unwrap();
        assert!((dt - 0.25 * TAU / 64.0).abs() < 5e-3 * dt);
        let s = Shape::Cylinder { r: 2.0, length: 0.1 * 64.0 };
        let im = s.immersion(64).unwrap();
        let c = crate::geometry::build_cache(&im).unwrap();
        let dt = cfl_dt(im.grid(), &c, 0.25).unwrap();
        let expect = 0.25 * (TAU / 64.0 / 0.5).min(0.1);
        assert!((dt - expect).abs() < 1e-3 * expect, "{dt} {expect}");
    }

    #[test]
    fn flat_band_is_stationary() {
        let im = Shape::Flat { dim: 2, length: 2.0 }.immersion(16).unwrap();
        let v = vec![Vec3::zeros(); im.len()];
        let st = Stepper::new(Hmcf, FlowConfig::default());
        let fs = st.init(im.clone(), v).unwrap();
        let (end, summary) = st.run(fs, 1.0, 10, |_| {}).unwrap();
        assert_eq!(summary.event, FlowEvent::Finished { t: end.t });
        let d = end
            .immersion
            .points()
            .iter()
            .zip(im.points())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(d <= 1e-12, "{d}");
        assert!(reverse_check(&st, &st.init(im.clone(), vec![Vec3::zeros(); im.len()]).unwrap(), 20, 0.01).unwrap() <= 1e-13);
    }

    #[test]
    fn reverse_check_zero_steps_is_exact() {
        let (im, v) = circle(32, 0.0);
        let st = Stepper::new(Hmcf, FlowConfig::default());
        let fs = st.init(im, v).unwrap();
        assert_eq!(reverse_check(&st, &fs, 0, 0.01).unwrap(), 0.0);
    }

    #[test]
    fn circle_reverses_to_roundoff() {
        let (im, v) = circle(64, 0.0);
        let st = Stepper::new(Hmcf, FlowConfig::default());
        let fs = st.init(im, v).unwrap();
        let d = reverse_check(&st, &fs, 50, 0.25 * TAU / 64.0).unwrap();
        assert!(d <= 1e-8, "{d}");
    }

    #[test]
    fn circle_radius_follows_radial_oracle() {
        let t0 = (PI / 2.0).sqrt();
        let oracle = integrate_radial(RadialState::new(1.0, 0.0, 1.0), 2.0, DEFAULT_TOL).unwrap();
        let (im, v) = circle(64, 0.0);
        let st = Stepper::new(Hmcf, FlowConfig::default());
        let fs = st.init(im, v).unwrap();
        let mut worst = 0.0f64;
        st.run(fs, 0.9 * t0, 1, |s| {
            let d = s.diagnostics();
            let r = oracle.sample(s.t).unwrap().r;
            worst = worst.max((d.r_mean - r).abs() / r);
            assert!(d.r_spread <= 1e-9);
        })
        .unwrap();
        assert!(worst < 2e-2, "{worst}");
    }

    #[test]
    fn padded_grid_requires_boundary() {
        let s = Shape::SphereBand { r: 1.0, alpha_max: 0.6 };
        let im = s.immersion(16).unwrap();
        let v = vec![Vec3::zeros(); im.len()];
        assert!(Stepper::new(Hmcf, FlowConfig::default()).init(im, v).is_err());
    }

    #[test]
    fn gauss_check_passes_on_torus() {
        let im = Shape::Torus { major: 2.0, minor: 0.7 }.immersion(64).unwrap();
        let c = crate::geometry::build_cache(&im).unwrap();
        let lap = flow_rhs_checked(&im, &c, 10.0).unwrap();
        assert_eq!(lap.len(), im.len());
        assert!(gauss_residual(&im, &c) > 0.0);
    }
}
