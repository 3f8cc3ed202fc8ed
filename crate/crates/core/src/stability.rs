//! Graph perturbations of the flat plane, `X = X₀ + Y` with `X₀(x) = (x, 0)`,
//! evolved by the fixed-chart form `Y_tt = g^ij(∇Y) ∂_i∂_j Y` on a periodic box.
//!
//! Only short-horizon behaviour is probed: the runs check that small data
//! stay regular up to the horizon and that the deviation from the linear
//! wave solution shrinks like `ε²`. Global existence in time is not
//! reproduced here; on a periodic box there is no dispersive decay to
//! lean on.

use crate::error::{HmcfError, Result};
use crate::fit::fit_exponent;
use crate::geometry::{invert_metric, metric_det, DET_FLOOR};
use crate::grid::{Axis, Grid, Immersion, Mat2, Vec3};
use crate::shapes::Shape;
use rayon::prelude::*;
use std::f64::consts::TAU;

/// Runs whose displacement gradient reaches this bound are flagged.
pub const GRADIENT_GUARD: f64 = 0.5;

/// Periodic box `[0, length)^dim` with `n` points per axis.
pub fn graph_domain(dim: usize, n: usize, length: f64) -> Result<Grid> {
    if !(dim == 1 || dim == 2) || !(length > 0.0) {
        return Err(HmcfError::InvalidImmersion(format!(
            "graph domain needs dim 1 or 2 and positive length, got dim {dim}, length {length}"
        )));
    }
    let h = length / n as f64;
    Grid::new(vec![Axis::periodic(n, h); dim])
}

/// Component count of `Y`.
fn components(dim: usize) -> usize {
    dim + 1
}

/// `λ` at one point: `grad[i][p] = ∂_i y^p`.
fn gradient_at(grid: &Grid, y: &[Vec3], p: usize) -> [Vec3; 2] {
    let mut d = [Vec3::zeros(); 2];
    for (i, di) in d.iter_mut().enumerate().take(grid.dim()) {
        *di = grid.diff(y, p, i);
    }
    d
}

fn metric_at(grad: &[Vec3; 2], dim: usize) -> Mat2 {
    let mut g = Mat2::zeros();
    for i in 0..dim {
        for j in 0..dim {
            let delta = if i == j { 1.0 } else { 0.0 };
            g[(i, j)] = delta + grad[i][j] + grad[j][i] + grad[i].dot(&grad[j]);
        }
    }
    g
}

/// `g_ij = δ_ij + ∂_i y^j + ∂_j y^i + Σ_p ∂_i y^p ∂_j y^p`, untruncated.
pub fn graph_metric(grid: &Grid, y: &[Vec3]) -> Vec<Mat2> {
    let dim = grid.dim();
    (0..grid.len())
        .into_par_iter()
        .map(|p| metric_at(&gradient_at(grid, y, p), dim))
        .collect()
}

/// The immersion `X₀ + Y` on the matching lifted grid.
pub fn graph_immersion(grid: &Grid, y: &[Vec3]) -> Result<Immersion> {
    let n = grid.shape()[0];
    let length = grid.spacing(0) * n as f64;
    let flat = Shape::Flat { dim: grid.dim(), length }.immersion(n)?;
    let points = flat.points().iter().zip(y).map(|(x, d)| x + d).collect();
    flat.with_points(points)
}

/// `max |∂_i y^p|`.
pub fn gradient_sup(grid: &Grid, y: &[Vec3]) -> f64 {
    (0..grid.len())
        .map(|p| {
            gradient_at(grid, y, p)
                .iter()
                .take(grid.dim())
                .map(|d| d.amax())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// `max(|∂_i y^p|, |∂_i∂_j y^p|)`.
pub fn gradient_hessian_sup(grid: &Grid, y: &[Vec3]) -> f64 {
    let dim = grid.dim();
    let mut m = gradient_sup(grid, y);
    for p in 0..grid.len() {
        for i in 0..dim {
            for j in i..dim {
                m = m.max(grid.diff2(y, p, i, j).amax());
            }
        }
    }
    m
}

/// `δ^ij - ∂_i y^j - ∂_j y^i - y_ij`, the inverse metric expanded to first order.
pub fn truncated_inverse(grid: &Grid, y: &[Vec3]) -> Vec<Mat2> {
    let dim = grid.dim();
    (0..grid.len())
        .map(|p| {
            let g = metric_at(&gradient_at(grid, y, p), dim);
            let mut t = Mat2::zeros();
            for i in 0..dim {
                for j in 0..dim {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    t[(i, j)] = 2.0 * delta - g[(i, j)];
                }
            }
            t
        })
        .collect()
}

/// Which right-hand side a graph run integrates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphEquation {
    /// `g^ij(∇Y) ∂_i∂_j Y` with the exact inverse metric.
    Full,
    /// The flat wave operator `ΔY`.
    Linear,
}

/// Right-hand side of the graph equation at every point.
pub fn graph_rhs(grid: &Grid, y: &[Vec3], equation: GraphEquation, det_floor: f64) -> Result<Vec<Vec3>> {
    let dim = grid.dim();
    (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let g_inv = match equation {
                GraphEquation::Linear => Mat2::identity(),
                GraphEquation::Full => {
                    let g = metric_at(&gradient_at(grid, y, p), dim);
                    invert_metric(&g, dim, det_floor).ok_or(HmcfError::MetricDegenerate {
                        index: p,
                        det: metric_det(&g, dim),
                    })?
                }
            };
            let mut a = Vec3::zeros();
            for i in 0..dim {
                for j in 0..dim {
                    a += grid.diff2(y, p, i, j) * g_inv[(i, j)];
                }
            }
            Ok(a)
        })
        .collect()
}

/// `max |g^ij ∂_i∂_j y^p - Δ y^p|`.
pub fn reduced_residual(grid: &Grid, y: &[Vec3]) -> Result<f64> {
    let full = graph_rhs(grid, y, GraphEquation::Full, DET_FLOOR)?;
    let flat = graph_rhs(grid, y, GraphEquation::Linear, DET_FLOOR)?;
    Ok(full.iter().zip(&flat).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max))
}

/// Perturbation profiles on the periodic box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Profile {
    Zero,
    /// Height `sin(k x¹)` only.
    SineHeight { mode: usize },
    /// Every component excited: `y^p = sin(k x¹ + p k x²)` style mixing of
    /// tangential and normal displacement.
    SineMixed { mode: usize },
    /// Gaussian height bump of the given width centred in the box.
    Bump { width: f64 },
}

impl Profile {
    pub fn sample(&self, grid: &Grid) -> Vec<Vec3> {
        let dim = grid.dim();
        let n = grid.shape()[0];
        let h = grid.spacing(0);
        let length = h * n as f64;
        (0..grid.len())
            .map(|p| {
                let c = grid.coords(p);
                let x = [c[0] as f64 * h, if dim == 2 { c[1] as f64 * h } else { 0.0 }];
                let mut v = Vec3::zeros();
                match *self {
                    Profile::Zero => {}
                    Profile::SineHeight { mode } => {
                        v[dim] = (TAU * mode as f64 * x[0] / length).sin();
                    }
                    Profile::SineMixed { mode } => {
                        let k = TAU * mode as f64 / length;
                        for q in 0..components(dim) {
                            v[q] = (k * x[0] + q as f64 * k * x[1] + 0.3 * q as f64).sin();
                        }
                    }
                    Profile::Bump { width } => {
                        let r2: f64 = x.iter().take(dim).map(|xi| (xi - 0.5 * length).powi(2)).sum();
                        v[dim] = (-r2 / (width * width)).exp();
                    }
                }
                v
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct GraphState {
    pub grid: Grid,
    pub y: Vec<Vec3>,
    pub y_t: Vec<Vec3>,
    /// Previous time level; `None` before the bootstrap step.
    pub y_prev: Option<Vec<Vec3>>,
    pub accel: Vec<Vec3>,
    pub epsilon: f64,
    pub t: f64,
    pub step: usize,
    pub dt_current: f64,
}

impl GraphState {
    pub fn sup_norm(&self) -> f64 {
        self.y.iter().map(|v| v.amax()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GraphStepper {
    pub equation: GraphEquation,
    pub cfl_safety: f64,
    pub det_floor: f64,
    pub fixed_dt: Option<f64>,
}

impl Default for GraphStepper {
    fn default() -> Self {
        GraphStepper {
            equation: GraphEquation::Full,
            cfl_safety: crate::flow::DEFAULT_CFL_SAFETY,
            det_floor: DET_FLOOR,
            fixed_dt: None,
        }
    }
}

impl GraphStepper {
    /// Initial state `Y = ε X₁`, `Y_t = ε X₂`.
    pub fn init(&self, grid: Grid, x1: &[Vec3], x2: &[Vec3], epsilon: f64) -> Result<GraphState> {
        if x1.len() != grid.len() || x2.len() != grid.len() {
            return Err(HmcfError::InvalidImmersion("profile length differs from the grid".into()));
        }
        let y: Vec<Vec3> = x1.iter().map(|v| v * epsilon).collect();
        let y_t: Vec<Vec3> = x2.iter().map(|v| v * epsilon).collect();
        let accel = graph_rhs(&grid, &y, self.equation, self.det_floor)?;
        Ok(GraphState {
            grid,
            y,
            y_t,
            y_prev: None,
            accel,
            epsilon,
            t: 0.0,
            step: 0,
            dt_current: 0.0,
        })
    }

    /// `safety · min Δx^i / √g^ii`.
    pub fn cfl_dt(&self, gs: &GraphState) -> Result<f64> {
        if let Some(dt) = self.fixed_dt {
            return Ok(dt);
        }
        let dim = gs.grid.dim();
        let metric = graph_metric(&gs.grid, &gs.y);
        let mut dt = f64::INFINITY;
        for (index, g) in metric.iter().enumerate() {
            let inv = invert_metric(g, dim, self.det_floor).ok_or(HmcfError::MetricDegenerate {
                index,
                det: metric_det(g, dim),
            })?;
            for i in 0..dim {
                dt = dt.min(gs.grid.spacing(i) / inv[(i, i)].sqrt());
            }
        }
        Ok(self.cfl_safety * dt)
    }

    pub fn step_with(&self, gs: &GraphState, dt: f64) -> Result<GraphState> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(HmcfError::StepSizeUnderflow { t: gs.t, h: dt });
        }
        let y = &gs.y;
        let next: Vec<Vec3> = match &gs.y_prev {
            None => (0..y.len())
                .map(|p| y[p] + gs.y_t[p] * dt + gs.accel[p] * (0.5 * dt * dt))
                .collect(),
            Some(prev) => {
                let ratio = dt / gs.dt_current;
                let w = 0.5 * dt * (dt + gs.dt_current);
                (0..y.len())
                    .map(|p| y[p] + (y[p] - prev[p]) * ratio + gs.accel[p] * w)
                    .collect()
            }
        };
        if let Some(index) = next.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(HmcfError::NonFiniteField { field: "graph", index });
        }
        let accel = graph_rhs(&gs.grid, &next, self.equation, self.det_floor)?;
        let y_t = (0..y.len())
            .map(|p| (next[p] - y[p]) / dt + accel[p] * (0.5 * dt))
            .collect();
        Ok(GraphState {
            grid: gs.grid.clone(),
            y: next,
            y_t,
            y_prev: Some(y.clone()),
            accel,
            epsilon: gs.epsilon,
            t: gs.t + dt,
            step: gs.step + 1,
            dt_current: dt,
        })
    }

    pub fn step(&self, gs: &GraphState) -> Result<GraphState> {
        let dt = self.cfl_dt(gs)?;
        self.step_with(gs, dt)
    }
}

/// One graph step with default settings.
pub fn graph_step(gs: &GraphState) -> Result<GraphState> {
    GraphStepper::default().step(gs)
}

/// Outcome of one ε run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// Reached the horizon with gradients below the guard.
    Regular,
    /// Left the small-gradient regime; excluded from fits.
    Flagged,
    /// Degenerate metric or non-finite values before the horizon.
    Breakdown,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Regular => "regular",
            Verdict::Flagged => "flagged",
            Verdict::Breakdown => "breakdown",
        }
    }
}

/// One recorded time of an ε run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphSample {
    pub t: f64,
    pub sup_norm: f64,
    /// `max |Y_ε - ε Y_lin|`.
    pub deviation: f64,
}

#[derive(Clone, Debug)]
pub struct EpsilonRun {
    pub epsilon: f64,
    pub verdict: Verdict,
    pub samples: Vec<GraphSample>,
}

impl EpsilonRun {
    pub fn final_deviation(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.deviation)
    }

    /// Largest deviation over the recorded samples.
    pub fn max_deviation(&self) -> f64 {
        self.samples.iter().map(|s| s.deviation).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct ScalingSetup {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
    pub x1: Profile,
    pub x2: Profile,
    pub horizon: f64,
    /// Fixed step shared by the nonlinear and the linear runs.
    pub dt: f64,
    pub snapshot_every: usize,
}

impl ScalingSetup {
    /// Step `0.25 Δx`, the flat-metric CFL step.
    pub fn new(dim: usize, n: usize, x1: Profile, x2: Profile, horizon: f64) -> Self {
        let length = TAU;
        ScalingSetup {
            dim,
            n,
            length,
            x1,
            x2,
            horizon,
            dt: 0.25 * length / n as f64,
            snapshot_every: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScalingReport {
    pub runs: Vec<EpsilonRun>,
    /// Fitted order of the maximum deviation in ε over regular runs with ε > 0.
    pub exponent: Option<f64>,
    /// Largest ε below which every tested run was regular. Depends on the
    /// scheme, the grid and the horizon.
    pub eps0: Option<f64>,
}

fn run_one(setup: &ScalingSetup, grid: &Grid, x1: &[Vec3], x2: &[Vec3], eps: f64) -> Result<EpsilonRun> {
    let full = GraphStepper {
        fixed_dt: Some(setup.dt),
        ..GraphStepper::default()
    };
    let linear = GraphStepper {
        equation: GraphEquation::Linear,
        ..full
    };
    let deviation = |a: &GraphState, l: &GraphState| {
        a.y.iter()
            .zip(&l.y)
            .map(|(u, v)| (u - v * eps).amax())
            .fold(0.0, f64::max)
    };
    let mut samples = Vec::new();
    let mut verdict = Verdict::Regular;
    let mut gs = match full.init(grid.clone(), x1, x2, eps) {
        Ok(gs) => gs,
        Err(HmcfError::MetricDegenerate { .. }) => {
            return Ok(EpsilonRun {
                epsilon: eps,
                verdict: Verdict::Breakdown,
                samples,
            })
        }
        Err(e) => return Err(e),
    };
    let mut lin = linear.init(grid.clone(), x1, x2, 1.0)?;
    samples.push(GraphSample {
        t: 0.0,
        sup_norm: gs.sup_norm(),
        deviation: deviation(&gs, &lin),
    });
    let steps = (setup.horizon / setup.dt).round() as usize;
    let every = setup.snapshot_every.max(1);
    for k in 1..=steps {
        if gradient_sup(grid, &gs.y) >= GRADIENT_GUARD {
            verdict = Verdict::Flagged;
            break;
        }
        gs = match full.step_with(&gs, setup.dt) {
            Ok(next) => next,
            Err(HmcfError::MetricDegenerate { .. }) | Err(HmcfError::NonFiniteField { .. }) => {
                verdict = Verdict::Breakdown;
                break;
            }
            Err(e) => return Err(e),
        };
        lin = linear.step_with(&lin, setup.dt)?;
        if k % every == 0 || k == steps {
            samples.push(GraphSample {
                t: gs.t,
                sup_norm: gs.sup_norm(),
                deviation: deviation(&gs, &lin),
            });
        }
    }
    if verdict == Verdict::Regular && gradient_sup(grid, &gs.y) >= GRADIENT_GUARD {
        verdict = Verdict::Flagged;
    }
    Ok(EpsilonRun {
        epsilon: eps,
        verdict,
        samples,
    })
}

/// Runs every ε to the horizon next to the unit-amplitude linear wave and
/// measures `max |Y_ε - ε Y_lin|`. Runs are independent and execute in parallel.
pub fn epsilon_scaling(setup: &ScalingSetup, eps_list: &[f64]) -> Result<ScalingReport> {
    if eps_list.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(HmcfError::Domain(format!("epsilon values must be finite and non-negative: {eps_list:?}")));
    }
    let grid = graph_domain(setup.dim, setup.n, setup.length)?;
    let x1 = setup.x1.sample(&grid);
    let x2 = setup.x2.sample(&grid);
    let runs = eps_list
        .par_iter()
        .map(|&eps| run_one(setup, &grid, &x1, &x2, eps))
        .collect::<Result<Vec<_>>>()?;
    let fitted: Vec<&EpsilonRun> = runs
        .iter()
        .filter(|r| r.verdict == Verdict::Regular && r.epsilon > 0.0)
        .collect();
    let exponent = if fitted.len() >= 2 {
        let xs: Vec<f64> = fitted.iter().map(|r| r.epsilon).collect();
        let ys: Vec<f64> = fitted.iter().map(|r| r.max_deviation()).collect();
        fit_exponent(&xs, &ys)
    } else {
        None
    };
    let mut sorted: Vec<&EpsilonRun> = runs.iter().collect();
    sorted.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    let eps0 = sorted
        .iter()
        .take_while(|r| r.verdict == Verdict::Regular)
        .last()
        .map(|r| r.epsilon);
    Ok(ScalingReport { runs, exponent, eps0 })
}

/// `(‖λ‖, max |g^{-1} - truncated|)` for `Y = s X₁` over the given scales.
pub fn truncation_scaling(grid: &Grid, x1: &[Vec3], scales: &[f64]) -> Result<Vec<(f64, f64)>> {
    let dim = grid.dim();
    scales
        .iter()
        .map(|&s| {
            let y: Vec<Vec3> = x1.iter().map(|v| v * s).collect();
            let metric = graph_metric(grid, &y);
            let trunc = truncated_inverse(grid, &y);
            let mut err: f64 = 0.0;
            for (index, (g, t)) in metric.iter().zip(&trunc).enumerate() {
                let inv = invert_metric(g, dim, DET_FLOOR).ok_or(HmcfError::MetricDegenerate {
                    index,
                    det: metric_det(g, dim),
                })?;
                for i in 0..dim {
                    for j in 0..dim {
                        err = err.max((inv[(i, j)] - t[(i, j)]).abs());
                    }
                }
            }
            Ok((gradient_sup(grid, &y), err))
        })
        .collect()
}

/// `(‖λ̂‖, max |full rhs - flat Laplacian|)` for `Y = s X₁` over the given scales.
pub fn reduced_scaling(grid: &Grid, x1: &[Vec3], scales: &[f64]) -> Result<Vec<(f64, f64)>> {
    scales
        .iter()
        .map(|&s| {
            let y: Vec<Vec3> = x1.iter().map(|v| v * s).collect();
            Ok((gradient_hessian_sup(grid, &y), reduced_residual(grid, &y)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::compute_metric;

    fn fit(pairs: &[(f64, f64)]) -> f64 {
        let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        fit_exponent(&xs, &ys).unwrap()
    }

    #[test]
    fn zero_displacement_has_flat_metric() {
        let grid = graph_domain(2, 16, TAU).unwrap();
        let y = vec![Vec3::zeros(); grid.len()];
        for g in graph_metric(&grid, &y) {
            assert_eq!(g, Mat2::identity());
        }
    }

    #[test]
    fn tangential_sine_metric_entry() {
        let grid = graph_domain(1, 64, TAU).unwrap();
        let a = 0.2;
        let h = grid.spacing(0);
        let y: Vec<Vec3> = (0..64).map(|k| Vec3::new(a * (k as f64 * h).sin(), 0.0, 0.0)).collect();
        let g = graph_metric(&grid, &y);
        for (k, gk) in g.iter().enumerate() {
            let d = grid.diff(&y, k, 0).x;
            assert!((gk[(0, 0)] - (1.0 + 2.0 * d + d * d)).abs() < 1e-15);
            let exact = 1.0 + 2.0 * a * (k as f64 * h).cos() + (a * (k as f64 * h).cos()).powi(2);
            assert!((gk[(0, 0)] - exact).abs() < 1e-3);
        }
    }

    #[test]
    fn metric_matches_general_immersion_path() {
        for dim in [1, 2] {
            let grid = graph_domain(dim, 32, TAU).unwrap();
            for profile in [Profile::SineHeight { mode: 1 }, Profile::SineMixed { mode: 2 }] {
                let y: Vec<Vec3> = profile.sample(&grid).iter().map(|v| v * 0.1).collect();
                let im = graph_immersion(&grid, &y).unwrap();
                let general = compute_metric(&im).unwrap();
                let graph = graph_metric(&grid, &y);
                for (a, b) in general.iter().zip(&graph) {
                    assert!((a - b).amax() <= 1e-12 * b.amax());
                }
            }
        }
    }

    #[test]
    fn zero_epsilon_stays_zero() {
        let setup = ScalingSetup::new(2, 16, Profile::SineMixed { mode: 1 }, Profile::Zero, 0.5);
        let report = epsilon_scaling(&setup, &[0.0]).unwrap();
        assert_eq!(report.runs[0].verdict, Verdict::Regular);
        assert_eq!(report.runs[0].max_deviation(), 0.0);
        assert!(report.runs[0].samples.iter().all(|s| s.sup_norm == 0.0));
    }

    #[test]
    fn tiny_epsilon_follows_linear_wave() {
        let setup = ScalingSetup::new(1, 64, Profile::SineHeight { mode: 1 }, Profile::Zero, 2.0);
        let eps = 1e-4;
        let report = epsilon_scaling(&setup, &[eps]).unwrap();
        let run = &report.runs[0];
        assert_eq!(run.verdict, Verdict::Regular);
        assert!(run.max_deviation() / eps < eps);
    }

    #[test]
    fn deviation_from_linearity_is_quadratic() {
        let setup = ScalingSetup::new(2, 32, Profile::SineMixed { mode: 1 }, Profile::Zero, 1.0);
        let report = epsilon_scaling(&setup, &[0.02, 0.01, 0.005]).unwrap();
        let e = report.exponent.unwrap();
        assert!((e - 2.0).abs() <= 0.2, "exponent {e}");
        let d: Vec<f64> = report.runs.iter().map(|r| r.max_deviation()).collect();
        for w in d.windows(2) {
            assert!((w[0] / w[1] - 4.0).abs() < 0.5);
        }
    }

    #[test]
    fn large_epsilon_is_flagged_and_excluded() {
        let setup = ScalingSetup::new(1, 32, Profile::SineMixed { mode: 1 }, Profile::Zero, 0.5);
        let report = epsilon_scaling(&setup, &[0.8, 0.02, 0.01]).unwrap();
        assert_ne!(report.runs[0].verdict, Verdict::Regular);
        assert_eq!(report.eps0, Some(0.02));
        assert!(report.exponent.is_some());
    }

    #[test]
    fn moderate_epsilon_stays_bounded() {
        let mut setup = ScalingSetup::new(1, 64, Profile::SineHeight { mode: 1 }, Profile::Zero, 3.0 * TAU);
        setup.snapshot_every = 50;
        let report = epsilon_scaling(&setup, &[0.1]).unwrap();
        let run = &report.runs[0];
        assert_eq!(run.verdict, Verdict::Regular);
        assert!(run.samples.iter().all(|s| s.sup_norm < 0.2));
    }

    #[test]
    fn truncated_inverse_error_is_quadratic() {
        let grid = graph_domain(2, 32, TAU).unwrap();
        let x1 = Profile::SineMixed { mode: 1 }.sample(&grid);
        let pairs = truncation_scaling(&grid, &x1, &[0.04, 0.02, 0.01, 0.005]).unwrap();
        let e = fit(&pairs);
        assert!((1.8..=2.2).contains(&e), "exponent {e}");
    }

    #[test]
    fn reduced_equation_residual_is_quadratic() {
        let grid = graph_domain(2, 32, TAU).unwrap();
        let x1 = Profile::SineMixed { mode: 1 }.sample(&grid);
        let pairs = reduced_scaling(&grid, &x1, &[0.04, 0.02, 0.01, 0.005]).unwrap();
        let e = fit(&pairs);
        assert!((1.8..=2.2).contains(&e), "exponent {e}");
    }

    #[test]
    fn cfl_step_on_flat_data() {
        let grid = graph_domain(2, 32, TAU).unwrap();
        let stepper = GraphStepper::default();
        let x = vec![Vec3::zeros(); grid.len()];
        let gs = stepper.init(grid, &x, &x, 1.0).unwrap();
        assert!((stepper.cfl_dt(&gs).unwrap() - 0.25 * TAU / 32.0).abs() < 1e-15);
        let next = graph_step(&gs).unwrap();
        assert_eq!(next.sup_norm(), 0.0);
    }
}
