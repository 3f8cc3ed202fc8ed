//! Extremal timelike surfaces `(t, X(t, x))` in Minkowski space and their
//! zero-velocity limit.
//!
//! The extremal system couples a scalar gauge relation
//!
//! ```text
//! <X_tt, X_t> - g^ij (|X_t|² - 1) <X_ti, X_j> = 0
//! ```
//!
//! with a vector equation whose `<X_tt, X_t> X_t` term is exactly what the
//! gauge relation supplies. Substituting it cancels both velocity-parallel
//! terms and leaves the explicit acceleration
//!
//! ```text
//! X_tt = (1 - |X_t|²) Δ_g X - g^kl <∂_l X_t, X_t> ∂_k X
//! ```
//!
//! which reduces to `Δ_g X = H n` when `X_t = 0`. The gauge relation is not
//! enforced; [`gauge_residual`] monitors it.

use crate::error::{HmcfError, Result};
use crate::fit::fit_exponent;
use crate::flow::{flow_rhs, Dynamics, FlowConfig, FlowState, Hmcf, Stepper};
use crate::geometry::{laplace_beltrami_position, metric_det, GeometryCache};
use crate::grid::{Immersion, Mat2, Vec3};

pub const DEFAULT_EPS_LIGHT: f64 = 1e-6;

/// Induced Lorentzian metric of the graph of motion.
#[derive(Clone, Debug)]
pub struct LorentzCache {
    /// `ĝ_00 = -1 + |X_t|²`.
    pub g00: Vec<f64>,
    /// `ĝ_0i = <X_t, ∂_i X>`.
    pub g0i: Vec<[f64; 2]>,
    /// `ĝ_ij = g_ij`.
    pub gij: Vec<Mat2>,
    pub speed_sq: Vec<f64>,
}

impl LorentzCache {
    pub fn new(cache: &GeometryCache, velocity: &[Vec3], eps_light: f64) -> Result<Self> {
        let speed_sq: Vec<f64> = velocity.iter().map(|v| v.norm_squared()).collect();
        if let Some(index) = speed_sq.iter().position(|s| !(*s < 1.0 - eps_light)) {
            return Err(HmcfError::LightConeViolation {
                index,
                speed_sq: speed_sq[index],
            });
        }
        let g0i = (0..velocity.len())
            .map(|p| {
                let mut out = [0.0; 2];
                for (k, o) in out.iter_mut().enumerate().take(cache.dim) {
                    *o = velocity[p].dot(&cache.tangents[p][k]);
                }
                out
            })
            .collect();
        Ok(LorentzCache {
            g00: speed_sq.iter().map(|s| s - 1.0).collect(),
            g0i,
            gij: cache.metric.clone(),
            speed_sq,
        })
    }

    /// Largest `|ĝ_0i|`, the drift of the orthogonal gauge.
    pub fn gauge_drift(&self) -> f64 {
        self.g0i
            .iter()
            .flat_map(|g| g.iter())
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }
}

/// Explicit extremal acceleration for the given velocity field.
pub fn extremal_rhs(im: &Immersion, velocity: &[Vec3], cache: &GeometryCache, eps_light: f64) -> Result<Vec<Vec3>> {
    let lorentz = LorentzCache::new(cache, velocity, eps_light)?;
    let lap = laplace_beltrami_position(cache);
    let grid = im.grid();
    let dim = im.dim();
    Ok((0..im.len())
        .map(|p| {
            let v = velocity[p];
            let mut a = lap[p] * (1.0 - lorentz.speed_sq[p]);
            for l in 0..dim {
                let dv = grid.diff(velocity, p, l);
                let c = dv.dot(&v);
                for k in 0..dim {
                    a -= cache.tangents[p][k] * (cache.inverse_metric[p][(k, l)] * c);
                }
            }
            a
        })
        .collect())
}

/// `<X_tt, X_t> - g^ij (|X_t|² - 1) <X_ti, X_j>` at every point.
pub fn gauge_residual(im: &Immersion, velocity: &[Vec3], accel: &[Vec3], cache: &GeometryCache) -> Vec<f64> {
    let grid = im.grid();
    let dim = im.dim();
    (0..im.len())
        .map(|p| {
            let v = velocity[p];
            let s = v.norm_squared();
            let mut d = 0.0;
            for i in 0..dim {
                let dv = grid.diff(velocity, p, i);
                for j in 0..dim {
                    d += cache.inverse_metric[p][(i, j)] * dv.dot(&cache.tangents[p][j]);
                }
            }
            accel[p].dot(&v) - (s - 1.0) * d
        })
        .collect()
}

/// The extremal system as stepper dynamics.
#[derive(Clone, Copy, Debug)]
pub struct Extremal {
    pub eps_light: f64,
}

impl Default for Extremal {
    fn default() -> Self {
        Extremal {
            eps_light: DEFAULT_EPS_LIGHT,
        }
    }
}

impl Dynamics for Extremal {
    fn acceleration(&self, im: &Immersion, velocity: &[Vec3], cache: &GeometryCache) -> Result<Vec<Vec3>> {
        extremal_rhs(im, velocity, cache, self.eps_light)
    }

    fn uses_velocity(&self) -> bool {
        true
    }
}

/// `∫ det g dx` over the evolved points of a state.
pub fn integrated_det(fs: &FlowState) -> f64 {
    let grid = fs.immersion.grid();
    (0..fs.cache.len())
        .filter(|&p| grid.is_evolved(p))
        .map(|p| metric_det(&fs.cache.metric[p], grid.dim()))
        .sum::<f64>()
        * grid.cell_volume()
}

/// Centred time derivative of `∫ det g dx` at every interior sample of
/// `(t, ∫ det g dx)` pairs.
pub fn det_drift(history: &[(f64, f64)]) -> Vec<(f64, f64)> {
    history
        .windows(3)
        .map(|w| (w[1].0, (w[2].1 - w[0].1) / (w[2].0 - w[0].0)))
        .collect()
}

/// `(t, ∫ det g dx)` after every step of a fixed-step run from `(X_0, X_1)`.
pub fn det_history<D: Dynamics>(
    dynamics: D,
    im: &Immersion,
    velocity: Vec<Vec3>,
    t_end: f64,
    dt: f64,
) -> Result<Vec<(f64, f64)>> {
    let stepper = Stepper::new(
        dynamics,
        FlowConfig {
            fixed_dt: Some(dt),
            ..FlowConfig::default()
        },
    );
    let mut fs = stepper.init(im.clone(), velocity)?;
    let mut history = vec![(0.0, integrated_det(&fs))];
    for _ in 0..(t_end / dt).round() as usize {
        fs = stepper.step(&fs)?;
        history.push((fs.t, integrated_det(&fs)));
    }
    Ok(history)
}

/// Largest `|extremal_rhs - flow_rhs|` for the velocity `eps · profile`.
pub fn rhs_discrepancy(im: &Immersion, cache: &GeometryCache, profile: &[Vec3], eps: f64) -> Result<f64> {
    let v: Vec<Vec3> = profile.iter().map(|p| p * eps).collect();
    let ext = extremal_rhs(im, &v, cache, DEFAULT_EPS_LIGHT)?;
    let hm = flow_rhs(cache);
    Ok(ext
        .iter()
        .zip(&hm)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max))
}

#[derive(Clone, Debug)]
pub struct ScalingReport {
    pub eps: Vec<f64>,
    pub discrepancy: Vec<f64>,
    pub exponent: Option<f64>,
}

/// Right-hand-side discrepancy over a family of velocity scales.
pub fn rhs_scaling(im: &Immersion, cache: &GeometryCache, profile: &[Vec3], eps: &[f64]) -> Result<ScalingReport> {
    let discrepancy: Vec<f64> = eps
        .iter()
        .map(|e| rhs_discrepancy(im, cache, profile, *e))
        .collect::<Result<_>>()?;
    Ok(ScalingReport {
        eps: eps.to_vec(),
        exponent: fit_exponent(eps, &discrepancy),
        discrepancy,
    })
}

#[derive(Clone, Debug)]
pub struct LimitCurve {
    pub eps: f64,
    pub times: Vec<f64>,
    /// `max |X_hmcf(t) - X_extremal(t)|` at each time.
    pub discrepancy: Vec<f64>,
    pub max_gauge_residual: f64,
}

impl LimitCurve {
    pub fn max_discrepancy(&self) -> f64 {
        self.discrepancy.iter().cloned().fold(0.0, f64::max)
    }
}

/// Integrates both flows side by side from `(X_0, eps · X_1)` with one shared
/// fixed step `dt` up to `t_end`.
pub fn limit_comparison(im: &Immersion, profile: &[Vec3], eps: f64, t_end: f64, dt: f64) -> Result<LimitCurve> {
    let config = FlowConfig {
        fixed_dt: Some(dt),
        ..FlowConfig::default()
    };
    let v: Vec<Vec3> = profile.iter().map(|p| p * eps).collect();
    let hmcf = Stepper::new(Hmcf, config);
    let ext = Stepper::new(Extremal::default(), config);
    let mut a = hmcf.init(im.clone(), v.clone())?;
    let mut b = ext.init(im.clone(), v)?;
    let steps = (t_end / dt).round() as usize;
    let mut times = vec![0.0];
    let mut discrepancy = vec![0.0];
    let mut max_gauge = 0.0f64;
    for _ in 0..steps {
        a = hmcf.step(&a)?;
        b = ext.step(&b)?;
        let d = a
            .immersion
            .points()
            .iter()
            .zip(b.immersion.points())
            .map(|(x, y)| (x - y).amax())
            .fold(0.0, f64::max);
        times.push(b.t);
        discrepancy.push(d);
        let g = gauge_residual(&b.immersion, &b.velocity, &b.accel, &b.cache);
        max_gauge = g.iter().fold(max_gauge, |m, v| m.max(v.abs()));
    }
    Ok(LimitCurve {
        eps,
        times,
        discrepancy,
        max_gauge_residual: max_gauge,
    })
}

/// [`limit_comparison`] over several velocity scales with the fitted exponent
/// of the maximal discrepancy in `eps`.
pub fn limit_scaling(
    im: &Immersion,
    profile: &[Vec3],
    eps: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<(Vec<LimitCurve>, Option<f64>)> {
    let curves: Vec<LimitCurve> = eps
        .iter()
        .map(|e| limit_comparison(im, profile, *e, t_end, dt))
        .collect::<Result<_>>()?;
    let maxima: Vec<f64> = curves.iter().map(|c| c.max_discrepancy()).collect();
    let exponent = fit_exponent(eps, &maxima);
    Ok((curves, exponent))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_cache;
    use crate::shapes::Shape;
    use std::f64::consts::TAU;

    #[test]
    fn zero_velocity_matches_mean_curvature_flow() {
        for shape in [
            Shape::Circle { r: 1.0 },
            Shape::Torus { major: 2.0, minor: 0.6 },
            Shape::Ellipse { a: 1.5, b: 0.7 },
        ] {
            let im = shape.immersion(32).unwrap();
            let c = build_cache(&im).unwrap();
            let zero = vec![Vec3::zeros(); im.len()];
            let a = extremal_rhs(&im, &zero, &c, DEFAULT_EPS_LIGHT).unwrap();
            let b = flow_rhs(&c);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).norm() <= 1e-12 * y.norm().max(1.0));
            }
            assert!(gauge_residual(&im, &zero, &a, &c).iter().all(|r| *r == 0.0));
        }
    }

    #[test]
    fn flat_static_band_has_no_acceleration() {
        let im = Shape::Flat { dim: 2, length: 1.0 }.immersion(16).unwrap();
        let c = build_cache(&im).unwrap();
        let a = extremal_rhs(&im, &vec![Vec3::zeros(); im.len()], &c, DEFAULT_EPS_LIGHT).unwrap();
        assert!(a.iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn radial_circle_follows_relativistic_reduction() {
        // r_tt = -(1 - r_t²) / r for a radially moving circle
        let s = Shape::Circle { r: 1.0 };
        let im = s.immersion(128).unwrap();
        let c = build_cache(&im).unwrap();
        let v = s.radial_velocity(128, 0.1).unwrap();
        let a = extremal_rhs(&im, &v, &c, DEFAULT_EPS_LIGHT).unwrap();
        let hm = flow_rhs(&c);
        for (p, x) in im.points().iter().enumerate() {
            let radial = a[p].dot(&x.normalize());
            assert!((radial + (1.0 - 0.01)).abs() < 1e-3, "{radial}");
            let diff = (a[p] - hm[p]).norm();
            assert!((diff - 0.01).abs() < 1e-3);
        }
        // exact for the continuum circle, second order on the grid
        let d = std::f64::consts::TAU / 128.0;
        let g = gauge_residual(&im, &v, &a, &c);
        assert!(g.iter().all(|r| r.abs() < 0.1 * d * d));
    }

    #[test]
    fn light_cone_is_enforced() {
        let s = Shape::Circle { r: 1.0 };
        let im = s.immersion(16).unwrap();
        let c = build_cache(&im).unwrap();
        let v = s.radial_velocity(16, 1.0).unwrap();
        assert!(matches!(
            extremal_rhs(&im, &v, &c, DEFAULT_EPS_LIGHT),
            Err(HmcfError::LightConeViolation { .. })
        ));
    }

    #[test]
    fn rhs_discrepancy_is_quadratic_in_velocity() {
        let s = Shape::Ellipse { a: 1.3, b: 0.9 };
        let im = s.immersion(64).unwrap();
        let c = build_cache(&im).unwrap();
        let profile: Vec<Vec3> = im
            .points()
            .iter()
            .map(|x| Vec3::new(x.x, 2.0 * x.y, 0.0))
            .collect();
        let rep = rhs_scaling(&im, &c, &profile, &[0.1, 0.05, 0.025]).unwrap();
        assert!((rep.exponent.unwrap() - 2.0).abs() < 0.05);
    }

    #[test]
    fn static_band_has_no_det_drift() {
        let im = Shape::Flat { dim: 2, length: 1.0 }.immersion(16).unwrap();
        let v = vec![Vec3::zeros(); im.len()];
        let h = det_history(Extremal::default(), &im, v, 0.1, 0.01).unwrap();
        assert!(det_drift(&h).iter().all(|(_, d)| d.abs() < 1e-12));
    }

    #[test]
    fn det_drift_is_large_for_shrinking_circle() {
        let im = Shape::Circle { r: 1.0 }.immersion(64).unwrap();
        let v = vec![Vec3::zeros(); im.len()];
        let h = det_history(Hmcf, &im, v, 0.6, 0.01).unwrap();
        let worst = det_drift(&h).iter().map(|(_, d)| d.abs()).fold(0.0, f64::max);
        // ∫ det g = 2π r², so the drift is 4π r r_t ≈ -4π t early on
        assert!(worst > 0.3 * h[0].1, "{worst}");
    }

    #[test]
    fn initial_det_drift_shrinks_with_velocity_scale() {
        let im = Shape::Circle { r: 1.0 }.immersion(64).unwrap();
        let drifts: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&e| {
                let v = Shape::Circle { r: 1.0 }.radial_velocity(64, e).unwrap();
                let h = det_history(Extremal::default(), &im, v, 2.0 * e * 1e-3, e * 1e-3).unwrap();
                det_drift(&h)[0].1.abs()
            })
            .collect();
        let e = fit_exponent(&[0.1, 0.05, 0.025], &drifts).unwrap();
        assert!((e - 1.0).abs() < 0.05, "{e}");
    }

    #[test]
    fn trajectory_discrepancy_is_quadratic_on_flat_band() {
        let n = 32;
        let im = Shape::Flat { dim: 2, length: TAU }.immersion(n).unwrap();
        let h = TAU / n as f64;
        let profile: Vec<Vec3> = (0..im.len())
            .map(|p| {
                let c = im.grid().coords(p);
                Vec3::new(0.0, 0.0, (c[0] as f64 * h).sin() * (c[1] as f64 * h).cos())
            })
            .collect();
        let (_, e) = limit_scaling(&im, &profile, &[0.2, 0.1, 0.05], 0.5, 0.25 * h).unwrap();
        let e = e.unwrap();
        assert!((e - 2.0).abs() <= 0.2, "{e}");
    }

    #[test]
    fn trajectory_discrepancy_is_quadratic_on_circle_at_short_horizon() {
        let im = Shape::Circle { r: 1.0 }.immersion(64).unwrap();
        let profile = Shape::Circle { r: 1.0 }.radial_velocity(64, 1.0).unwrap();
        let (_, e) = limit_scaling(&im, &profile, &[0.2, 0.1, 0.05], 0.02, 0.25 * TAU / 64.0 / 4.0).unwrap();
        let e = e.unwrap();
        assert!((e - 2.0).abs() <= 0.2, "{e}");
    }

    #[test]
    fn det_drift_of_linear_history_is_its_slope() {
        let h: Vec<(f64, f64)> = (0..5).map(|k| (k as f64 * 0.1, 2.0 - 3.0 * k as f64 * 0.1)).collect();
        let d = det_drift(&h);
        assert_eq!(d.len(), 3);
        assert!(d.iter().all(|(_, v)| (v + 3.0).abs() < 1e-12));
    }

    #[test]
    fn zero_scale_limit_coincides_initially() {
        let s = Shape::Circle { r: 1.0 };
        let im = s.immersion(32).unwrap();
        let profile = s.radial_velocity(32, 1.0).unwrap();
        // one bootstrap step sees identical accelerations
        let curve = limit_comparison(&im, &profile, 0.0, 0.005, 0.005).unwrap();
        assert!(curve.max_discrepancy() <= 1e-12, "{}", curve.max_discrepancy());
        // afterwards the flow's own velocity separates them at third order in t
        let curve = limit_comparison(&im, &profile, 0.0, 0.04, 0.005).unwrap();
        let d = curve.max_discrepancy();
        assert!(d > 0.0 && d < 0.04f64.powi(3), "{d}");
    }
}
