//! Reduced radial flows `r_tt = -c / r`.
//!
//! Circles and cylinders give `c = 1`, round spheres `c = 2`. The first
//! integral `r_t² + 2c ln(r / r₀) = r₁²` drives both the ODE drift check and
//! the collapse-time quadrature.

use crate::error::{HmcfError, Result};

/// Fraction of `r₀` below which the ODE path declares collapse.
pub const R_STOP_FRACTION: f64 = 1e-6;

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialState {
    pub r: f64,
    pub r_t: f64,
    pub t: f64,
    pub c: f64,
}

impl RadialState {
    pub fn new(r: f64, r_t: f64, c: f64) -> Self {
        RadialState { r, r_t, t: 0.0, c }
    }

    /// `r_t² + 2c ln(r / r₀) - r₁²` relative to the given initial data.
    pub fn first_integral(&self, r0: f64, r1: f64) -> f64 {
        self.r_t * self.r_t + 2.0 * self.c * (self.r / r0).ln() - r1 * r1
    }
}

fn check_params(r0: f64, c: f64) -> Result<()> {
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(HmcfError::Domain(format!("radius must be positive, got {r0}")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(HmcfError::Domain(format!("curvature coefficient must be positive, got {c}")));
    }
    Ok(())
}

/// `-c / r`.
pub fn radial_rhs(s: &RadialState) -> Result<f64> {
    if !(s.r > 0.0) {
        return Err(HmcfError::Domain(format!("radius must be positive, got {}", s.r)));
    }
    Ok(-s.c / s.r)
}

/// Collapse time for zero initial velocity, `r₀ √(π / 2c)`.
pub fn collapse_time_at_rest(r0: f64, c: f64) -> f64 {
    r0 * (std::f64::consts::PI / (2.0 * c)).sqrt()
}

/// Largest radius reached, `r₀ exp(r₁² / 2c)` for `r₁ > 0`, otherwise `r₀`.
pub fn apex_radius(r0: f64, r1: f64, c: f64) -> f64 {
    if r1 > 0.0 {
        r0 * (r1 * r1 / (2.0 * c)).exp()
    } else {
        r0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RadialEvent {
    Finished { t: f64 },
    /// Collapse with the best estimate `t0` and a bracket containing it.
    Collapse { t0: f64, bracket: (f64, f64) },
}

#[derive(Clone, Debug)]
pub struct RadialTrajectory {
    pub r0: f64,
    pub r1: f64,
    pub states: Vec<RadialState>,
    pub event: RadialEvent,
    /// Largest first-integral drift over accepted steps.
    pub max_drift: f64,
}

fn quintic_hermite(h: f64, s: f64, y0: [f64; 3], y1: [f64; 3]) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    let s5 = s4 * s;
    let h00 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
    let h10 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
    let h20 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5;
    let h01 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
    let h11 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
    let h21 = 0.5 * s3 - s4 + 0.5 * s5;
    h00 * y0[0]
        + h * h10 * y0[1]
        + h * h * h20 * y0[2]
        + h01 * y1[0]
        + h * h11 * y1[1]
        + h * h * h21 * y1[2]
}

/// Continuous extension between two accepted states.
fn interpolate(a: &RadialState, b: &RadialState, t: f64) -> RadialState {
    let h = b.t - a.t;
    if h <= 0.0 {
        return *a;
    }
    let s = ((t - a.t) / h).clamp(0.0, 1.0);
    let jet = |x: &RadialState| {
        let acc = -x.c / x.r;
        let jerk = x.c * x.r_t / (x.r * x.r);
        ([x.r, x.r_t, acc], [x.r_t, acc, jerk])
    };
    let (ra, va) = jet(a);
    let (rb, vb) = jet(b);
    RadialState {
        r: quintic_hermite(h, s, ra, rb),
        r_t: quintic_hermite(h, s, va, vb),
        t,
        c: a.c,
    }
}

impl RadialTrajectory {
    /// State at time `t` from the continuous extension; `None` outside the trajectory.
    pub fn sample(&self, t: f64) -> Option<RadialState> {
        let first = self.states.first()?;
        let last = self.states.last()?;
        if t < first.t || t > last.t {
            return None;
        }
        let k = self.states.partition_point(|s| s.t <= t);
        if k == 0 {
            return Some(*first);
        }
        if k >= self.states.len() {
            return Some(*last);
        }
        Some(interpolate(&self.states[k - 1], &self.states[k], t))
    }

    pub fn collapse_time(&self) -> Option<f64> {
        match self.event {
            RadialEvent::Collapse { t0, .. } => Some(t0),
            RadialEvent::Finished { .. } => None,
        }
    }

    pub fn max_radius(&self) -> f64 {
        self.states.iter().map(|s| s.r).fold(0.0, f64::max)
    }

    /// Number of sign changes of `r_t` along the accepted states.
    pub fn velocity_sign_changes(&self) -> usize {
        let signs: Vec<f64> = self
            .states
            .iter()
            .map(|s| s.r_t)
            .filter(|v| *v != 0.0)
            .map(f64::signum)
            .collect();
        signs.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

// Dormand–Prince 5(4) tableau; the system is autonomous so the nodes are unused
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand–Prince trial step; `None` if a stage leaves `r > 0`.
fn dopri_step(y: [f64; 2], c: f64, h: f64) -> Option<([f64; 2], [f64; 2])> {
    let f = |y: [f64; 2]| -> Option<[f64; 2]> {
        if y[0] > 0.0 {
            Some([y[1], -c / y[0]])
        } else {
            None
        }
    };
    let mut k = [[0.0; 2]; 7];
    k[0] = f(y)?;
    for s in 1..7 {
        let mut ys = y;
        for (j, kj) in k.iter().enumerate().take(s) {
            ys[0] += h * A[s][j] * kj[0];
            ys[1] += h * A[s][j] * kj[1];
        }
        k[s] = f(ys)?;
    }
    let mut y5 = y;
    let mut err = [0.0; 2];
    for s in 0..7 {
        for d in 0..2 {
            y5[d] += h * B5[s] * k[s][d];
            err[d] += h * (B5[s] - B4[s]) * k[s][d];
        }
    }
    Some((y5, err))
}

/// Adaptive Dormand–Prince 5(4) integration with PI step control.
///
/// Stops at `t_end` or when `r` falls below `R_STOP_FRACTION · r₀`; the
/// crossing is located by bisection on the continuous extension and the
/// remaining fall time is added from the local speed.
pub fn integrate_radial(s0: RadialState, t_end: f64, tol: f64) -> Result<RadialTrajectory> {
    check_params(s0.r, s0.c)?;
    if !(tol > 1e-14 && tol < 1e-3) {
        return Err(HmcfError::Domain(format!("tolerance {tol:e} outside (1e-14, 1e-3)")));
    }
    if !(t_end > s0.t) || !s0.r_t.is_finite() {
        return Err(HmcfError::Domain("end time must exceed start time".into()));
    }
    let (r0, r1, c) = (s0.r, s0.r_t, s0.c);
    let r_stop = R_STOP_FRACTION * r0;
    // The first integral amplifies velocity errors by |r_t|, so run tighter
    // than the requested tolerance.
    let rtol = (tol * 1e-2).max(2e-15);
    let atol = rtol * r_stop;

    let mut states = vec![s0];
    let mut max_drift = 0.0f64;
    let mut y = [s0.r, s0.r_t];
    let mut t = s0.t;
    let mut h = 1e-3 * r0 / (r1.abs() + c.sqrt());
    let mut err_prev = 1e-4f64;
    let h_floor = |t: f64| 1e-15 * t.abs().max(r0);

    loop {
        if t >= t_end {
            return Ok(RadialTrajectory {
                r0,
                r1,
                states,
                event: RadialEvent::Finished { t },
                max_drift,
            });
        }
        h = h.min(t_end - t);
        if h < h_floor(t) {
            let last = *states.last().unwrap();
            if last.r < 1e-3 * r0 && last.r_t < 0.0 {
                let rest = last.r / -last.r_t;
                return Ok(RadialTrajectory {
                    r0,
                    r1,
                    states,
                    event: RadialEvent::Collapse {
                        t0: t + rest,
                        bracket: (t, t + rest),
                    },
                    max_drift,
                });
            }
            return Err(HmcfError::StepSizeUnderflow { t, h });
        }
        let Some((yn, err)) = dopri_step(y, c, h) else {
            h *= 0.25;
            continue;
        };
        let mut e = 0.0;
        for d in 0..2 {
            let sc = atol + rtol * y[d].abs().max(yn[d].abs());
            e += (err[d] / sc).powi(2);
        }
        let e = (e / 2.0).sqrt();
        if !e.is_finite() || yn[0] <= 0.0 {
            h *= 0.25;
            continue;
        }
        if e > 1.0 {
            h *= (0.9 * e.powf(-0.2)).max(0.2);
            continue;
        }
        let fac = (0.9 * e.max(1e-10).powf(-0.17) * err_prev.powf(0.04)).clamp(0.2, 10.0);
        err_prev = e.max(1e-4);
        t += h;
        y = yn;
        h *= fac;
        let state = RadialState {
            r: y[0],
            r_t: y[1],
            t,
            c,
        };
        max_drift = max_drift.max(state.first_integral(r0, r1).abs());
        let prev = *states.last().unwrap();
        states.push(state);
        if state.r < r_stop {
            let (mut lo, mut hi) = (prev.t, state.t);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if interpolate(&prev, &state, mid).r > r_stop {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 4.0 * f64::EPSILON * hi {
                    break;
                }
            }
            let hit = interpolate(&prev, &state, hi);
            states.pop();
            states.push(hit);
            let rest = hit.r / hit.r_t.abs();
            return Ok(RadialTrajectory {
                r0,
                r1,
                states,
                event: RadialEvent::Collapse {
                    t0: hi + rest,
                    bracket: (hi, hi + rest),
                },
                max_drift,
            });
        }
    }
}

// Gauss–Kronrod 7-15 nodes and weights on [-1, 1]
const GK_NODES: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const G_WEIGHTS: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gauss_kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(mid);
    let mut kronrod = GK_WEIGHTS[7] * fc;
    let mut gauss = G_WEIGHTS[3] * fc;
    for i in 0..7 {
        let dx = half * GK_NODES[i];
        let s = f(mid - dx) + f(mid + dx);
        kronrod += GK_WEIGHTS[i] * s;
        if i % 2 == 1 {
            gauss += G_WEIGHTS[i / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Globally adaptive Gauss–Kronrod quadrature to absolute tolerance `tol`.
pub fn integrate_adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let mut intervals = vec![(a, b, gauss_kronrod(&f, a, b))];
    for _ in 0..10_000 {
        let total_err: f64 = intervals.iter().map(|(_, _, (_, e))| e).sum();
        if total_err <= tol {
            return Ok(intervals.iter().map(|(_, _, (v, _))| v).sum());
        }
        let (worst, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .unwrap();
        let (lo, hi, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        intervals.push((lo, mid, gauss_kronrod(&f, lo, mid)));
        intervals.push((mid, hi, gauss_kronrod(&f, mid, hi)));
    }
    let value: f64 = intervals.iter().map(|(_, _, (v, _))| v).sum();
    if value.is_finite() {
        Ok(value)
    } else {
        Err(HmcfError::Domain("quadrature did not converge".into()))
    }
}

// e^{-u²} underflows past this point
const U_CUTOFF: f64 = 27.5;

/// Time to fall from `r_ref` with speed `|r₁|` to zero, `∫₀^∞ 2u r_ref e^{-u²} / √(r₁² + 2c u²) du`
/// under `r = r_ref e^{-u²}`.
fn fall_time(r_ref: f64, r1: f64, c: f64, tol: f64) -> Result<f64> {
    let f = |u: f64| 2.0 * u * r_ref * (-u * u).exp() / (r1 * r1 + 2.0 * c * u * u).sqrt();
    let f0 = if r1 == 0.0 {
        2.0 * r_ref / (2.0 * c).sqrt()
    } else {
        0.0
    };
    integrate_adaptive(move |u| if u == 0.0 { f0 } else { f(u) }, 0.0, U_CUTOFF, tol)
}

/// Time to rise from `r₀` to `r_max`, `r_max √(2/c) ∫₀^{u₀} e^{-u²} du` with `u₀ = r₁ / √(2c)`.
fn rise_time(r0: f64, r1: f64, c: f64, tol: f64) -> Result<f64> {
    let r_max = apex_radius(r0, r1, c);
    let u0 = r1 / (2.0 * c).sqrt();
    let scale = r_max * (2.0 / c).sqrt();
    Ok(scale * integrate_adaptive(|u| (-u * u).exp(), 0.0, u0, tol / scale)?)
}

/// Collapse time from the first integral with the endpoint singularity
/// removed by `u = √(ln(r_ref / r))`.
pub fn collapse_time_quadrature(r0: f64, r1: f64, c: f64, tol: f64) -> Result<f64> {
    check_params(r0, c)?;
    if !r1.is_finite() || !(tol > 0.0) {
        return Err(HmcfError::Domain("invalid velocity or tolerance".into()));
    }
    if r1 <= 0.0 {
        fall_time(r0, r1, c, tol)
    } else {
        let r_max = apex_radius(r0, r1, c);
        Ok(rise_time(r0, r1, c, 0.5 * tol)? + fall_time(r_max, 0.0, c, 0.5 * tol)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RadialPhase {
    MonotoneCollapse,
    ExpandThenCollapse { t_max: f64, r_max: f64 },
}

/// Monotone collapse iff `r₁ ≤ 0`; otherwise the apex time and radius.
pub fn classify_radial_phase(r0: f64, r1: f64, c: f64) -> RadialPhase {
    if r1 <= 0.0 {
        return RadialPhase::MonotoneCollapse;
    }
    let r_max = apex_radius(r0, r1, c);
    let t_max = rise_time(r0, r1, c, 1e-13 * r_max).unwrap_or(f64::NAN);
    RadialPhase::ExpandThenCollapse { t_max, r_max }
}
