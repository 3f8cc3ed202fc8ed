//! Residuals of the curvature identities satisfied by the flow.
//!
//! Two static identities (Simons type) hold on any hypersurface:
//!
//! ```text
//! Δh_ij  = ∇_i∇_j H + H h_il g^lm h_mj - |A|² h_ij
//! Δ|A|²  = 2 g^ik g^jl h_kl ∇_i∇_j H + 2|∇A|² + 2H tr(A³) - 2|A|⁴
//! ```
//!
//! and five evolution identities hold along `X_tt = H n`, for the second time
//! derivatives of `g_ij`, `n`, `h_ij`, `H` and `|A|²`. Every term is assembled
//! pointwise from a [`PointTerms`] record, which is filled either from finite
//! differences over three snapshots or from closed forms on the round sphere.
//! Time derivatives, including `∂_t Γ^k_ij`, are centred differences of the
//! cached fields.

use crate::error::{HmcfError, Result};
use crate::flow::{FlowConfig, FlowState, Hmcf, Stepper};
use crate::geometry::{
    build_cache, hessian_scalar, laplace_beltrami_scalar, mean_curvature_at, norm_3tensor,
    norm_a_sq_at, trace_a3_at, Christoffel, GeometryCache, TensorGrad,
};
use crate::grid::{Grid, Immersion, Mat2, Vec3};
use crate::radial::RadialTrajectory;
use crate::shapes::Shape;

/// Residuals below `ROUNDOFF_ULPS · ε · scale / min(1, dt)²` count as roundoff;
/// second time differences amplify rounding errors by `1/dt²`.
pub const ROUNDOFF_ULPS: f64 = 1e3;

pub fn roundoff_floor(scale: f64, dt: f64) -> f64 {
    ROUNDOFF_ULPS * f64::EPSILON * scale / dt.min(1.0).powi(2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Identity {
    /// Tensor Simons identity for `Δh_ij`.
    SimonsTensor,
    /// Scalar Simons identity for `Δ|A|²`.
    SimonsNormSq,
    MetricEvolution,
    NormalEvolution,
    SecondFormEvolution,
    MeanCurvatureEvolution,
    NormSqEvolution,
}

impl Identity {
    pub const ALL: [Identity; 7] = [
        Identity::SimonsTensor,
        Identity::SimonsNormSq,
        Identity::MetricEvolution,
        Identity::NormalEvolution,
        Identity::SecondFormEvolution,
        Identity::MeanCurvatureEvolution,
        Identity::NormSqEvolution,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Identity::SimonsTensor => "simons_h",
            Identity::SimonsNormSq => "simons_a2",
            Identity::MetricEvolution => "metric_tt",
            Identity::NormalEvolution => "normal_tt",
            Identity::SecondFormEvolution => "second_form_tt",
            Identity::MeanCurvatureEvolution => "mean_curvature_tt",
            Identity::NormSqEvolution => "norm_a2_tt",
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, Identity::SimonsTensor | Identity::SimonsNormSq)
    }
}

/// Every field entering the identities at one grid point.
#[derive(Clone, Debug, Default)]
pub struct PointTerms {
    pub dim: usize,
    pub tangents: [Vec3; 2],
    pub normal: Vec3,
    pub g: Mat2,
    pub g_inv: Mat2,
    pub h: Mat2,
    pub mean_curvature: f64,
    pub norm_a_sq: f64,
    pub trace_a3: f64,
    pub norm_grad_a_sq: f64,
    /// `∂_i H`.
    pub grad_mean: [f64; 2],
    /// `∇_i∇_j H`.
    pub hess_mean: Mat2,
    pub lap_mean: f64,
    pub lap_norm_a_sq: f64,
    /// `g^kl ∇_k∇_l h_ij`.
    pub lap_h: Mat2,
    /// `∂²X / ∂t∂x^i`.
    pub x_t_tangent: [Vec3; 2],
    pub g_t: Mat2,
    pub g_tt: Mat2,
    pub h_t: Mat2,
    pub h_tt: Mat2,
    pub normal_tt: Vec3,
    pub mean_tt: f64,
    pub norm_a_sq_tt: f64,
    pub christoffel_t: Christoffel,
}

impl PointTerms {
    fn n(&self) -> usize {
        self.dim
    }

    /// `<n, ∂²X/∂t∂x^k>`.
    fn normal_x_t(&self, k: usize) -> f64 {
        self.normal.dot(&self.x_t_tangent[k])
    }

    /// `g^kl <n, X_tk> <n, X_tl>`.
    fn normal_x_t_sq(&self) -> f64 {
        let n = self.n();
        let mut s = 0.0;
        for k in 0..n {
            for l in 0..n {
                s += self.g_inv[(k, l)] * self.normal_x_t(k) * self.normal_x_t(l);
            }
        }
        s
    }

    /// `<X_ti, X_tj>`.
    fn x_t_gram(&self, i: usize, j: usize) -> f64 {
        self.x_t_tangent[i].dot(&self.x_t_tangent[j])
    }

    /// `h_il g^lm h_mj`.
    fn h_squared(&self) -> Mat2 {
        let n = self.n();
        let mut out = Mat2::zeros();
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    for m in 0..n {
                        out[(i, j)] += self.h[(i, l)] * self.g_inv[(l, m)] * self.h[(m, j)];
                    }
                }
            }
        }
        out
    }
}

fn tensor_max(m: &Mat2, n: usize) -> f64 {
    let mut s = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            s = s.max(m[(i, j)].abs());
        }
    }
    s
}

/// `Δh_ij - ∇_i∇_j H - H h_il g^lm h_mj + |A|² h_ij`, max over components.
pub fn simons_tensor_residual(p: &PointTerms) -> f64 {
    let r = p.lap_h - p.hess_mean - p.h_squared() * p.mean_curvature + p.h * p.norm_a_sq;
    tensor_max(&r, p.n())
}

/// `Δ|A|² - 2 g^ik g^jl h_kl ∇_i∇_j H - 2|∇A|² - 2H tr(A³) + 2|A|⁴`.
pub fn simons_norm_sq_residual(p: &PointTerms) -> f64 {
    let n = p.n();
    let mut hess_term = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    hess_term += p.g_inv[(i, k)] * p.g_inv[(j, l)] * p.h[(k, l)] * p.hess_mean[(i, j)];
                }
            }
        }
    }
    let rhs = 2.0 * hess_term + 2.0 * p.norm_grad_a_sq + 2.0 * p.mean_curvature * p.trace_a3
        - 2.0 * p.norm_a_sq * p.norm_a_sq;
    (p.lap_norm_a_sq - rhs).abs()
}

/// `∂²g_ij/∂t² + 2H h_ij - 2<X_ti, X_tj>`.
pub fn metric_evolution_residual(p: &PointTerms) -> f64 {
    let n = p.n();
    let mut r = Mat2::zeros();
    for i in 0..n {
        for j in 0..n {
            r[(i, j)] = p.g_tt[(i, j)] + 2.0 * p.mean_curvature * p.h[(i, j)] - 2.0 * p.x_t_gram(i, j);
        }
    }
    tensor_max(&r, n)
}

/// Right-hand side of the normal evolution identity,
/// `-g^ij ∂_iH X_j + g^ij <n, X_ti> [2 g^kl <X_j, X_tl> X_k + g^kl <X_l, X_tj> X_k - X_tj]`.
pub fn normal_evolution_rhs(p: &PointTerms) -> Vec3 {
    let n = p.n();
    let mut out = Vec3::zeros();
    for i in 0..n {
        for j in 0..n {
            let gij = p.g_inv[(i, j)];
            out -= p.tangents[j] * (gij * p.grad_mean[i]);
            let mut bracket = -p.x_t_tangent[j];
            for k in 0..n {
                for l in 0..n {
                    let gkl = p.g_inv[(k, l)];
                    bracket += p.tangents[k]
                        * (gkl
                            * (2.0 * p.tangents[j].dot(&p.x_t_tangent[l])
                                + p.tangents[l].dot(&p.x_t_tangent[j])));
                }
            }
            out += bracket * (gij * p.normal_x_t(i));
        }
    }
    out
}

pub fn normal_evolution_residual(p: &PointTerms) -> f64 {
    (p.normal_tt - normal_evolution_rhs(p)).norm()
}

/// Right-hand side of the second-form evolution identity,
/// `Δh_ij - 2H h_il h_mj g^lm + |A|² h_ij + g^kl h_ij <n, X_tk><n, X_tl> - 2 ∂_tΓ^k_ij <n, X_tk>`.
pub fn second_form_evolution_rhs(p: &PointTerms) -> Mat2 {
    let n = p.n();
    let mut out = p.lap_h - p.h_squared() * (2.0 * p.mean_curvature)
        + p.h * p.norm_a_sq
        + p.h * p.normal_x_t_sq();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out[(i, j)] -= 2.0 * p.christoffel_t[k][(i, j)] * p.normal_x_t(k);
            }
        }
    }
    out
}

pub fn second_form_evolution_residual(p: &PointTerms) -> f64 {
    tensor_max(&(p.h_tt - second_form_evolution_rhs(p)), p.n())
}

/// Right-hand side of the mean-curvature evolution identity, term by term:
///
/// ```text
/// ΔH + H|A|² - 2 g^ik g^jl h_ij <X_tk, X_tl> + H g^kl <n, X_tk><n, X_tl>
///   - 2 g^ij ∂_tΓ^k_ij <n, X_tk> + 2 g^ik g^jp g^lq h_ij ∂_t g_pq ∂_t g_kl
///   - 2 g^ik g^jl ∂_t g_kl ∂_t h_ij
/// ```
pub fn mean_curvature_evolution_rhs(p: &PointTerms) -> f64 {
    let n = p.n();
    let gi = &p.g_inv;
    let mut s = p.lap_mean + p.mean_curvature * p.norm_a_sq;
    s += p.mean_curvature * p.normal_x_t_sq();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    s -= 2.0 * gi[(i, k)] * gi[(j, l)] * p.h[(i, j)] * p.x_t_gram(k, l);
                    s -= 2.0 * gi[(i, k)] * gi[(j, l)] * p.g_t[(k, l)] * p.h_t[(i, j)];
                    for pp in 0..n {
                        for q in 0..n {
                            s += 2.0
                                * gi[(i, k)]
                                * gi[(j, pp)]
                                * gi[(l, q)]
                                * p.h[(i, j)]
                                * p.g_t[(pp, q)]
                                * p.g_t[(k, l)];
                        }
                    }
                }
                s -= 2.0 * gi[(i, j)] * p.christoffel_t[k][(i, j)] * p.normal_x_t(k);
            }
        }
    }
    s
}

pub fn mean_curvature_evolution_residual(p: &PointTerms) -> f64 {
    (p.mean_tt - mean_curvature_evolution_rhs(p)).abs()
}

/// Right-hand side of the `|A|²` evolution identity, term by term:
///
/// ```text
/// Δ|A|² - 2|∇A|² + 2|A|⁴ + 2|A|² g^pq <n, X_tp><n, X_tq>
///   + 2 g^ij g^kl ∂_t h_ik ∂_t h_jl - 8 g^im g^jn g^kl h_jl ∂_t g_mn ∂_t h_ik
///   - 4 g^im g^jn g^kl h_ik h_jl <X_tm, X_tn>
///   + 2 g^im ∂_t g_pq ∂_t g_mn h_ik h_jl (2 g^jp g^nq g^kl + g^jn g^kp g^lq)
///   - 4 g^ij g^kl h_jl ∂_tΓ^p_ik <n, X_tp>
/// ```
pub fn norm_sq_evolution_rhs(p: &PointTerms) -> f64 {
    let n = p.n();
    let gi = &p.g_inv;
    let h = &p.h;
    let mut s = p.lap_norm_a_sq - 2.0 * p.norm_grad_a_sq + 2.0 * p.norm_a_sq * p.norm_a_sq;
    s += 2.0 * p.norm_a_sq * p.normal_x_t_sq();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    s += 2.0 * gi[(i, j)] * gi[(k, l)] * p.h_t[(i, k)] * p.h_t[(j, l)];
                    for pp in 0..n {
                        s -= 4.0 * gi[(i, j)] * gi[(k, l)] * h[(j, l)] * p.christoffel_t[pp][(i, k)] * p.normal_x_t(pp);
                    }
                    for m in 0..n {
                        for nn in 0..n {
                            let g3 = gi[(i, m)] * gi[(j, nn)] * gi[(k, l)];
                            s -= 8.0 * g3 * h[(j, l)] * p.g_t[(m, nn)] * p.h_t[(i, k)];
                            s -= 4.0 * g3 * h[(i, k)] * h[(j, l)] * p.x_t_gram(m, nn);
                            for pp in 0..n {
                                for q in 0..n {
                                    let inner = 2.0 * gi[(j, pp)] * gi[(nn, q)] * gi[(k, l)]
                                        + gi[(j, nn)] * gi[(k, pp)] * gi[(l, q)];
                                    s += 2.0
                                        * gi[(i, m)]
                                        * p.g_t[(pp, q)]
                                        * p.g_t[(m, nn)]
                                        * h[(i, k)]
                                        * h[(j, l)]
                                        * inner;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    s
}

pub fn norm_sq_evolution_residual(p: &PointTerms) -> f64 {
    (p.norm_a_sq_tt - norm_sq_evolution_rhs(p)).abs()
}

pub fn residual(id: Identity, p: &PointTerms) -> f64 {
    match id {
        Identity::SimonsTensor => simons_tensor_residual(p),
        Identity::SimonsNormSq => simons_norm_sq_residual(p),
        Identity::MetricEvolution => metric_evolution_residual(p),
        Identity::NormalEvolution => normal_evolution_residual(p),
        Identity::SecondFormEvolution => second_form_evolution_residual(p),
        Identity::MeanCurvatureEvolution => mean_curvature_evolution_residual(p),
        Identity::NormSqEvolution => norm_sq_evolution_residual(p),
    }
}

/// Closed-form fields of the round sphere `X = r(t) (cos α cos β, cos α sin β, sin α)`
/// moving radially with `r_tt = -2/r`.
pub fn sphere_terms(r: f64, r_t: f64, alpha: f64, beta: f64) -> PointTerms {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let e = Vec3::new(ca * cb, ca * sb, sa);
    let e_a = Vec3::new(-sa * cb, -sa * sb, ca);
    let e_b = Vec3::new(-ca * sb, ca * cb, 0.0);
    let d = Mat2::new(1.0, 0.0, 0.0, ca * ca);
    let d_inv = Mat2::new(1.0, 0.0, 0.0, 1.0 / (ca * ca));
    let r_tt = -2.0 / r;
    let g = d * (r * r);
    let g_inv = d_inv / (r * r);
    let h = d * r;
    PointTerms {
        dim: 2,
        tangents: [e_a * r, e_b * r],
        normal: -e,
        g,
        g_inv,
        h,
        mean_curvature: mean_curvature_at(&g_inv, &h, 2),
        norm_a_sq: norm_a_sq_at(&g_inv, &h, 2),
        trace_a3: trace_a3_at(&g_inv, &h, 2),
        norm_grad_a_sq: 0.0,
        grad_mean: [0.0; 2],
        hess_mean: Mat2::zeros(),
        lap_mean: 0.0,
        lap_norm_a_sq: 0.0,
        lap_h: Mat2::zeros(),
        x_t_tangent: [e_a * r_t, e_b * r_t],
        g_t: d * (2.0 * r * r_t),
        g_tt: d * (2.0 * r_t * r_t + 2.0 * r * r_tt),
        h_t: d * r_t,
        h_tt: d * r_tt,
        normal_tt: Vec3::zeros(),
        mean_tt: 4.0 * r_t * r_t / r.powi(3) - 2.0 * r_tt / (r * r),
        norm_a_sq_tt: 12.0 * r_t * r_t / r.powi(4) - 4.0 * r_tt / r.powi(3),
        christoffel_t: [Mat2::zeros(); 2],
    }
}

/// Spatial fields of one snapshot beyond the geometry cache.
#[derive(Clone, Debug)]
pub struct SnapshotFields {
    pub cache: GeometryCache,
    pub grad_mean: Vec<[f64; 2]>,
    pub hess_mean: Vec<Mat2>,
    pub lap_mean: Vec<f64>,
    pub lap_norm_a_sq: Vec<f64>,
    pub lap_h: Vec<Mat2>,
}

/// `g^lk ∇_l (∇h)_kij` with both covariant derivatives as central stencils.
fn tensor_laplacian(grid: &Grid, cache: &GeometryCache) -> Vec<Mat2> {
    let dim = grid.dim();
    let comps: Vec<Vec<Mat2>> = (0..dim)
        .map(|k| cache.grad_a.iter().map(|t: &TensorGrad| t[k]).collect())
        .collect();
    (0..cache.len())
        .map(|p| {
            let chr = &cache.christoffel[p];
            let t = &cache.grad_a[p];
            let gi = &cache.inverse_metric[p];
            let mut out = Mat2::zeros();
            for l in 0..dim {
                for k in 0..dim {
                    let glk = gi[(l, k)];
                    if glk == 0.0 {
                        continue;
                    }
                    let dt = grid.diff(&comps[k], p, l);
                    for i in 0..dim {
                        for j in 0..dim {
                            let mut v = dt[(i, j)];
                            for m in 0..dim {
                                v -= chr[m][(l, k)] * t[m][(i, j)]
                                    + chr[m][(l, i)] * t[k][(m, j)]
                                    + chr[m][(l, j)] * t[k][(i, m)];
                            }
                            out[(i, j)] += glk * v;
                        }
                    }
                }
            }
            out
        })
        .collect()
}

impl SnapshotFields {
    pub fn new(im: &Immersion) -> Result<Self> {
        let cache = build_cache(im)?;
        Ok(Self::from_cache(im.grid(), cache))
    }

    pub fn from_cache(grid: &Grid, cache: GeometryCache) -> Self {
        let dim = grid.dim();
        let grad_mean = (0..cache.len())
            .map(|p| {
                let mut d = [0.0; 2];
                for (a, da) in d.iter_mut().enumerate().take(dim) {
                    *da = grid.diff(&cache.mean_curvature, p, a);
                }
                d
            })
            .collect();
        let hess_mean = hessian_scalar(grid, &cache, &cache.mean_curvature);
        let lap_mean = laplace_beltrami_scalar(grid, &cache, &cache.mean_curvature);
        let lap_norm_a_sq = laplace_beltrami_scalar(grid, &cache, &cache.norm_a_sq);
        let lap_h = tensor_laplacian(grid, &cache);
        SnapshotFields {
            cache,
            grad_mean,
            hess_mean,
            lap_mean,
            lap_norm_a_sq,
            lap_h,
        }
    }

    /// Spatial terms at `p`; time derivatives are left at zero.
    pub fn static_terms(&self, p: usize) -> PointTerms {
        let c = &self.cache;
        PointTerms {
            dim: c.dim,
            tangents: c.tangents[p],
            normal: c.normal[p],
            g: c.metric[p],
            g_inv: c.inverse_metric[p],
            h: c.second_form[p],
            mean_curvature: c.mean_curvature[p],
            norm_a_sq: c.norm_a_sq[p],
            trace_a3: c.trace_a3[p],
            norm_grad_a_sq: norm_3tensor(&c.grad_a[p], &c.inverse_metric[p], c.dim),
            grad_mean: self.grad_mean[p],
            hess_mean: self.hess_mean[p],
            lap_mean: self.lap_mean[p],
            lap_norm_a_sq: self.lap_norm_a_sq[p],
            lap_h: self.lap_h[p],
            ..Default::default()
        }
    }
}

/// Three consecutive time levels separated by a fixed `dt`.
#[derive(Clone, Debug)]
pub struct SnapshotTriple {
    pub prev: Immersion,
    pub cur: Immersion,
    pub next: Immersion,
    pub dt: f64,
}

struct TripleFields {
    prev: SnapshotFields,
    cur: SnapshotFields,
    next: SnapshotFields,
    dt: f64,
}

impl TripleFields {
    fn new(tr: &SnapshotTriple) -> Result<Self> {
        Ok(TripleFields {
            prev: SnapshotFields::new(&tr.prev)?,
            cur: SnapshotFields::new(&tr.cur)?,
            next: SnapshotFields::new(&tr.next)?,
            dt: tr.dt,
        })
    }

    fn terms(&self, p: usize) -> PointTerms {
        let (a, b, c) = (&self.prev.cache, &self.cur.cache, &self.next.cache);
        let d1 = 0.5 / self.dt;
        let d2 = 1.0 / (self.dt * self.dt);
        let mut t = self.cur.static_terms(p);
        for k in 0..b.dim {
            t.x_t_tangent[k] = (c.tangents[p][k] - a.tangents[p][k]) * d1;
            t.christoffel_t[k] = (c.christoffel[p][k] - a.christoffel[p][k]) * d1;
        }
        t.g_t = (c.metric[p] - a.metric[p]) * d1;
        t.g_tt = (c.metric[p] - b.metric[p] * 2.0 + a.metric[p]) * d2;
        t.h_t = (c.second_form[p] - a.second_form[p]) * d1;
        t.h_tt = (c.second_form[p] - b.second_form[p] * 2.0 + a.second_form[p]) * d2;
        t.normal_tt = (c.normal[p] - b.normal[p] * 2.0 + a.normal[p]) * d2;
        t.mean_tt = (c.mean_curvature[p] - 2.0 * b.mean_curvature[p] + a.mean_curvature[p]) * d2;
        t.norm_a_sq_tt = (c.norm_a_sq[p] - 2.0 * b.norm_a_sq[p] + a.norm_a_sq[p]) * d2;
        t
    }
}

/// Points where residuals are measured: everything on periodic grids, two
/// layers inside the evolved region on padded ones.
pub fn residual_points(grid: &Grid) -> Vec<usize> {
    grid.core_indices(2)
}

/// Max-norm residual of every identity on one snapshot triple.
pub fn residual_norms(tr: &SnapshotTriple) -> Result<[f64; 7]> {
    let fields = TripleFields::new(tr)?;
    let mut out = [0.0f64; 7];
    for p in residual_points(tr.cur.grid()) {
        let terms = fields.terms(p);
        for (k, id) in Identity::ALL.iter().enumerate() {
            let r = residual(*id, &terms);
            if !r.is_finite() {
                return Err(HmcfError::NonFiniteField {
                    field: "identity residual",
                    index: p,
                });
            }
            out[k] = out[k].max(r);
        }
    }
    Ok(out)
}

/// Pointwise residual field of one identity.
pub fn residual_field(id: Identity, tr: &SnapshotTriple) -> Result<Vec<f64>> {
    let fields = TripleFields::new(tr)?;
    Ok((0..tr.cur.len()).map(|p| residual(id, &fields.terms(p))).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResidualContext {
    AnalyticSphere,
    AnalyticCylinder,
    SimulatedFlow,
}

impl ResidualContext {
    pub fn name(&self) -> &'static str {
        match self {
            ResidualContext::AnalyticSphere => "analytic_sphere",
            ResidualContext::AnalyticCylinder => "analytic_cylinder",
            ResidualContext::SimulatedFlow => "simulated_flow",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ResidualReport {
    pub identity: Identity,
    pub context: ResidualContext,
    pub grid_levels: Vec<usize>,
    pub dts: Vec<f64>,
    pub residual_norms: Vec<f64>,
    /// `log₂` of consecutive residual ratios; empty with fewer than three levels.
    pub estimated_orders: Vec<f64>,
    /// Every level sits below the roundoff floor, so no order is defined.
    pub exact_to_roundoff: bool,
}

impl ResidualReport {
    pub fn min_order(&self) -> Option<f64> {
        self.estimated_orders.iter().cloned().reduce(f64::min)
    }

    /// Either exact to roundoff or converging at least at `order`.
    pub fn passes(&self, order: f64) -> bool {
        self.exact_to_roundoff || self.min_order().is_some_and(|o| o >= order)
    }
}

/// Builds one report per identity from residuals on successively halved grids.
pub fn convergence_reports(
    context: ResidualContext,
    levels: &[(usize, SnapshotTriple)],
    scale: f64,
) -> Result<Vec<ResidualReport>> {
    let norms: Vec<[f64; 7]> = levels
        .iter()
        .map(|(_, tr)| residual_norms(tr))
        .collect::<Result<_>>()?;
    Ok(Identity::ALL
        .iter()
        .enumerate()
        .map(|(k, id)| {
            let values: Vec<f64> = norms.iter().map(|r| r[k]).collect();
            let exact = values
                .iter()
                .zip(levels)
                .all(|(v, (_, tr))| *v <= roundoff_floor(scale, tr.dt));
            let orders = if levels.len() >= 3 && !exact {
                crate::fit::halving_orders(&values)
            } else {
                Vec::new()
            };
            ResidualReport {
                identity: *id,
                context,
                grid_levels: levels.iter().map(|(n, _)| *n).collect(),
                dts: levels.iter().map(|(_, t)| t.dt).collect(),
                residual_norms: values,
                estimated_orders: orders,
                exact_to_roundoff: exact,
            }
        })
        .collect())
}

/// Three exact snapshots of a radial family (sphere band or cylinder) at
/// `t - dt, t, t + dt`, radii taken from the radial trajectory.
pub fn radial_family_triple(
    shape: Shape,
    n: usize,
    trajectory: &RadialTrajectory,
    t: f64,
    dt: f64,
) -> Result<SnapshotTriple> {
    let at = |s: f64| -> Result<Immersion> {
        let r = trajectory
            .sample(s)
            .ok_or_else(|| HmcfError::Domain(format!("radial trajectory not available at t = {s}")))?
            .r;
        shape.with_radius(r).immersion(n)
    };
    Ok(SnapshotTriple {
        prev: at(t - dt)?,
        cur: at(t)?,
        next: at(t + dt)?,
        dt,
    })
}

/// Runs the flow at fixed `dt` for `steps` steps and returns the last three levels.
pub fn simulated_triple(im: Immersion, velocity: Vec<Vec3>, steps: usize, dt: f64) -> Result<SnapshotTriple> {
    if steps < 2 {
        return Err(HmcfError::Domain("need at least two steps for a snapshot triple".into()));
    }
    let config = FlowConfig {
        fixed_dt: Some(dt),
        ..FlowConfig::default()
    };
    let stepper = Stepper::new(Hmcf, config);
    let mut fs: FlowState = stepper.init(im, velocity)?;
    for _ in 0..steps {
        fs = stepper.step(&fs)?;
    }
    let prev = fs.prev_immersion.clone().expect("stepped state has a previous level");
    let next = stepper.step(&fs)?.immersion;
    Ok(SnapshotTriple {
        prev,
        cur: fs.immersion,
        next,
        dt,
    })
}
