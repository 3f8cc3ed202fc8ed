//! Discrete differential geometry of an immersed hypersurface.
//!
//! Every quantity is evaluated pointwise from second-order central
//! differences of the positions:
//!
//! | field | formula |
//! |-------|---------|
//! | metric | `g_ij = <∂_i X, ∂_j X>` |
//! | inner normal | normalized `∂_1 X` rotated by +π/2 (curves), `∂_1 X × ∂_2 X` (surfaces) |
//! | second form | `h_ij = <n, ∂_ij X>` |
//! | Christoffel | `Γ^k_ij = g^kl <∂_ij X, ∂_l X>` |
//! | mean curvature | `H = g^ij h_ij` |
//! | `|A|²`, `tr A³` | `g^ij g^kl h_ik h_jl`, `g^ij g^kl g^mn h_ik h_lm h_nj` |
//! | `∇A` | `∂_k h_ij - Γ^l_ki h_lj - Γ^l_kj h_il` |
//!
//! Tensors are stored as 2×2 matrices; for curves only the `(0, 0)` entry is
//! meaningful and all contractions run over the first `dim` indices.

use crate::error::{HmcfError, Result};
use crate::grid::{Grid, Immersion, Mat2, Vec3};
use rayon::prelude::*;

/// Smallest admissible metric determinant; anything below signals collapse.
pub const DET_FLOOR: f64 = 1e-10;

/// `chr[k][(i, j)] = Γ^k_ij`.
pub type Christoffel = [Mat2; 2];

/// `grad[k][(i, j)] = ∇_k h_ij`.
pub type TensorGrad = [Mat2; 2];

#[derive(Clone, Copy, Debug)]
pub struct GeometryOptions {
    pub det_floor: f64,
}

impl Default for GeometryOptions {
    fn default() -> Self {
        GeometryOptions {
            det_floor: DET_FLOOR,
        }
    }
}

/// All intrinsic and extrinsic fields of one immersion.
///
/// Immutable after construction; every vector is indexed by flat grid index.
#[derive(Clone, Debug)]
pub struct GeometryCache {
    pub dim: usize,
    pub tangents: Vec<[Vec3; 2]>,
    pub second_derivs: Vec<[[Vec3; 2]; 2]>,
    pub metric: Vec<Mat2>,
    pub inverse_metric: Vec<Mat2>,
    pub christoffel: Vec<Christoffel>,
    pub second_form: Vec<Mat2>,
    pub mean_curvature: Vec<f64>,
    pub normal: Vec<Vec3>,
    pub norm_a_sq: Vec<f64>,
    pub trace_a3: Vec<f64>,
    pub grad_a: Vec<TensorGrad>,
    pub norm_grad_a_sq: Vec<f64>,
}

impl GeometryCache {
    pub fn len(&self) -> usize {
        self.metric.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metric.is_empty()
    }

    pub fn det_metric(&self, idx: usize) -> f64 {
        metric_det(&self.metric[idx], self.dim)
    }

    /// Smallest metric determinant over the evolved points.
    pub fn min_det(&self, grid: &Grid) -> f64 {
        (0..self.len())
            .filter(|&i| grid.is_evolved(i))
            .map(|i| self.det_metric(i))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest `|H|` over the evolved points.
    pub fn max_abs_mean_curvature(&self, grid: &Grid) -> f64 {
        (0..self.len())
            .filter(|&i| grid.is_evolved(i))
            .map(|i| self.mean_curvature[i].abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) struct Jet {
    pub tangents: Vec<[Vec3; 2]>,
    pub second: Vec<[[Vec3; 2]; 2]>,
}

pub(crate) fn jet(im: &Immersion) -> Jet {
    let n = im.dim();
    let (tangents, second): (Vec<_>, Vec<_>) = (0..im.len())
        .into_par_iter()
        .map(|p| {
            let mut t = [Vec3::zeros(); 2];
            let mut s = [[Vec3::zeros(); 2]; 2];
            for a in 0..n {
                t[a] = im.tangent(p, a);
                for b in a..n {
                    s[a][b] = im.second(p, a, b);
                    s[b][a] = s[a][b];
                }
            }
            (t, s)
        })
        .unzip();
    Jet { tangents, second }
}

fn check_finite<'a>(field: &'static str, values: impl Iterator<Item = &'a Mat2>) -> Result<()> {
    for (index, m) in values.enumerate() {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(HmcfError::NonFiniteField { field, index });
        }
    }
    Ok(())
}

pub fn metric_det(g: &Mat2, dim: usize) -> f64 {
    if dim == 1 {
        g[(0, 0)]
    } else {
        g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)]
    }
}

fn metric_from_tangents(t: &[Vec3; 2], n: usize) -> Mat2 {
    let mut g = Mat2::zeros();
    for i in 0..n {
        for j in i..n {
            g[(i, j)] = t[i].dot(&t[j]);
            g[(j, i)] = g[(i, j)];
        }
    }
    g
}

/// `g_ij = <∂_i X, ∂_j X>` with central-difference tangents.
pub fn compute_metric(im: &Immersion) -> Result<Vec<Mat2>> {
    let n = im.dim();
    let metric: Vec<Mat2> = (0..im.len())
        .into_par_iter()
        .map(|p| {
            let mut t = [Vec3::zeros(); 2];
            for (a, ta) in t.iter_mut().enumerate().take(n) {
                *ta = im.tangent(p, a);
            }
            metric_from_tangents(&t, n)
        })
        .collect();
    check_finite("metric", metric.iter())?;
    Ok(metric)
}

/// Closed-form inverse of one metric, `None` when `det ≤ det_floor`.
pub fn invert_metric(g: &Mat2, dim: usize, det_floor: f64) -> Option<Mat2> {
    let det = metric_det(g, dim);
    if !(det > det_floor) {
        return None;
    }
    let mut inv = Mat2::zeros();
    if dim == 1 {
        inv[(0, 0)] = 1.0 / det;
    } else {
        inv[(0, 0)] = g[(1, 1)] / det;
        inv[(1, 1)] = g[(0, 0)] / det;
        inv[(0, 1)] = -g[(0, 1)] / det;
        inv[(1, 0)] = -g[(1, 0)] / det;
    }
    Some(inv)
}

/// Pointwise exact inverse; `MetricDegenerate` at the first point with `det ≤ det_floor`.
pub fn compute_inverse_metric(metric: &[Mat2], dim: usize, det_floor: f64) -> Result<Vec<Mat2>> {
    metric
        .iter()
        .enumerate()
        .map(|(index, g)| {
            invert_metric(g, dim, det_floor).ok_or(HmcfError::MetricDegenerate {
                index,
                det: metric_det(g, dim),
            })
        })
        .collect()
}

fn raw_normal(t: &[Vec3; 2], dim: usize) -> Option<Vec3> {
    let v = if dim == 1 {
        Vec3::new(-t[0].y, t[0].x, 0.0)
    } else {
        t[0].cross(&t[1])
    };
    let scale = if dim == 1 {
        t[0].norm()
    } else {
        t[0].norm() * t[1].norm()
    };
    let len = v.norm();
    if !(len > 1e-12 * scale) || scale == 0.0 {
        None
    } else {
        Some(v / len)
    }
}

/// Decides whether the raw normals must be negated to point inward.
///
/// Closed grids use the sign of the enclosed volume `Σ <X - c, ν> |J|`;
/// open grids use the mean cosine between `ν` and the centred position with
/// lift directions projected out, flipping only when it exceeds 1/2.
fn orientation_flip(im: &Immersion, raw: &[Vec3], tangents: &[[Vec3; 2]]) -> bool {
    let grid = im.grid();
    let c = im.centroid();
    if grid.is_closed() {
        let volume: f64 = (0..im.len())
            .map(|p| {
                let jac = if im.dim() == 1 {
                    tangents[p][0].norm()
                } else {
                    tangents[p][0].cross(&tangents[p][1]).norm()
                };
                (im.points()[p] - c).dot(&raw[p]) * jac
            })
            .sum();
        return volume > 0.0;
    }
    let lifts: Vec<Vec3> = grid
        .lifts()
        .iter()
        .filter(|l| l.norm() > 0.0)
        .map(|l| l.normalize())
        .collect();
    let mut sum = 0.0;
    let mut count = 0usize;
    for p in 0..im.len() {
        if !grid.is_evolved(p) {
            continue;
        }
        let mut d = im.points()[p] - c;
        for l in &lifts {
            d -= l * l.dot(&d);
        }
        let len = d.norm();
        if len > 1e-12 {
            sum += raw[p].dot(&d) / len;
            count += 1;
        }
    }
    count > 0 && sum / count as f64 > 0.5
}

fn normals_from_tangents(im: &Immersion, tangents: &[[Vec3; 2]]) -> Result<Vec<Vec3>> {
    let dim = im.dim();
    let raw: Vec<Vec3> = tangents
        .iter()
        .enumerate()
        .map(|(index, t)| raw_normal(t, dim).ok_or(HmcfError::DegenerateFrame { index }))
        .collect::<Result<_>>()?;
    let flip = orientation_flip(im, &raw, tangents);
    Ok(if flip { raw.into_iter().map(|v| -v).collect() } else { raw })
}

/// Unit inner normals.
pub fn compute_normal(im: &Immersion) -> Result<Vec<Vec3>> {
    let j = jet(im);
    normals_from_tangents(im, &j.tangents)
}

fn second_form_from(second: &[[[Vec3; 2]; 2]], normal: &[Vec3], dim: usize) -> Vec<Mat2> {
    second
        .iter()
        .zip(normal)
        .map(|(s, nu)| {
            let mut h = Mat2::zeros();
            for i in 0..dim {
                for j in 0..dim {
                    h[(i, j)] = nu.dot(&s[i][j]);
                }
            }
            h
        })
        .collect()
}

/// `h_ij = <n, ∂_ij X>`.
pub fn compute_second_form(im: &Immersion, normal: &[Vec3]) -> Result<Vec<Mat2>> {
    let j = jet(im);
    let h = second_form_from(&j.second, normal, im.dim());
    check_finite("second_form", h.iter())?;
    Ok(h)
}

/// `g^ij h_ij` at one point.
pub fn mean_curvature_at(g_inv: &Mat2, h: &Mat2, dim: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            s += g_inv[(i, j)] * h[(i, j)];
        }
    }
    s
}

/// Mixed shape operator `A^i_j = g^ik h_kj`, restricted to `dim`.
fn shape_operator(g_inv: &Mat2, h: &Mat2, dim: usize) -> Mat2 {
    let mut a = Mat2::zeros();
    for i in 0..dim {
        for j in 0..dim {
            for k in 0..dim {
                a[(i, j)] += g_inv[(i, k)] * h[(k, j)];
            }
        }
    }
    a
}

/// `|A|² = g^ij g^kl h_ik h_jl`.
pub fn norm_a_sq_at(g_inv: &Mat2, h: &Mat2, dim: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            for k in 0..dim {
                for l in 0..dim {
                    s += g_inv[(i, j)] * g_inv[(k, l)] * h[(i, k)] * h[(j, l)];
                }
            }
        }
    }
    s
}

/// `tr(A³) = g^ij g^kl g^mn h_ik h_lm h_nj`.
pub fn trace_a3_at(g_inv: &Mat2, h: &Mat2, dim: usize) -> f64 {
    let a = shape_operator(g_inv, h, dim);
    let a3 = a * a * a;
    (0..dim).map(|i| a3[(i, i)]).sum()
}

pub fn compute_mean_curvature(g_inv: &[Mat2], h: &[Mat2], dim: usize) -> Vec<f64> {
    g_inv
        .iter()
        .zip(h)
        .map(|(gi, hh)| mean_curvature_at(gi, hh, dim))
        .collect()
}

fn christoffel_from(jet: &Jet, g_inv: &[Mat2], dim: usize) -> Vec<Christoffel> {
    (0..g_inv.len())
        .into_par_iter()
        .map(|p| {
            let mut chr = [Mat2::zeros(); 2];
            for (k, ck) in chr.iter_mut().enumerate().take(dim) {
                for i in 0..dim {
                    for j in 0..dim {
                        let mut s = 0.0;
                        for l in 0..dim {
                            s += g_inv[p][(k, l)] * jet.second[p][i][j].dot(&jet.tangents[p][l]);
                        }
                        ck[(i, j)] = s;
                    }
                }
            }
            chr
        })
        .collect()
}

/// `Γ^k_ij = g^kl <∂_ij X, ∂_l X>`.
pub fn compute_christoffel(im: &Immersion, g_inv: &[Mat2]) -> Result<Vec<Christoffel>> {
    let j = jet(im);
    let chr = christoffel_from(&j, g_inv, im.dim());
    check_finite("christoffel", chr.iter().flat_map(|c| c.iter()))?;
    Ok(chr)
}

/// Covariant derivative `∇_k h_ij` and its squared norm `|∇A|²`.
pub fn compute_grad_a(
    grid: &Grid,
    christoffel: &[Christoffel],
    second_form: &[Mat2],
    inverse_metric: &[Mat2],
) -> (Vec<TensorGrad>, Vec<f64>) {
    let dim = grid.dim();
    let grad: Vec<TensorGrad> = (0..second_form.len())
        .into_par_iter()
        .map(|p| covariant_derivative_2tensor(grid, second_form, &christoffel[p], p))
        .collect();
    let norms = grad
        .iter()
        .zip(inverse_metric)
        .map(|(g, gi)| norm_3tensor(g, gi, dim))
        .collect();
    (grad, norms)
}

/// `∇_k T_ij = ∂_k T_ij - Γ^l_ki T_lj - Γ^l_kj T_il` for a symmetric 2-tensor field.
pub fn covariant_derivative_2tensor(
    grid: &Grid,
    field: &[Mat2],
    chr: &Christoffel,
    p: usize,
) -> TensorGrad {
    let dim = grid.dim();
    let t = &field[p];
    let mut out = [Mat2::zeros(); 2];
    for (k, ok) in out.iter_mut().enumerate().take(dim) {
        let dk = grid.diff(field, p, k);
        for i in 0..dim {
            for j in 0..dim {
                let mut v = dk[(i, j)];
                for l in 0..dim {
                    v -= chr[l][(k, i)] * t[(l, j)] + chr[l][(k, j)] * t[(i, l)];
                }
                ok[(i, j)] = v;
            }
        }
    }
    out
}

/// `g^kp g^iq g^jr T_kij T_pqr`.
pub fn norm_3tensor(t: &TensorGrad, g_inv: &Mat2, dim: usize) -> f64 {
    let mut s = 0.0;
    for k in 0..dim {
        for p in 0..dim {
            for i in 0..dim {
                for q in 0..dim {
                    for j in 0..dim {
                        for r in 0..dim {
                            s += g_inv[(k, p)]
                                * g_inv[(i, q)]
                                * g_inv[(j, r)]
                                * t[k][(i, j)]
                                * t[p][(q, r)];
                        }
                    }
                }
            }
        }
    }
    s
}

/// Single-pass construction of every cached field with the default floor.
pub fn build_cache(im: &Immersion) -> Result<GeometryCache> {
    build_cache_with(im, &GeometryOptions::default())
}

pub fn build_cache_with(im: &Immersion, opts: &GeometryOptions) -> Result<GeometryCache> {
    let dim = im.dim();
    let j = jet(im);
    let metric: Vec<Mat2> = j.tangents.iter().map(|t| metric_from_tangents(t, dim)).collect();
    check_finite("metric", metric.iter())?;
    let inverse_metric = compute_inverse_metric(&metric, dim, opts.det_floor)?;
    let normal = normals_from_tangents(im, &j.tangents)?;
    let second_form = second_form_from(&j.second, &normal, dim);
    check_finite("second_form", second_form.iter())?;
    let christoffel = christoffel_from(&j, &inverse_metric, dim);
    let mean_curvature = compute_mean_curvature(&inverse_metric, &second_form, dim);
    let norm_a_sq = inverse_metric
        .iter()
        .zip(&second_form)
        .map(|(gi, h)| norm_a_sq_at(gi, h, dim))
        .collect();
    let trace_a3 = inverse_metric
        .iter()
        .zip(&second_form)
        .map(|(gi, h)| trace_a3_at(gi, h, dim))
        .collect();
    let (grad_a, norm_grad_a_sq) = compute_grad_a(im.grid(), &christoffel, &second_form, &inverse_metric);
    if let Some(index) = mean_curvature.iter().position(|h: &f64| !h.is_finite()) {
        return Err(HmcfError::NonFiniteField {
            field: "mean_curvature",
            index,
        });
    }
    Ok(GeometryCache {
        dim,
        tangents: j.tangents,
        second_derivs: j.second,
        metric,
        inverse_metric,
        christoffel,
        second_form,
        mean_curvature,
        normal,
        norm_a_sq,
        trace_a3,
        grad_a,
        norm_grad_a_sq,
    })
}

/// `H n` at every point.
pub fn mean_curvature_vector(cache: &GeometryCache) -> Vec<Vec3> {
    cache
        .mean_curvature
        .iter()
        .zip(&cache.normal)
        .map(|(h, n)| n * *h)
        .collect()
}

/// `Δ_g F = g^ij (∂_ij F - Γ^k_ij ∂_k F)` for a periodic vector field.
pub fn laplace_beltrami(im: &Immersion, cache: &GeometryCache, field: &[Vec3]) -> Vec<Vec3> {
    let grid = im.grid();
    let dim = im.dim();
    (0..im.len())
        .into_par_iter()
        .map(|p| {
            let mut d1 = [Vec3::zeros(); 2];
            for (k, dk) in d1.iter_mut().enumerate().take(dim) {
                *dk = grid.diff(field, p, k);
            }
            let mut out = Vec3::zeros();
            for i in 0..dim {
                for j in 0..dim {
                    let mut v = grid.diff2(field, p, i, j);
                    for (k, dk) in d1.iter().enumerate().take(dim) {
                        v -= dk * cache.christoffel[p][k][(i, j)];
                    }
                    out += v * cache.inverse_metric[p][(i, j)];
                }
            }
            out
        })
        .collect()
}

/// The same operator applied to the position field itself (lift-aware).
pub fn laplace_beltrami_position(cache: &GeometryCache) -> Vec<Vec3> {
    let dim = cache.dim;
    (0..cache.len())
        .map(|p| {
            let mut out = Vec3::zeros();
            for i in 0..dim {
                for j in 0..dim {
                    let mut v = cache.second_derivs[p][i][j];
                    for k in 0..dim {
                        v -= cache.tangents[p][k] * cache.christoffel[p][k][(i, j)];
                    }
                    out += v * cache.inverse_metric[p][(i, j)];
                }
            }
            out
        })
        .collect()
}

/// Covariant Hessian `∇_i∇_j f = ∂_ij f - Γ^k_ij ∂_k f` of a scalar field.
pub fn hessian_scalar(grid: &Grid, cache: &GeometryCache, f: &[f64]) -> Vec<Mat2> {
    let dim = grid.dim();
    (0..f.len())
        .into_par_iter()
        .map(|p| {
            let mut d1 = [0.0; 2];
            for (k, dk) in d1.iter_mut().enumerate().take(dim) {
                *dk = grid.diff(f, p, k);
            }
            let mut hess = Mat2::zeros();
            for i in 0..dim {
                for j in 0..dim {
                    let mut v = grid.diff2(f, p, i, j);
                    for (k, dk) in d1.iter().enumerate().take(dim) {
                        v -= cache.christoffel[p][k][(i, j)] * dk;
                    }
                    hess[(i, j)] = v;
                }
            }
            hess
        })
        .collect()
}

/// Scalar Laplace–Beltrami `g^ij ∇_i∇_j f`.
pub fn laplace_beltrami_scalar(grid: &Grid, cache: &GeometryCache, f: &[f64]) -> Vec<f64> {
    hessian_scalar(grid, cache, f)
        .iter()
        .zip(&cache.inverse_metric)
        .map(|(h, gi)| mean_curvature_at(gi, h, grid.dim()))
        .collect()
}

/// Conservative Laplace–Beltrami `(1/√g) ∂_i(√g g^ij ∂_j X)` of the positions
/// with fluxes on half-points.
///
/// This shares no stencil with the cached `H n`, so comparing the two gives a
/// genuine second-order check of the Gauss formula `Δ_g X = H n`. Points whose
/// half-point neighbours fall off a padded axis get `H n` from the cache.
pub fn laplace_beltrami_divergence(im: &Immersion, cache: &GeometryCache) -> Vec<Vec3> {
    let grid = im.grid();
    let dim = im.dim();
    let lifts = grid.lifts();
    let pts = im.points();
    let shape = grid.shape();
    let periodic: Vec<bool> = grid
        .axes()
        .iter()
        .map(|a| matches!(a.boundary, crate::grid::Boundary::Periodic { .. }))
        .collect();

    // neighbour along `axis` in direction +1, with its lift offset
    let step = |p: usize, axis: usize| -> Option<(usize, Vec3)> {
        let mut c = grid.coords(p);
        if c[axis] + 1 < shape[axis] {
            c[axis] += 1;
            Some((grid.index(c), Vec3::zeros()))
        } else if periodic[axis] {
            c[axis] = 0;
            Some((grid.index(c), lifts[axis]))
        } else {
            None
        }
    };
    let flux = |p: usize, axis: usize| -> Option<Vec3> {
        let (q, lift) = step(p, axis)?;
        let h = grid.spacing(axis);
        let mut t = [Vec3::zeros(); 2];
        t[axis] = (pts[q] + lift - pts[p]) / h;
        if dim == 2 {
            let other = 1 - axis;
            t[other] = 0.5 * (cache.tangents[p][other] + cache.tangents[q][other]);
        }
        let g = metric_from_tangents(&t, dim);
        let det = metric_det(&g, dim);
        let gi = invert_metric(&g, dim, 0.0)?;
        let mut f = Vec3::zeros();
        for (j, tj) in t.iter().enumerate().take(dim) {
            f += tj * gi[(axis, j)];
        }
        Some(f * det.sqrt())
    };
    let back = |p: usize, axis: usize| -> Option<usize> {
        let mut c = grid.coords(p);
        if c[axis] > 0 {
            c[axis] -= 1;
            Some(grid.index(c))
        } else if periodic[axis] {
            c[axis] = shape[axis] - 1;
            Some(grid.index(c))
        } else {
            None
        }
    };

    (0..im.len())
        .into_par_iter()
        .map(|p| {
            let mut div = Vec3::zeros();
            for axis in 0..dim {
                let plus = flux(p, axis);
                let minus = back(p, axis).and_then(|m| flux(m, axis));
                match (plus, minus) {
                    (Some(fp), Some(fm)) => div += (fp - fm) / grid.spacing(axis),
                    _ => return cache.normal[p] * cache.mean_curvature[p],
                }
            }
            div / cache.det_metric(p).sqrt()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::Shape;
    use std::f64::consts::{FRAC_PI_4, TAU};

    fn core_max(grid: &Grid, f: impl Fn(usize) -> f64) -> f64 {
        grid.core_indices(2).into_iter().map(f).fold(0.0, f64::max)
    }

    #[test]
    fn inverse_metric_examples() {
        let id = Mat2::identity();
        assert_eq!(invert_metric(&id, 2, DET_FLOOR).unwrap(), id);
        let d = Mat2::new(4.0, 0.0, 0.0, 1.0);
        let inv = invert_metric(&d, 2, DET_FLOOR).unwrap();
        assert!((inv - Mat2::new(0.25, 0.0, 0.0, 1.0)).norm() < 1e-15);
        let m = Mat2::new(2.0, 1.0, 1.0, 1.0);
        let inv = invert_metric(&m, 2, DET_FLOOR).unwrap();
        assert!((inv - Mat2::new(1.0, -1.0, -1.0, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn inverse_metric_times_metric_is_identity() {
        let im = Shape::Torus { major: 2.0, minor: 0.7 }.immersion(24).unwrap();
        let c = build_cache(&im).unwrap();
        for (g, gi) in c.metric.iter().zip(&c.inverse_metric) {
            let e = (g * gi - Mat2::identity()).abs().max();
            assert!(e < 1e-12, "{e}");
        }
    }

    #[test]
    fn degenerate_metric_is_reported() {
        let m = vec![Mat2::new(1e-6, 0.0, 0.0, 1e-6)];
        assert!(matches!(
            compute_inverse_metric(&m, 2, DET_FLOOR),
            Err(HmcfError::MetricDegenerate { index: 0, .. })
        ));
    }

    #[test]
    fn flat_point_cloud_is_metric_degenerate() {
        let grid = Shape::Circle { r: 1.0 }.grid(16).unwrap();
        let im = Immersion::new(grid, vec![Vec3::new(0.3, -0.2, 0.0); 16]).unwrap();
        assert!(matches!(build_cache(&im), Err(HmcfError::MetricDegenerate { .. })));
    }

    #[test]
    fn unit_circle_fields() {
        let im = Shape::Circle { r: 1.0 }.immersion(64).unwrap();
        let c = build_cache(&im).unwrap();
        let d = TAU / 64.0;
        for p in 0..64 {
            assert!((c.metric[p][(0, 0)] - 1.0).abs() < d * d);
            assert!((c.second_form[p][(0, 0)] - 1.0).abs() < d * d);
            assert!((c.mean_curvature[p] - 1.0).abs() < d * d);
            assert!(c.christoffel[p][0][(0, 0)].abs() < 1e-13);
        }
        // inner normal at (1, 0)
        assert!((c.normal[0] - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn clockwise_circle_still_gets_inner_normal() {
        let grid = Shape::Circle { r: 1.0 }.grid(32).unwrap();
        let im = Immersion::from_fn(grid, |c| {
            let t = -(c[0] as f64) * TAU / 32.0;
            Vec3::new(2.0 + t.cos(), t.sin(), 0.0)
        })
        .unwrap();
        let c = build_cache(&im).unwrap();
        assert!((c.normal[0] - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-14);
        assert!(c.mean_curvature[0] > 0.99);
    }

    #[test]
    fn sphere_band_fields_match_closed_forms() {
        let r = 1.5;
        let shape = Shape::SphereBand { r, alpha_max: FRAC_PI_4 };
        let im = shape.immersion(48).unwrap();
        let c = build_cache(&im).unwrap();
        let grid = im.grid();
        let tol = 5.0 * grid.spacing(1).powi(2) * r * r;
        let err = core_max(grid, |p| {
            let [a, b] = shape.params(grid, grid.coords(p));
            let g = Mat2::new(r * r, 0.0, 0.0, r * r * a.cos().powi(2));
            let h = Mat2::new(r, 0.0, 0.0, r * a.cos().powi(2));
            let n = -Vec3::new(a.cos() * b.cos(), a.cos() * b.sin(), a.sin());
            let chr122 = a.cos() * a.sin();
            let chr212 = -a.sin() / a.cos();
            (c.metric[p] - g)
                .abs()
                .max()
                .max((c.second_form[p] - h).abs().max())
                .max((c.normal[p] - n).norm())
                .max((c.mean_curvature[p] - 2.0 / r).abs())
                .max((c.christoffel[p][0][(1, 1)] - chr122).abs())
                .max((c.christoffel[p][1][(0, 1)] - chr212).abs())
                .max(c.christoffel[p][0][(0, 0)].abs())
                .max(c.christoffel[p][1][(1, 1)].abs())
        });
        assert!(err < tol, "{err} vs {tol}");
    }

    #[test]
    fn cylinder_fields_match_closed_forms() {
        let shape = Shape::Cylinder { r: 1.0, length: 4.0 };
        let im = shape.immersion(64).unwrap();
        let c = build_cache(&im).unwrap();
        let d = TAU / 64.0;
        for p in 0..im.len() {
            assert!((c.metric[p][(0, 0)] - 1.0).abs() < d * d);
            assert!((c.metric[p][(1, 1)] - 1.0).abs() < 1e-12);
            assert!((c.second_form[p][(0, 0)] - 1.0).abs() < d * d);
            assert!(c.second_form[p][(1, 1)].abs() < 1e-12);
            assert!((c.mean_curvature[p] - 1.0).abs() < d * d);
            assert!((c.norm_a_sq[p] - 1.0).abs() < d * d);
            assert!((c.trace_a3[p] - 1.0).abs() < 2.0 * d * d);
            for k in 0..2 {
                assert!(c.christoffel[p][k].abs().max() < 1e-12);
            }
        }
        let [a, _] = shape.params(im.grid(), [0, 0]);
        assert_eq!(a, 0.0);
        assert!((c.normal[0] - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn contractions_are_algebraically_exact() {
        let im = Shape::Torus { major: 2.0, minor: 0.8 }.immersion(20).unwrap();
        let c = build_cache(&im).unwrap();
        for p in 0..im.len() {
            let gi = &c.inverse_metric[p];
            let h = &c.second_form[p];
            let hh = gi[(0, 0)] * h[(0, 0)] + 2.0 * gi[(0, 1)] * h[(0, 1)] + gi[(1, 1)] * h[(1, 1)];
            assert!((c.mean_curvature[p] - hh).abs() <= 1e-13 * hh.abs().max(1.0));
            let a = gi * h;
            let a2 = (a * a).trace();
            let a3 = (a * a * a).trace();
            assert!((c.norm_a_sq[p] - a2).abs() <= 1e-13 * a2.abs().max(1.0));
            assert!((c.trace_a3[p] - a3).abs() <= 1e-13 * a3.abs().max(1.0));
        }
    }

    #[test]
    fn laplace_beltrami_of_constant_vanishes() {
        let im = Shape::Torus { major: 2.0, minor: 0.8 }.immersion(24).unwrap();
        let c = build_cache(&im).unwrap();
        let f = vec![Vec3::new(1.0, -2.0, 0.5); im.len()];
        let lap = laplace_beltrami(&im, &c, &f);
        assert!(lap.iter().all(|v| v.norm() < 1e-10));
    }

    #[test]
    fn position_laplacian_equals_mean_curvature_vector_on_cylinder() {
        let shape = Shape::Cylinder { r: 2.0, length: 3.0 };
        let im = shape.immersion(64).unwrap();
        let c = build_cache(&im).unwrap();
        let lap = laplace_beltrami_position(&c);
        let d = TAU / 64.0;
        for p in 0..im.len() {
            let [a, _] = shape.params(im.grid(), im.grid().coords(p));
            let exact = -0.5 * Vec3::new(a.cos(), a.sin(), 0.0);
            assert!((lap[p] - exact).norm() < d * d);
        }
    }

    #[test]
    fn ellipse_has_nonparallel_second_form() {
        let im = Shape::Ellipse { a: 2.0, b: 1.0 }.immersion(128).unwrap();
        let c = build_cache(&im).unwrap();
        let max = c.norm_grad_a_sq.iter().cloned().fold(0.0, f64::max);
        assert!(max > 0.1, "{max}");
    }
}
