//! Vector-Jacobian products for each stage of the forward pipeline, and
//! their composition into per-Gaussian parameter gradients.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Matrix4, SMatrix, Vector3, Vector4};

use super::params::{dyn_col, static_col};
use crate::math::{condition_at_time, left_matrix, right_matrix, rot3_matrix, sigmoid};
use crate::raster::{perspective_jacobian, Camera, SplatPrimitive, ALPHA_MAX, LOW_PASS};
use crate::scene::sh::{sh_basis, sh_basis_grad};
use crate::scene::{Gaussian3D, Gaussian4D, ShColor};

/// Loss gradient with respect to one screen-space primitive.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct PrimGrad {
    pub mean2: [f64; 2],
    /// With respect to the conic entries `(A, B, C)` of
    /// `-0.5 (A dx^2 + C dy^2) - B dx dy`.
    pub conic: [f64; 3],
    pub rgb: [f64; 3],
    /// With respect to the base alpha before the per-pixel falloff.
    pub alpha: f64,
}

impl PrimGrad {
    pub fn add(&mut self, o: &PrimGrad) {
        for i in 0..2 {
            self.mean2[i] += o.mean2[i];
        }
        for i in 0..3 {
            self.conic[i] += o.conic[i];
            self.rgb[i] += o.rgb[i];
        }
        self.alpha += o.alpha;
    }
}

/// Gradient with respect to the (symmetric) screen covariance, given the
/// gradient with respect to the conic scalars.
pub(crate) fn conic_vjp(conic: [f64; 3], g: [f64; 3]) -> Matrix2<f64> {
    let k = Matrix2::new(conic[0], conic[1], conic[1], conic[2]);
    let gk = Matrix2::new(g[0], 0.5 * g[1], 0.5 * g[1], g[2]);
    -(k * gk * k)
}

/// Backpropagates through `mean2 = pi(W mu + t)` and
/// `cov2 = J W Sigma W^T J^T + LOW_PASS I`.
pub(crate) fn project_vjp(
    mean: &Vector3<f64>,
    cov: &Matrix3<f64>,
    camera: &Camera,
    g_mean2: [f64; 2],
    g_cov2: &Matrix2<f64>,
) -> (Vector3<f64>, Matrix3<f64>) {
    let w = camera.rotation();
    let p = camera.to_camera(mean);
    let j = perspective_jacobian(camera, &p);
    let t = j * w;
    let g_cov3 = t.transpose() * g_cov2 * t;
    let g_t: Matrix2x3<f64> = 2.0 * g_cov2 * t * cov;
    let g_j = g_t * w.transpose();

    let (fx, fy) = (camera.fx, camera.fy);
    let iz = 1.0 / p.z;
    let iz2 = iz * iz;
    let iz3 = iz2 * iz;
    let mut gp = Vector3::new(
        g_j[(0, 2)] * (-fx * iz2),
        g_j[(1, 2)] * (-fy * iz2),
        -fx * iz2 * g_j[(0, 0)] - fy * iz2 * g_j[(1, 1)]
            + 2.0 * fx * p.x * iz3 * g_j[(0, 2)]
            + 2.0 * fy * p.y * iz3 * g_j[(1, 2)],
    );
    gp.x += fx * iz * g_mean2[0];
    gp.y += fy * iz * g_mean2[1];
    gp.z -= fx * p.x * iz2 * g_mean2[0] + fy * p.y * iz2 * g_mean2[1];
    (w.transpose() * gp, g_cov3)
}

/// Backpropagates through `Sigma = R diag(exp(2 s)) R^T` for a symmetric
/// upstream gradient.
pub(crate) fn rotated_diag_vjp<const D: usize>(
    r: &SMatrix<f64, D, D>,
    log_scales: &[f64; D],
    g: &SMatrix<f64, D, D>,
) -> (SMatrix<f64, D, D>, [f64; D]) {
    let var = SMatrix::<f64, D, D>::from_diagonal(&SMatrix::<f64, D, 1>::from_fn(|k, _| (2.0 * log_scales[k]).exp()));
    let g_r = 2.0 * g * r * var;
    let g_s = std::array::from_fn(|k| {
        let col = r.column(k);
        2.0 * var[(k, k)] * (col.transpose() * g * col)[(0, 0)]
    });
    (g_r, g_s)
}

/// Removes the radial part of a quaternion gradient, which is what the
/// normalization inside the forward pass does.
pub(crate) fn tangent(q: [f64; 4], g: [f64; 4]) -> [f64; 4] {
    let dot: f64 = q.iter().zip(&g).map(|(a, b)| a * b).sum();
    std::array::from_fn(|i| g[i] - dot * q[i])
}

pub(crate) fn rot3_vjp(q: [f64; 4], g_r: &Matrix3<f64>) -> [f64; 4] {
    let [w, x, y, z] = q;
    let dw = Matrix3::new(0.0, -z, y, z, 0.0, -x, -y, x, 0.0);
    let dx = Matrix3::new(0.0, y, z, y, -2.0 * x, -w, z, w, -2.0 * x);
    let dy = Matrix3::new(-2.0 * y, x, w, x, 0.0, z, -w, z, -2.0 * y);
    let dz = Matrix3::new(-2.0 * z, -w, x, w, -2.0 * z, y, x, y, 0.0);
    let raw = [dw, dx, dy, dz].map(|d| 2.0 * g_r.component_mul(&d).sum());
    tangent(q, raw)
}

fn unit(k: usize) -> [f64; 4] {
    std::array::from_fn(|i| if i == k { 1.0 } else { 0.0 })
}

/// Gradients of `R = L(a) Rr(p)` with respect to both factors.
pub(crate) fn rot4_vjp(a: [f64; 4], p: [f64; 4], g_r: &Matrix4<f64>) -> ([f64; 4], [f64; 4]) {
    let l = left_matrix(a);
    let rr = right_matrix(p);
    let g_l = g_r * rr.transpose();
    let g_rr = l.transpose() * g_r;
    let ga = std::array::from_fn(|k| g_l.component_mul(&left_matrix(unit(k))).sum());
    let gp = std::array::from_fn(|k| g_rr.component_mul(&right_matrix(unit(k))).sum());
    (tangent(a, ga), tangent(p, gp))
}

/// Backpropagates through temporal conditioning. `g_cov` is symmetric; the
/// eigenvalue floor is treated as the identity.
pub(crate) fn condition_vjp(
    mean4: &Vector4<f64>,
    cov4: &Matrix4<f64>,
    t: f64,
    g_mean: &Vector3<f64>,
    g_cov: &Matrix3<f64>,
    g_weight: f64,
) -> (Vector4<f64>, Matrix4<f64>) {
    let s44 = cov4[(3, 3)];
    let dt = t - mean4[3];
    let b = Vector3::new(cov4[(0, 3)], cov4[(1, 3)], cov4[(2, 3)]);
    let w = (-0.5 * dt * dt / s44).exp();
    let gmb = g_mean.dot(&b);
    let g_mu_t = -gmb / s44 + g_weight * w * dt / s44;
    let g_b = g_mean * (dt / s44) - g_cov * b * (2.0 / s44);
    let g_s44 = -gmb * dt / (s44 * s44)
        + (b.transpose() * g_cov * b)[(0, 0)] / (s44 * s44)
        + g_weight * w * 0.5 * dt * dt / (s44 * s44);

    let mut g4 = Matrix4::zeros();
    g4.fixed_view_mut::<3, 3>(0, 0).copy_from(g_cov);
    for i in 0..3 {
        g4[(i, 3)] = 0.5 * g_b[i];
        g4[(3, i)] = 0.5 * g_b[i];
    }
    g4[(3, 3)] = g_s44;
    (Vector4::new(g_mean.x, g_mean.y, g_mean.z, g_mu_t), g4)
}

/// Gradients of the clamped SH color with respect to the coefficients and
/// to the unnormalized view vector `v`.
pub(crate) fn sh_vjp(color: &ShColor, v: &Vector3<f64>, g_rgb: [f64; 3], out: &mut [f64]) -> Vector3<f64> {
    let n = v.norm();
    if n == 0.0 {
        return Vector3::zeros();
    }
    let d = v / n;
    let y = sh_basis(color.degree(), &d);
    let coeffs = color.coeffs();
    let mut raw = [0.5; 3];
    for (k, c) in coeffs.iter().enumerate() {
        for ch in 0..3 {
            raw[ch] += c[ch] * y[k];
        }
    }
    let g: [f64; 3] = std::array::from_fn(|ch| if raw[ch] < 0.0 { 0.0 } else { g_rgb[ch] });
    for k in 0..coeffs.len() {
        for ch in 0..3 {
            out[3 * k + ch] += y[k] * g[ch];
        }
    }
    if coeffs.len() == 1 {
        return Vector3::zeros();
    }
    let dy = sh_basis_grad(color.degree(), &d);
    let mut g_d = Vector3::zeros();
    for (k, c) in coeffs.iter().enumerate().skip(1) {
        let s: f64 = (0..3).map(|ch| c[ch] * g[ch]).sum();
        g_d += Vector3::from(dy[k]) * s;
    }
    (g_d - d * d.dot(&g_d)) / n
}

/// Fills one static parameter row (see [`static_col`]) with the gradient
/// carried by its primitive.
pub(crate) fn static_param_grad(g: &Gaussian3D, camera: &Camera, pg: &PrimGrad, row: &mut [f64]) {
    let q = g.rot.as_array();
    let r = rot3_matrix(q);
    let cov = crate::math::rotated_diag(&r, &g.log_scales);

    let mut g_mean = sh_vjp(&g.color, &(g.mean - camera.center()), pg.rgb, &mut row[static_col::SH..]);
    let g_cov2 = conic_vjp(recompute_conic(&g.mean, &cov, camera), pg.conic);
    let (gm, g_cov3) = project_vjp(&g.mean, &cov, camera, pg.mean2, &g_cov2);
    g_mean += gm;
    let (g_r, g_s) = rotated_diag_vjp(&r, &g.log_scales, &g_cov3);
    let g_q = rot3_vjp(q, &g_r);

    row[static_col::MEAN..static_col::MEAN + 3].copy_from_slice(g_mean.as_slice());
    row[static_col::ROT..static_col::ROT + 4].copy_from_slice(&g_q);
    row[static_col::SCALE..static_col::SCALE + 3].copy_from_slice(&g_s);
    let s = sigmoid(g.opacity_logit);
    row[static_col::OPACITY] = if s > ALPHA_MAX { 0.0 } else { pg.alpha * s * (1.0 - s) };
}

/// Fills one dynamic parameter row (see [`dyn_col`]).
pub(crate) fn dynamic_param_grad(g: &Gaussian4D, t: f64, camera: &Camera, pg: &PrimGrad, row: &mut [f64]) {
    let (a, p) = (g.rot.left.as_array(), g.rot.right.as_array());
    let r4 = left_matrix(a) * right_matrix(p);
    let cov4 = crate::math::rotated_diag(&r4, &g.log_scales);
    let mean4 = g.mean4();
    let slice = condition_at_time(&mean4, &crate::math::Cov4::from_matrix_unchecked(cov4), t)
        .expect("primitive exists, so conditioning succeeded in the forward pass");
    let cov3 = *slice.cov3.matrix();

    let mut g_mean3 = sh_vjp(&g.color, &(slice.mean3 - camera.center()), pg.rgb, &mut row[dyn_col::SH..]);
    let g_cov2 = conic_vjp(recompute_conic(&slice.mean3, &cov3, camera), pg.conic);
    let (gm, g_cov3) = project_vjp(&slice.mean3, &cov3, camera, pg.mean2, &g_cov2);
    g_mean3 += gm;

    let s = sigmoid(g.opacity_logit);
    let w = slice.temporal_weight;
    let clamped = s * w > ALPHA_MAX;
    let g_weight = if clamped { 0.0 } else { pg.alpha * s };
    row[dyn_col::OPACITY] = if clamped { 0.0 } else { pg.alpha * w * s * (1.0 - s) };

    let (g_mean4, g_cov4) = condition_vjp(&mean4, &cov4, t, &g_mean3, &g_cov3, g_weight);
    let (g_r, g_s) = rotated_diag_vjp(&r4, &g.log_scales, &g_cov4);
    let (ga, gp) = rot4_vjp(a, p, &g_r);

    row[dyn_col::MEAN..dyn_col::MEAN + 3].copy_from_slice(&g_mean4.as_slice()[..3]);
    row[dyn_col::MEAN_T] = g_mean4[3];
    row[dyn_col::ROT_L..dyn_col::ROT_L + 4].copy_from_slice(&ga);
    row[dyn_col::ROT_R..dyn_col::ROT_R + 4].copy_from_slice(&gp);
    row[dyn_col::SCALE..dyn_col::SCALE + 4].copy_from_slice(&g_s);
}

fn recompute_conic(mean: &Vector3<f64>, cov: &Matrix3<f64>, camera: &Camera) -> [f64; 3] {
    let p = camera.to_camera(mean);
    let t = perspective_jacobian(camera, &p) * camera.rotation();
    let c = t * cov * t.transpose();
    let a = c[(0, 0)] + LOW_PASS;
    let b = 0.5 * (c[(0, 1)] + c[(1, 0)]);
    let d = c[(1, 1)] + LOW_PASS;
    let inv = 1.0 / (a * d - b * b);
    [d * inv, -b * inv, a * inv]
}

/// Accumulates the per-pixel blending gradient of one contributor.
///
/// `g_alpha_px` is the gradient with respect to the pixel alpha `a * G`.
#[inline]
pub(crate) fn falloff_vjp(prim: &SplatPrimitive, px: f64, py: f64, g_alpha_px: f64, falloff: f64, out: &mut PrimGrad) {
    out.alpha += g_alpha_px * falloff;
    let g_power = g_alpha_px * prim.alpha * falloff;
    let dx = px - prim.mean2[0];
    let dy = py - prim.mean2[1];
    let [ca, cb, cc] = prim.conic;
    out.mean2[0] += g_power * (ca * dx + cb * dy);
    out.mean2[1] += g_power * (cc * dy + cb * dx);
    out.conic[0] += g_power * (-0.5 * dx * dx);
    out.conic[1] += g_power * (-dx * dy);
    out.conic[2] += g_power * (-0.5 * dy * dy);
}
