//! Screen-space projection of static Gaussians and time slices of dynamic ones.

use nalgebra::{Matrix2x3, Matrix3, Vector3};
use rayon::prelude::*;

use super::camera::Camera;
use crate::math::{condition_at_time, sigmoid, Cov3};
use crate::scene::sh::eval_sh_unclamped;
use crate::scene::{Gaussian3D, Gaussian4D, HybridScene};

/// Isotropic screen-space blur added to every projected covariance (px^2).
pub const LOW_PASS: f64 = 0.3;
/// Upper clamp on a primitive's base alpha.
pub const ALPHA_MAX: f64 = 0.999;
/// Per-pixel contributions below this alpha are skipped.
pub const ALPHA_MIN: f64 = 1.0 / 255.0;
/// Compositing stops before transmittance would fall below this value.
pub const TRANSMITTANCE_MIN: f64 = 1e-4;
/// Dynamic Gaussians whose temporal weight is below this are not rendered.
pub const DEFAULT_WEIGHT_CUTOFF: f64 = 0.05;
/// Determinant below which a projected covariance counts as singular.
pub const MIN_COV2_DET: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pool {
    Static,
    Dynamic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Source {
    pub pool: Pool,
    pub index: usize,
}

/// Why a Gaussian produced no primitive.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cull {
    /// Camera depth outside `[near, far]`.
    Depth,
    /// 3-sigma box entirely outside the image.
    Offscreen,
    /// Projected covariance not invertible.
    Singular,
    /// Temporal weight below the cutoff.
    Temporal,
    /// Temporal conditioning failed (degenerate variance or indefinite slice).
    Degenerate,
    /// Base alpha too small to ever pass the per-pixel cutoff.
    Transparent,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CullStats {
    pub depth: usize,
    pub offscreen: usize,
    pub singular: usize,
    pub temporal: usize,
    pub degenerate: usize,
    pub transparent: usize,
}

impl CullStats {
    pub fn record(&mut self, c: Cull) {
        match c {
            Cull::Depth => self.depth += 1,
            Cull::Offscreen => self.offscreen += 1,
            Cull::Singular => self.singular += 1,
            Cull::Temporal => self.temporal += 1,
            Cull::Degenerate => self.degenerate += 1,
            Cull::Transparent => self.transparent += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.depth + self.offscreen + self.singular + self.temporal + self.degenerate + self.transparent
    }
}

/// Geometry of a projected Gaussian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Footprint {
    pub mean2: [f64; 2],
    /// Screen covariance `(xx, xy, yy)`, low-pass included.
    pub cov2: [f64; 3],
    /// Inverse of `cov2`, `(xx, xy, yy)`.
    pub conic: [f64; 3],
    pub depth: f64,
    /// `ceil(3 sqrt(lambda_max))` in pixels.
    pub radius: u32,
}

/// A screen-space Gaussian ready for compositing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplatPrimitive {
    pub mean2: [f64; 2],
    pub cov2: [f64; 3],
    pub conic: [f64; 3],
    pub depth: f64,
    pub rgb: [f64; 3],
    pub alpha: f64,
    pub radius: u32,
    pub source: Source,
}

impl SplatPrimitive {
    fn new(fp: Footprint, rgb: [f64; 3], alpha: f64, source: Source) -> Self {
        SplatPrimitive {
            mean2: fp.mean2,
            cov2: fp.cov2,
            conic: fp.conic,
            depth: fp.depth,
            rgb,
            alpha,
            radius: fp.radius,
            source,
        }
    }

    /// Gaussian falloff at pixel center `(px, py)`.
    #[inline]
    pub fn falloff(&self, px: f64, py: f64) -> f64 {
        let dx = px - self.mean2[0];
        let dy = py - self.mean2[1];
        let power = -0.5 * (self.conic[0] * dx * dx + self.conic[2] * dy * dy) - self.conic[1] * dx * dy;
        power.exp()
    }

    /// Half-widths of the box outside which `alpha * falloff < ALPHA_MIN`,
    /// padded by one pixel against round-off.
    pub fn support_half_extent(&self) -> [f64; 2] {
        let k = 2.0 * (self.alpha / ALPHA_MIN).ln();
        if k <= 0.0 {
            return [0.0, 0.0];
        }
        [(k * self.cov2[0]).sqrt() + 1.0, (k * self.cov2[2]).sqrt() + 1.0]
    }
}

/// Perspective Jacobian of `(fx x/z + cx, fy y/z + cy)` at a camera-space point.
pub(crate) fn perspective_jacobian(camera: &Camera, p: &Vector3<f64>) -> Matrix2x3<f64> {
    let iz = 1.0 / p.z;
    let iz2 = iz * iz;
    Matrix2x3::new(
        camera.fx * iz,
        0.0,
        -camera.fx * p.x * iz2,
        0.0,
        camera.fy * iz,
        -camera.fy * p.y * iz2,
    )
}

pub(crate) fn project_matrix(mean: &Vector3<f64>, cov: &Matrix3<f64>, camera: &Camera) -> Result<Footprint, Cull> {
    let p = camera.to_camera(mean);
    if !(p.z >= camera.near && p.z <= camera.far) {
        return Err(Cull::Depth);
    }
    let t = perspective_jacobian(camera, &p) * camera.rotation();
    let c = t * cov * t.transpose();
    let a = c[(0, 0)] + LOW_PASS;
    let b = 0.5 * (c[(0, 1)] + c[(1, 0)]);
    let d = c[(1, 1)] + LOW_PASS;
    let det = a * d - b * b;
    if !(det > MIN_COV2_DET) {
        return Err(Cull::Singular);
    }
    let inv = 1.0 / det;
    let conic = [d * inv, -b * inv, a * inv];
    let mid = 0.5 * (a + d);
    let lambda_max = mid + (mid * mid - det).max(0.0).sqrt();
    let radius = (3.0 * lambda_max.sqrt()).ceil();
    let mean2 = camera.project_camera_point(&p);
    let (w, h) = (camera.width as f64, camera.height as f64);
    if mean2[0] + radius < 0.0 || mean2[0] - radius > w || mean2[1] + radius < 0.0 || mean2[1] - radius > h {
        return Err(Cull::Offscreen);
    }
    Ok(Footprint { mean2, cov2: [a, b, d], conic, depth: p.z, radius: radius as u32 })
}

/// EWA projection of a 3D Gaussian: `J W Sigma W^T J^T + 0.3 I`.
pub fn project_3d(mean: &Vector3<f64>, cov: &Cov3, camera: &Camera) -> Result<Footprint, Cull> {
    project_matrix(mean, cov.matrix(), camera)
}

pub(crate) fn view_dir(camera: &Camera, mean: &Vector3<f64>) -> Vector3<f64> {
    let v = mean - camera.center();
    let n = v.norm();
    if n > 0.0 {
        v / n
    } else {
        Vector3::z()
    }
}

pub fn project_static(g: &Gaussian3D, index: usize, camera: &Camera) -> Result<SplatPrimitive, Cull> {
    let fp = project_matrix(&g.mean, g.covariance().matrix(), camera)?;
    let alpha = g.opacity().min(ALPHA_MAX);
    if alpha < ALPHA_MIN {
        return Err(Cull::Transparent);
    }
    let rgb = eval_sh_unclamped(&g.color, &view_dir(camera, &g.mean)).map(|v| v.max(0.0));
    Ok(SplatPrimitive::new(fp, rgb, alpha, Source { pool: Pool::Static, index }))
}

/// Slices a dynamic Gaussian at time `t` and projects the slice. Alpha is
/// scaled by the temporal weight.
pub fn slice_project_4d(
    g: &Gaussian4D,
    index: usize,
    t: f64,
    camera: &Camera,
    weight_cutoff: f64,
) -> Result<SplatPrimitive, Cull> {
    let slice = condition_at_time(&g.mean4(), &g.covariance(), t).map_err(|_| Cull::Degenerate)?;
    if slice.temporal_weight < weight_cutoff {
        return Err(Cull::Temporal);
    }
    let fp = project_matrix(&slice.mean3, slice.cov3.matrix(), camera)?;
    let alpha = (sigmoid(g.opacity_logit) * slice.temporal_weight).min(ALPHA_MAX);
    if alpha < ALPHA_MIN {
        return Err(Cull::Transparent);
    }
    let rgb = eval_sh_unclamped(&g.color, &view_dir(camera, &slice.mean3)).map(|v| v.max(0.0));
    Ok(SplatPrimitive::new(fp, rgb, alpha, Source { pool: Pool::Dynamic, index }))
}

/// All primitives of a scene at time `t`: dynamic slices first, then statics,
/// each in input order.
#[derive(Clone, Debug, Default)]
pub struct ProjectedScene {
    pub prims: Vec<SplatPrimitive>,
    pub stats: CullStats,
}

pub fn project_scene(
    scene: &HybridScene,
    camera: &Camera,
    t: f64,
    weight_cutoff: f64,
    include_statics: bool,
) -> ProjectedScene {
    let dynamic: Vec<Result<SplatPrimitive, Cull>> = scene
        .dynamics
        .par_iter()
        .enumerate()
        .map(|(i, g)| slice_project_4d(g, i, t, camera, weight_cutoff))
        .collect();
    let statics: Vec<Result<SplatPrimitive, Cull>> = if include_statics && !scene.statics.is_empty() {
        scene.statics.par_iter().enumerate().map(|(i, g)| project_static(g, i, camera)).collect()
    } else {
        Vec::new()
    };
    let mut out = ProjectedScene::default();
    for r in dynamic.into_iter().chain(statics) {
        match r {
            Ok(p) => out.prims.push(p),
            Err(c) => out.stats.record(c),
        }
    }
    out
}
