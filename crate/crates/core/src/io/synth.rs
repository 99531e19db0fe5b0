//! Procedural multi-view scenes with a known answer: a static wall and
//! floor made of flat 3D Gaussians, plus a few blobs moving along smooth
//! paths, each encoded as a chain of velocity-tilted 4D Gaussians.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix4, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::{normalized_times, write_dataset, CameraView, MultiViewDataset};
use super::points::{write_points, InitPoint};
use crate::error::{Error, Result};
use crate::math::{logit, pair_from_rot4, Rot4, UnitQuat};
use crate::raster::{reference_render, Camera};
use crate::scene::sh::SH_C0;
use crate::scene::{Gaussian3D, Gaussian4D, HybridScene, ShColor};

/// Name of the point list written next to a generated dataset.
pub const POINTS_FILE: &str = "points.txt";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub width: usize,
    pub height: usize,
    /// Camera 0 is the held-out view at the middle of the arc.
    pub n_cameras: usize,
    pub n_frames: usize,
    pub fps: f64,
    pub ring_radius: f64,
    pub arc_degrees: f64,
    pub elevation_degrees: f64,
    pub fov_degrees: f64,
    /// Columns and rows of the wall grid.
    pub wall_grid: [usize; 2],
    /// Columns and depth rows of the floor grid.
    pub floor_grid: [usize; 2],
    pub n_dynamic: usize,
    /// 4D Gaussians per moving blob.
    pub chain_length: usize,
    pub dynamic_scale: f64,
    pub init_points: usize,
    /// Standard deviation of the position noise added to init points.
    pub init_jitter: f64,
    pub background: [f64; 3],
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            width: 64,
            height: 64,
            n_cameras: 4,
            n_frames: 20,
            fps: 30.0,
            ring_radius: 4.0,
            arc_degrees: 50.0,
            elevation_degrees: 8.0,
            fov_degrees: 55.0,
            wall_grid: [12, 9],
            floor_grid: [12, 5],
            n_dynamic: 2,
            chain_length: 5,
            dynamic_scale: 0.14,
            init_points: 200,
            init_jitter: 0.02,
            background: [0.0; 3],
        }
    }
}

impl SyntheticSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SyntheticSpec = toml::from_str(text).map_err(|e| Error::invalid(format!("synthetic spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.n_frames == 0 {
            return Err(Error::invalid("width, height and n_frames must be positive"));
        }
        if self.n_cameras < 2 {
            return Err(Error::invalid("need a held-out camera and at least one training camera"));
        }
        if self.chain_length == 0 && self.n_dynamic > 0 {
            return Err(Error::invalid("chain_length must be positive"));
        }
        let positive = [self.fps, self.ring_radius, self.fov_degrees, self.dynamic_scale];
        if !positive.iter().all(|v| *v > 0.0 && v.is_finite()) || !(self.fov_degrees < 180.0) {
            return Err(Error::invalid("fps, ring_radius, fov_degrees and dynamic_scale must be positive"));
        }
        if !(self.arc_degrees >= 0.0 && self.init_jitter >= 0.0) {
            return Err(Error::invalid("arc_degrees and init_jitter must be non-negative"));
        }
        Ok(())
    }

    pub fn duration_seconds(&self) -> f64 {
        self.n_frames as f64 / self.fps
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticScene {
    /// Every camera, including the held-out camera 0.
    pub dataset: MultiViewDataset,
    pub ground_truth: HybridScene,
    pub points: Vec<InitPoint>,
    pub fps: f64,
}

const WALL_Z: f64 = 1.2;
const FLOOR_Y: f64 = -1.0;
const WALL_HALF_WIDTH: f64 = 2.6;
const WALL_TOP: f64 = 1.6;
const FLOOR_NEAR_Z: f64 = -1.2;
const FLAT_SCALE: f64 = 0.015;
const STATIC_OPACITY: f64 = 0.97;
const DYNAMIC_OPACITY: f64 = 0.95;

fn smooth_color(u: f64, v: f64, phase: f64) -> [f64; 3] {
    [
        0.5 + 0.3 * (2.0 * u + phase).sin(),
        0.45 + 0.25 * (1.7 * v - 0.5 * u).cos(),
        0.5 + 0.3 * (1.3 * (u + v) + 2.0 * phase).sin(),
    ]
}

/// Camera `k` of `n`: 0 sits at the center of the arc at zero elevation,
/// the rest spread evenly over the arc with alternating elevation.
fn ring_camera(spec: &SyntheticSpec, k: usize) -> Result<Camera> {
    let (az, el) = if k == 0 {
        (0.0, 0.0)
    } else {
        let m = spec.n_cameras - 1;
        let f = if m == 1 { 0.5 } else { (k - 1) as f64 / (m - 1) as f64 };
        let az = (f - 0.5) * spec.arc_degrees;
        let el = if k % 2 == 1 { spec.elevation_degrees } else { -spec.elevation_degrees };
        (az, el)
    };
    let (az, el) = (az.to_radians(), el.to_radians());
    let eye = Vector3::new(az.sin() * el.cos(), el.sin(), -az.cos() * el.cos()) * spec.ring_radius;
    let far = 4.0 * spec.ring_radius + 10.0;
    Camera::look_at(eye, Vector3::new(0.0, 0.0, 0.3), Vector3::y(), spec.fov_degrees.to_radians(), spec.width, spec.height, 0.05, far)
}

fn static_pool(spec: &SyntheticSpec, degree: u8) -> Result<Vec<Gaussian3D>> {
    let mut out = Vec::new();
    let [wc, wr] = spec.wall_grid;
    let wall_h = WALL_TOP - FLOOR_Y;
    for j in 0..wr {
        for i in 0..wc {
            let u = (i as f64 + 0.5) / wc as f64;
            let v = (j as f64 + 0.5) / wr as f64;
            let sx = 2.0 * WALL_HALF_WIDTH / wc as f64;
            let sy = wall_h / wr as f64;
            out.push(Gaussian3D {
                mean: Vector3::new(-WALL_HALF_WIDTH + u * 2.0 * WALL_HALF_WIDTH, FLOOR_Y + v * wall_h, WALL_Z),
                rot: UnitQuat::IDENTITY,
                log_scales: [(0.6 * sx).ln(), (0.6 * sy).ln(), FLAT_SCALE.ln()],
                opacity_logit: logit(STATIC_OPACITY),
                color: ShColor::from_rgb(degree, smooth_color(3.0 * u, 2.0 * v, 0.0))?,
            });
        }
    }
    let [fc, fr] = spec.floor_grid;
    let depth = WALL_Z - FLOOR_NEAR_Z;
    // Maps the local z axis onto world y so the flat axis is the floor normal.
    let lay_flat = UnitQuat::from_axis_angle([1.0, 0.0, 0.0], 0.5 * PI)?;
    for j in 0..fr {
        for i in 0..fc {
            let u = (i as f64 + 0.5) / fc as f64;
            let v = (j as f64 + 0.5) / fr as f64;
            let sx = 2.0 * WALL_HALF_WIDTH / fc as f64;
            let sz = depth / fr as f64;
            out.push(Gaussian3D {
                mean: Vector3::new(-WALL_HALF_WIDTH + u * 2.0 * WALL_HALF_WIDTH, FLOOR_Y, FLOOR_NEAR_Z + v * depth),
                rot: lay_flat,
                log_scales: [(0.6 * sx).ln(), (0.6 * sz).ln(), FLAT_SCALE.ln()],
                opacity_logit: logit(STATIC_OPACITY),
                color: ShColor::from_rgb(degree, smooth_color(2.5 * u, 1.5 * v, 1.7))?,
            });
        }
    }
    Ok(out)
}

/// A 4D Gaussian whose conditional mean moves with velocity `vel` through
/// `center` at time `t0`, with spatial radius `s` and temporal std `sigma_t`.
///
/// The joint covariance restricted to the (motion direction, time) plane is
/// `[[s² + σ²|v|², σ²|v|], [σ²|v|, σ²]]`; its eigenvectors give the tilt.
pub fn moving_gaussian(
    center: Vector3<f64>,
    t0: f64,
    vel: Vector3<f64>,
    s: f64,
    sigma_t: f64,
    opacity: f64,
    color: ShColor,
) -> Result<Gaussian4D> {
    let speed = vel.norm();
    let d = if speed > 1e-12 { vel / speed } else { Vector3::x() };
    let helper = if d.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e2 = d.cross(&helper).normalize();
    let e3 = d.cross(&e2);

    let var_t = sigma_t * sigma_t;
    let (c11, c12, c22) = (s * s + var_t * speed * speed, var_t * speed, var_t);
    let theta = 0.5 * (2.0 * c12).atan2(c11 - c22);
    let (sn, cs) = theta.sin_cos();
    let l1 = c11 * cs * cs + 2.0 * c12 * sn * cs + c22 * sn * sn;
    let l2 = c11 * sn * sn - 2.0 * c12 * sn * cs + c22 * cs * cs;

    let mut m = Matrix4::zeros();
    for r in 0..3 {
        m[(r, 0)] = cs * d[r];
        m[(r, 1)] = e2[r];
        m[(r, 2)] = e3[r];
        m[(r, 3)] = -sn * d[r];
    }
    m[(3, 0)] = sn;
    m[(3, 3)] = cs;
    if m.determinant() < 0.0 {
        m.column_mut(2).neg_mut();
    }
    let rot = pair_from_rot4(&Rot4::new(m)?);
    Ok(Gaussian4D {
        mean: center,
        mean_t: t0,
        rot,
        log_scales: [0.5 * l1.ln(), s.ln(), s.ln(), 0.5 * l2.ln()],
        opacity_logit: logit(opacity),
        color,
    })
}

fn dynamic_pool(spec: &SyntheticSpec, degree: u8, rng: &mut ChaCha8Rng) -> Result<Vec<Gaussian4D>> {
    let mut out = Vec::new();
    for k in 0..spec.n_dynamic {
        let y = rng.random_range(-0.2..0.6);
        let z = rng.random_range(-0.3..0.4);
        let sweep = rng.random_range(1.2..1.8) * if k % 2 == 0 { 1.0 } else { -1.0 };
        let bob = rng.random_range(0.2..0.35);
        let phase = rng.random_range(0.0..2.0 * PI);
        let path = |t: f64| Vector3::new(sweep * (t - 0.5) * 2.0, y + bob * (2.0 * PI * t + phase).sin(), z);
        let vel = |t: f64| Vector3::new(sweep * 2.0, bob * 2.0 * PI * (2.0 * PI * t + phase).cos(), 0.0);
        let hue = rng.random_range(0.0..2.0 * PI);
        let rgb = [0.55 + 0.4 * hue.sin(), 0.55 + 0.4 * (hue + 2.1).sin(), 0.55 + 0.4 * (hue + 4.2).sin()];
        let color = ShColor::from_rgb(degree, rgb)?;
        let n = spec.chain_length;
        let sigma_t = 0.6 / n as f64;
        for c in 0..n {
            let t0 = (c as f64 + 0.5) / n as f64;
            out.push(moving_gaussian(path(t0), t0, vel(t0), spec.dynamic_scale, sigma_t, DYNAMIC_OPACITY, color)?);
        }
    }
    Ok(out)
}

fn dc_rgb(color: &ShColor) -> [f64; 3] {
    color.coeffs()[0].map(|c| (c * SH_C0 + 0.5).clamp(0.0, 1.0))
}

/// Builds the ground-truth scene, renders every camera at every frame with
/// the reference renderer and samples a noisy point list from the truth.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticScene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gt = HybridScene::new(0.3, spec.duration_seconds(), 0)?;
    gt.statics = static_pool(spec, 0)?;
    gt.dynamics = dynamic_pool(spec, 0, &mut rng)?;

    let times = normalized_times(spec.n_frames);
    let mut views = Vec::with_capacity(spec.n_cameras);
    for id in 0..spec.n_cameras {
        let camera = ring_camera(spec, id)?;
        let frames = times
            .iter()
            .map(|&t| Ok(reference_render(&gt, &camera, t, spec.background)?.image.quantized()))
            .collect::<Result<Vec<_>>>()?;
        views.push(CameraView { id, camera, frames });
    }

    let noise = Normal::new(0.0, spec.init_jitter.max(1e-300)).expect("valid std");
    let n_gt = gt.len();
    let mut points = Vec::with_capacity(spec.init_points);
    for _ in 0..spec.init_points {
        let i = rng.random_range(0..n_gt);
        let (pos, rgb) = if i < gt.statics.len() {
            let g = &gt.statics[i];
            (g.mean, dc_rgb(&g.color))
        } else {
            let g = &gt.dynamics[i - gt.statics.len()];
            (g.mean, dc_rgb(&g.color))
        };
        let jitter = if spec.init_jitter > 0.0 {
            Vector3::from_fn(|_, _| noise.sample(&mut rng))
        } else {
            Vector3::zeros()
        };
        points.push(InitPoint { position: pos + jitter, rgb });
    }

    Ok(SyntheticScene {
        dataset: MultiViewDataset { views, times, duration_seconds: spec.duration_seconds() },
        ground_truth: gt,
        points,
        fps: spec.fps,
    })
}

/// Writes the dataset layout plus `points.txt`.
pub fn write_synthetic(root: impl AsRef<Path>, synth: &SyntheticScene) -> Result<()> {
    let root = root.as_ref();
    write_dataset(root, &synth.dataset, synth.fps)?;
    write_points(root.join(POINTS_FILE), &synth.points)
}
