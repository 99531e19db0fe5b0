#![allow(dead_code)]

use hybrid_gs::math::{QuatPair, UnitQuat};
use hybrid_gs::scene::sh::coeff_count;
use hybrid_gs::{Camera, Gaussian3D, Gaussian4D, HybridScene, ShColor};
use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn random_quat(rng: &mut ChaCha8Rng) -> UnitQuat {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        if let Ok(u) = UnitQuat::from_array(q) {
            return u;
        }
    }
}

pub fn random_color(rng: &mut ChaCha8Rng, degree: u8, rest: f64) -> ShColor {
    let n = coeff_count(degree);
    let mut c = vec![[0.0; 3]; n];
    let rgb: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.2..0.9));
    c[0] = ShColor::from_rgb(degree, rgb).unwrap().coeffs()[0];
    for v in c.iter_mut().skip(1) {
        *v = std::array::from_fn(|_| rng.random_range(-rest..rest));
    }
    ShColor::from_coeffs(degree, &c).unwrap()
}

pub fn random_static(rng: &mut ChaCha8Rng, spread: f64, scales: (f64, f64), degree: u8) -> Gaussian3D {
    Gaussian3D {
        mean: Vector3::from_fn(|_, _| rng.random_range(-spread..spread)),
        rot: random_quat(rng),
        log_scales: std::array::from_fn(|_| rng.random_range(scales.0..scales.1).ln()),
        opacity_logit: rng.random_range(-1.5..2.5),
        color: random_color(rng, degree, 0.15),
    }
}

pub fn random_dynamic(rng: &mut ChaCha8Rng, spread: f64, scales: (f64, f64), degree: u8) -> Gaussian4D {
    let s = |rng: &mut ChaCha8Rng| rng.random_range(scales.0..scales.1).ln();
    Gaussian4D {
        mean: Vector3::from_fn(|_, _| rng.random_range(-spread..spread)),
        mean_t: rng.random_range(0.2..0.8),
        rot: QuatPair::new(random_quat(rng), random_quat(rng)),
        log_scales: [s(rng), s(rng), s(rng), rng.random_range(0.15f64..0.8).ln()],
        opacity_logit: rng.random_range(-1.5..2.5),
        color: random_color(rng, degree, 0.15),
    }
}

pub fn random_scene(rng: &mut ChaCha8Rng, n_static: usize, n_dynamic: usize, degree: u8) -> HybridScene {
    let mut scene = HybridScene::new(0.3, 1.0, degree).unwrap();
    scene.statics = (0..n_static).map(|_| random_static(rng, 1.0, (0.02, 0.3), degree)).collect();
    scene.dynamics = (0..n_dynamic).map(|_| random_dynamic(rng, 1.0, (0.02, 0.3), degree)).collect();
    scene
}

/// Camera on a sphere of radius in `[3, 4]` looking at the origin.
pub fn random_camera(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Camera {
    loop {
        let d: Vector3<f64> = Vector3::from_fn(|_, _| StandardNormal.sample(rng));
        if d.norm() < 1e-3 || d.normalize().y.abs() > 0.95 {
            continue;
        }
        let eye = d.normalize() * rng.random_range(3.0..4.0);
        let fov = rng.random_range(0.6..1.1);
        return Camera::look_at(eye, Vector3::zeros(), Vector3::y(), fov, w, h, 0.1, 20.0).unwrap();
    }
}
