//! Compares the analytic gradient of the photometric loss with central
//! finite differences for every parameter of a small mixed scene.
//!
//! cargo run --release --example gradient_check -- [seed]

use hybrid_gs::io::moving_gaussian;
use hybrid_gs::math::UnitQuat;
use hybrid_gs::train::params::{dynamic_width, static_width};
use hybrid_gs::train::render_backward;
use hybrid_gs::{Camera, Gaussian3D, HybridScene, Image, ShColor};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-6;

/// Reads or writes column `col` of a Gaussian's row. Quaternion columns are
/// skipped because they are not free parameters.
fn param(scene: &mut HybridScene, dynamic: bool, col: usize, delta: f64) -> Option<()> {
    if dynamic {
        let g = &mut scene.dynamics[0];
        match col {
            0..3 => g.mean[col] += delta,
            3 => g.mean_t += delta,
            12..16 => g.log_scales[col - 12] += delta,
            16 => g.opacity_logit += delta,
            c if c >= 17 => g.color.coeffs_mut()[(c - 17) / 3][(c - 17) % 3] += delta,
            _ => return None,
        }
    } else {
        let g = &mut scene.statics[0];
        match col {
            0..3 => g.mean[col] += delta,
            7..10 => g.log_scales[col - 7] += delta,
            10 => g.opacity_logit += delta,
            c if c >= 11 => g.color.coeffs_mut()[(c - 11) / 3][(c - 11) % 3] += delta,
            _ => return None,
        }
    }
    Some(())
}

fn main() -> hybrid_gs::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cam = Camera::new(30.0, 30.0, 16.0, 14.0, 32, 28, 0.1, 20.0, Matrix3::identity(), Vector3::zeros())?;
    let mut scene = HybridScene::new(0.3, 1.0, 1)?;
    let mut color = ShColor::from_rgb(1, [0.6, 0.3, 0.8])?;
    color.coeffs_mut()[2] = [0.1, -0.05, 0.02];
    scene.statics.push(Gaussian3D {
        mean: Vector3::new(0.05, 0.02, 2.0),
        rot: UnitQuat::from_axis_angle([0.2, 0.1, 1.0], 0.6)?,
        log_scales: [0.15f64.ln(), 0.1f64.ln(), 0.12f64.ln()],
        opacity_logit: 0.4,
        color: color.clone(),
    });
    scene.dynamics.push(moving_gaussian(Vector3::new(-0.05, 0.0, 1.9), 0.45, Vector3::new(0.5, 0.1, 0.0), 0.1, 0.2, 0.7, color)?);
    let mut gt = Image::new(32, 28);
    gt.data.iter_mut().for_each(|v| *v = rng.random_range(0.0..1.0));

    let loss = |s: &HybridScene| render_backward(s, &cam, 0.5, &gt, [0.0; 3], 0.2).map(|o| o.loss);
    let grads = render_backward(&scene, &cam, 0.5, &gt, [0.0; 3], 0.2)?.grads;
    println!("pool     col   analytic        finite-diff     rel. error");
    for (dynamic, width, analytic) in [
        (false, static_width(1), &grads.statics),
        (true, dynamic_width(1), &grads.dynamics),
    ] {
        for col in 0..width {
            let mut plus = scene.clone();
            if param(&mut plus, dynamic, col, H).is_none() {
                continue;
            }
            let mut minus = scene.clone();
            param(&mut minus, dynamic, col, -H);
            let fd = (loss(&plus)? - loss(&minus)?) / (2.0 * H);
            let a = analytic[col];
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-12);
            println!("{:7} {col:4}  {a:+.6e}  {fd:+.6e}  {rel:.1e}", if dynamic { "4d" } else { "3d" });
        }
    }
    Ok(())
}
