mod common;

use common::{random_camera, random_scene};
use hybrid_gs::math::{build_cov3, build_cov4, quat_to_rot3, pair_from_rot4, rot4_from_pair, Cov3, Rot4, QuatPair, UnitQuat};
use hybrid_gs::raster::{
    density_map, project_3d, project_scene, slice_project_4d, Cull, ALPHA_MIN, DEFAULT_WEIGHT_CUTOFF, LOW_PASS,
};
use hybrid_gs::scene::eval_sh;
use hybrid_gs::{rasterize, reference_render, Camera, Gaussian3D, Gaussian4D, HybridScene, RenderOptions, ShColor};
use nalgebra::{Matrix2x3, Matrix3, Matrix4, Vector3, Vector4};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn axis_camera(w: usize, h: usize, cx: f64, cy: f64) -> Camera {
    Camera::new(40.0, 40.0, cx, cy, w, h, 0.1, 50.0, Matrix3::identity(), Vector3::zeros()).unwrap()
}

fn iso_static(mean: Vector3<f64>, sigma: f64, opacity_logit: f64, rgb: [f64; 3]) -> Gaussian3D {
    Gaussian3D {
        mean,
        rot: UnitQuat::IDENTITY,
        log_scales: [sigma.ln(); 3],
        opacity_logit,
        color: ShColor::from_rgb(0, rgb).unwrap(),
    }
}

#[test]
fn empty_scene_is_background() {
    let scene = HybridScene::new(0.3, 1.0, 0).unwrap();
    let cam = axis_camera(20, 13, 10.0, 6.5);
    let bg = [0.1, 0.4, 0.7];
    for out in [
        rasterize(&scene, &cam, 0.3, bg, &RenderOptions::default()).unwrap(),
        reference_render(&scene, &cam, 0.3, bg).unwrap(),
    ] {
        for px in out.image.data.chunks(3) {
            assert_eq!(px, bg);
        }
    }
    assert_eq!(density_map(&scene, &cam, 0.0, false).max(), 0);
}

#[test]
fn single_splat_closed_form() {
    // Mean projects exactly onto the center of pixel (16, 9).
    let cam = axis_camera(32, 24, 16.5, 9.5);
    let mut scene = HybridScene::new(0.3, 1.0, 0).unwrap();
    let rgb = [0.8, 0.3, 0.1];
    scene.statics.push(iso_static(Vector3::new(0.0, 0.0, 3.0), 0.2, 1.3, rgb));
    let bg = [0.2, 0.2, 0.5];
    let alpha = 1.0 / (1.0 + (-1.3f64).exp());
    let color = eval_sh(&scene.statics[0].color, &Vector3::z()).unwrap();
    let tiled = rasterize(&scene, &cam, 0.0, bg, &RenderOptions::default()).unwrap().image;
    let reference = reference_render(&scene, &cam, 0.0, bg).unwrap().image;
    let got = tiled.pixel(16, 9);
    for ch in 0..3 {
        let want = color[ch] * alpha + (1.0 - alpha) * bg[ch];
        assert!((got[ch] - want).abs() < 1e-12, "{got:?}");
    }
    assert_eq!(tiled, reference);
}

/// Numeric Jacobian of world point -> pixel coordinates.
fn numeric_jacobian(cam: &Camera, p: &Vector3<f64>) -> Matrix2x3<f64> {
    let f = |q: Vector3<f64>| {
        let c = cam.to_camera(&q);
        [cam.fx * c.x / c.z + cam.cx, cam.fy * c.y / c.z + cam.cy]
    };
    let h = 1e-6;
    let mut j = Matrix2x3::zeros();
    for k in 0..3 {
        let mut e = Vector3::zeros();
        e[k] = h;
        let (a, b) = (f(p + e), f(p - e));
        j[(0, k)] = (a[0] - b[0]) / (2.0 * h);
        j[(1, k)] = (a[1] - b[1]) / (2.0 * h);
    }
    j
}

#[test]
fn off_axis_projection_matches_numeric_jacobian() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let cam = random_camera(&mut rng, 64, 48);
        let mean = Vector3::from_fn(|_, _| rng.random_range(-0.5..0.5));
        let q = common::random_quat(&mut rng);
        let s: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.02f64..0.2).ln());
        let cov = build_cov3(&quat_to_rot3(&q).unwrap(), s);
        let Ok(fp) = project_3d(&mean, &cov, &cam) else { continue };
        let j = numeric_jacobian(&cam, &mean);
        let c = j * cov.matrix() * j.transpose();
        let want = [c[(0, 0)] + LOW_PASS, c[(0, 1)], c[(1, 1)] + LOW_PASS];
        let scale = want[0].abs().max(want[2].abs());
        for k in 0..3 {
            assert!((fp.cov2[k] - want[k]).abs() <= 1e-6 * scale, "{:?} vs {want:?}", fp.cov2);
        }
    }
}

#[test]
fn behind_camera_is_culled() {
    let cam = axis_camera(32, 32, 16.0, 16.0);
    let cov = Cov3::new(Matrix3::identity() * 0.01).unwrap();
    assert_eq!(project_3d(&Vector3::new(0.0, 0.0, -2.0), &cov, &cam), Err(Cull::Depth));
}

fn dynamic(mean: Vector3<f64>, mean_t: f64, rot: QuatPair, log_scales: [f64; 4]) -> Gaussian4D {
    Gaussian4D {
        mean,
        mean_t,
        rot,
        log_scales,
        opacity_logit: 0.5,
        color: ShColor::from_rgb(0, [0.5, 0.6, 0.7]).unwrap(),
    }
}

#[test]
fn block_diagonal_slice_matches_spatial_projection() {
    let cam = axis_camera(64, 64, 32.0, 32.0);
    let q = UnitQuat::from_axis_angle([0.3, 1.0, -0.2], 0.7).unwrap();
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(quat_to_rot3(&q).unwrap().matrix());
    let rot = pair_from_rot4(&Rot4::new(m).unwrap());
    let g = dynamic(Vector3::new(0.1, -0.2, 3.0), 0.5, rot, [-2.0, -2.5, -1.8, 0.2f64.ln()]);
    assert!(g.rotation().leakage() < 1e-12);
    let spatial = build_cov3(&quat_to_rot3(&q).unwrap(), [-2.0, -2.5, -1.8]);
    let direct = project_3d(&g.mean, &spatial, &cam).unwrap();
    for t in [0.35, 0.5, 0.62] {
        let p = slice_project_4d(&g, 0, t, &cam, DEFAULT_WEIGHT_CUTOFF).unwrap();
        let w = (-0.5 * (t - 0.5f64).powi(2) / 0.04).exp();
        assert!((p.alpha - g.opacity() * w).abs() < 1e-12);
        for k in 0..2 {
            assert!((p.mean2[k] - direct.mean2[k]).abs() < 1e-9);
        }
        for k in 0..3 {
            assert!((p.cov2[k] - direct.cov2[k]).abs() < 1e-9 * direct.cov2[0].abs());
        }
    }
    assert_eq!(slice_project_4d(&g, 0, 1.0, &cam, DEFAULT_WEIGHT_CUTOFF), Err(Cull::Temporal));
}

/// Conditional mean from the dense precision matrix: the quadratic form's
/// minimizer over space with time fixed.
fn dense_conditional_mean(mean4: &Vector4<f64>, cov4: &Matrix4<f64>, t: f64) -> Vector3<f64> {
    let p = cov4.try_inverse().unwrap();
    let pxx = p.fixed_view::<3, 3>(0, 0).into_owned();
    let pxt = p.fixed_view::<3, 1>(0, 3).into_owned();
    let mu = mean4.fixed_rows::<3>(0).into_owned();
    mu - pxx.try_inverse().unwrap() * pxt * (t - mean4[3])
}

#[test]
fn tilted_slice_mean_shift_matches_conditioning_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cam = axis_camera(64, 64, 32.0, 32.0);
    for _ in 0..30 {
        let rot = QuatPair::new(common::random_quat(&mut rng), common::random_quat(&mut rng));
        let scales = [0.3f64.ln(), 0.15f64.ln(), 0.1f64.ln(), 0.4f64.ln()];
        let g = dynamic(Vector3::new(0.0, 0.0, 4.0), 0.5, rot, scales);
        let cov4 = *build_cov4(&rot4_from_pair(&rot), scales).matrix();
        let t = 0.5 + rng.random_range(-0.2..0.2);
        let Ok(p) = slice_project_4d(&g, 0, t, &cam, DEFAULT_WEIGHT_CUTOFF) else { continue };
        let m = cam.to_camera(&dense_conditional_mean(&g.mean4(), &cov4, t));
        let want = [cam.fx * m.x / m.z + cam.cx, cam.fy * m.y / m.z + cam.cy];
        for k in 0..2 {
            assert!((p.mean2[k] - want[k]).abs() < 1e-8, "{:?} vs {want:?}", p.mean2);
        }
    }
}

#[test]
fn tiled_matches_reference_on_random_scenes() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let scene = random_scene(&mut rng, 25, 25, 1);
        let cam = random_camera(&mut rng, 64, 64);
        let t = rng.random_range(0.0..1.0);
        let a = rasterize(&scene, &cam, t, [0.1, 0.2, 0.3], &RenderOptions::default()).unwrap();
        let b = reference_render(&scene, &cam, t, [0.1, 0.2, 0.3]).unwrap();
        assert!(a.image.max_abs_diff(&b.image) <= 1e-5);
    }
}

/// Back-to-front "over" compositing, written independently of the renderer.
fn back_to_front(scene: &HybridScene, cam: &Camera, t: f64, bg: [f64; 3], x: usize, y: usize) -> [f64; 3] {
    let mut prims = project_scene(scene, cam, t, DEFAULT_WEIGHT_CUTOFF, true).prims;
    prims.sort_by(|a, b| b.depth.total_cmp(&a.depth));
    let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
    let mut c = bg;
    for p in &prims {
        let (dx, dy) = (px - p.mean2[0], py - p.mean2[1]);
        let q = p.conic[0] * dx * dx + 2.0 * p.conic[1] * dx * dy + p.conic[2] * dy * dy;
        let a = p.alpha * (-0.5 * q).exp();
        if a < ALPHA_MIN {
            continue;
        }
        for ch in 0..3 {
            c[ch] = a * p.rgb[ch] + (1.0 - a) * c[ch];
        }
    }
    c
}

#[test]
fn front_to_back_equals_back_to_front() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..5 {
        let mut scene = random_scene(&mut rng, 4, 4, 1);
        // Keep opacities moderate so early termination never triggers.
        for g in &mut scene.statics {
            g.opacity_logit = rng.random_range(-2.0..0.0);
        }
        for g in &mut scene.dynamics {
            g.opacity_logit = rng.random_range(-2.0..0.0);
        }
        let cam = random_camera(&mut rng, 48, 48);
        let t = rng.random_range(0.2..0.8);
        let bg = [0.3, 0.1, 0.6];
        let img = reference_render(&scene, &cam, t, bg).unwrap().image;
        for (x, y) in [(24, 24), (10, 30), (31, 12), (0, 0), (40, 41)] {
            let want = back_to_front(&scene, &cam, t, bg, x, y);
            let got = img.pixel(x, y);
            for ch in 0..3 {
                assert!((got[ch] - want[ch]).abs() < 1e-12, "({x},{y}) {got:?} vs {want:?}");
            }
        }
    }
}

#[test]
fn input_order_does_not_matter() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let scene = random_scene(&mut rng, 20, 20, 1);
        let cam = random_camera(&mut rng, 48, 40);
        let mut shuffled = scene.clone();
        shuffled.statics.shuffle(&mut rng);
        shuffled.dynamics.shuffle(&mut rng);
        let a = rasterize(&scene, &cam, 0.45, [0.0; 3], &RenderOptions::default()).unwrap();
        let b = rasterize(&shuffled, &cam, 0.45, [0.0; 3], &RenderOptions::default()).unwrap();
        assert_eq!(a.image, b.image);
    }
}

#[test]
fn statics_render_identically_at_every_time() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let scene = random_scene(&mut rng, 40, 0, 2);
    let cam = random_camera(&mut rng, 40, 40);
    let first = rasterize(&scene, &cam, 0.0, [0.1; 3], &RenderOptions::default()).unwrap();
    for t in [0.13, 0.5, 0.999, 1.0] {
        assert_eq!(first, rasterize(&scene, &cam, t, [0.1; 3], &RenderOptions::default()).unwrap());
    }
}

#[test]
fn output_and_transmittance_stay_in_unit_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let opts = RenderOptions { transmittance: true, counts: true, ..Default::default() };
    for _ in 0..5 {
        let scene = random_scene(&mut rng, 60, 60, 0);
        let cam = random_camera(&mut rng, 32, 32);
        let bg = [rng.random_range(0.0..1.0), 1.0, 0.0];
        let out = rasterize(&scene, &cam, 0.5, bg, &opts).unwrap();
        assert!(out.image.data.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(out.transmittance.unwrap().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn render_rejects_time_outside_unit_interval() {
    let scene = HybridScene::new(0.3, 1.0, 0).unwrap();
    let cam = axis_camera(8, 8, 4.0, 4.0);
    assert!(rasterize(&scene, &cam, 1.01, [0.0; 3], &RenderOptions::default()).is_err());
    assert!(reference_render(&scene, &cam, -0.1, [0.0; 3]).is_err());
}

#[test]
fn density_map_counts_one_splat_box() {
    // f / z = 10 and sigma = 0.06 give a screen variance of 0.66, radius 3.
    let cam = axis_camera(24, 24, 12.3, 11.7);
    let mut scene = HybridScene::new(0.3, 1.0, 0).unwrap();
    scene.statics.push(iso_static(Vector3::new(0.0, 0.0, 4.0), 0.06, 2.0, [1.0; 3]));
    let prims = project_scene(&scene, &cam, 0.0, DEFAULT_WEIGHT_CUTOFF, true).prims;
    assert_eq!(prims[0].radius, 3);
    let map = density_map(&scene, &cam, 0.0, false);
    let mut inside = 0;
    for y in 0..24 {
        for x in 0..24 {
            let hit = (x as f64 + 0.5 - 12.3).abs() <= 3.0 && (y as f64 + 0.5 - 11.7).abs() <= 3.0;
            assert_eq!(map.get(x, y), hit as u32, "({x},{y})");
            inside += hit as usize;
        }
    }
    assert_eq!(inside, 36);
    assert_eq!(density_map(&scene, &cam, 0.0, true).max(), 0);
}

#[test]
fn converted_gaussian_renders_like_its_slice() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let cam = axis_camera(48, 48, 24.0, 24.0);
    let mut checked = 0;
    for _ in 0..20 {
        let q = common::random_quat(&mut rng);
        let mut block = Matrix4::identity();
        block.fixed_view_mut::<3, 3>(0, 0).copy_from(quat_to_rot3(&q).unwrap().matrix());
        // Small rotation mixing one spatial axis with time.
        let (theta, axis): (f64, usize) = (rng.random_range(-0.04..0.04), rng.random_range(0..3));
        let mut mix = Matrix4::identity();
        mix[(axis, axis)] = theta.cos();
        mix[(3, 3)] = theta.cos();
        mix[(axis, 3)] = -theta.sin();
        mix[(3, axis)] = theta.sin();
        let rot = pair_from_rot4(&Rot4::new(mix * block).unwrap());
        let s = [0.15f64.ln(), 0.1f64.ln(), 0.2f64.ln(), 0.5f64.ln()];
        let g = dynamic(Vector3::new(0.05, -0.05, 3.0), 0.5, rot, s);
        let (g3, leakage) = hybrid_gs::scene::convert_4d_to_3d(&g).unwrap();
        if leakage >= 0.05 {
            continue;
        }
        let mut a = HybridScene::new(0.3, 1.0, 0).unwrap();
        a.dynamics.push(g);
        let mut b = HybridScene::new(0.3, 1.0, 0).unwrap();
        b.statics.push(g3);
        // At t = mu_t the temporal weight is exactly 1.
        let ia = rasterize(&a, &cam, 0.5, [0.0; 3], &RenderOptions::default()).unwrap().image;
        let ib = rasterize(&b, &cam, 0.5, [0.0; 3], &RenderOptions::default()).unwrap().image;
        assert!(ia.max_abs_diff(&ib) < 0.01, "leakage {leakage}: {}", ia.max_abs_diff(&ib));
        checked += 1;
    }
    assert!(checked >= 10);
}
