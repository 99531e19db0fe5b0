mod common;

use common::{random_camera, random_dynamic, random_scene};
use hybrid_gs::eval::{psnr, ssim};
use hybrid_gs::io::{checkpoint_from_bytes, checkpoint_to_bytes, normalized_times};
use hybrid_gs::math::{
    build_cov3, build_cov4, condition_at_time, quat_to_rot3, rot3_to_quat, rot4_from_pair, Cov4, QuatPair, UnitQuat,
};
use hybrid_gs::scene::{convert_4d_to_3d, is_static, sweep_convert, temporal_scale_histogram};
use hybrid_gs::{rasterize, reference_render, Image, RenderOptions};
use nalgebra::{Matrix3, Matrix4, SymmetricEigen, Vector4};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn quat_strategy() -> impl Strategy<Value = UnitQuat> {
    prop::array::uniform4(-1.0f64..1.0)
        .prop_filter("near zero", |q| q.iter().map(|v| v * v).sum::<f64>() > 1e-4)
        .prop_map(|q| UnitQuat::from_array(q).unwrap())
}

fn log_scale() -> impl Strategy<Value = f64> {
    -4.0f64..0.5
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn quaternions_are_unit_and_canonical(q in quat_strategy()) {
        prop_assert!((q.norm() - 1.0).abs() < 1e-9);
        let first = [q.w(), q.x(), q.y(), q.z()].into_iter().find(|v| *v != 0.0).unwrap();
        prop_assert!(first > 0.0);
    }

    #[test]
    fn rot3_roundtrip_up_to_sign(q in quat_strategy()) {
        let r = quat_to_rot3(&q).unwrap();
        let m = r.matrix();
        prop_assert!((m.transpose() * m - Matrix3::identity()).abs().max() < 1e-12);
        prop_assert!(rot3_to_quat(&r).sign_invariant_distance(&q) < 1e-9);
    }

    #[test]
    fn rot4_is_orthonormal(a in quat_strategy(), b in quat_strategy()) {
        let r = rot4_from_pair(&QuatPair::new(a, b));
        let m = r.matrix();
        prop_assert!((m.transpose() * m - Matrix4::identity()).abs().max() < 1e-9);
        prop_assert!((m.determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cov_eigenvalues_are_squared_scales(
        q in quat_strategy(),
        a in quat_strategy(),
        b in quat_strategy(),
        s in prop::array::uniform4(log_scale()),
    ) {
        let c3 = build_cov3(&quat_to_rot3(&q).unwrap(), [s[0], s[1], s[2]]);
        let mut got: Vec<f64> = SymmetricEigen::new(*c3.matrix()).eigenvalues.iter().copied().collect();
        let mut want: Vec<f64> = s[..3].iter().map(|v| (2.0 * v).exp()).collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-8);
        }

        let c4 = build_cov4(&rot4_from_pair(&QuatPair::new(a, b)), s);
        let mut got: Vec<f64> = SymmetricEigen::new(*c4.matrix()).eigenvalues.iter().copied().collect();
        let mut want: Vec<f64> = s.iter().map(|v| (2.0 * v).exp()).collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-8);
        }
    }

    #[test]
    fn block_diagonal_conditioning_keeps_spatial_block(
        q in quat_strategy(),
        s in prop::array::uniform3(log_scale()),
        var_t in 1e-4f64..4.0,
        mean in prop::array::uniform4(-2.0f64..2.0),
        t in -1.0f64..2.0,
    ) {
        let spatial = *build_cov3(&quat_to_rot3(&q).unwrap(), s).matrix();
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&spatial);
        m[(3, 3)] = var_t;
        let mean4 = Vector4::from(mean);
        let slice = condition_at_time(&mean4, &Cov4::new(m).unwrap(), t).unwrap();
        prop_assert_eq!(slice.mean3, mean4.fixed_rows::<3>(0).into_owned());
        prop_assert_eq!(*slice.cov3.matrix(), spatial);
        let w = (-0.5 * (t - mean[3]).powi(2) / var_t).exp();
        prop_assert!((slice.temporal_weight - w).abs() <= 1e-15);
    }

    #[test]
    fn temporal_weight_in_unit_interval(
        a in quat_strategy(),
        b in quat_strategy(),
        s in prop::array::uniform4(log_scale()),
        dt in -3.0f64..3.0,
    ) {
        let cov = build_cov4(&rot4_from_pair(&QuatPair::new(a, b)), s);
        prop_assume!(cov.temporal_variance() >= 1e-6);
        let mean = Vector4::new(0.1, 0.2, 0.3, 0.5);
        prop_assume!(dt * dt / cov.temporal_variance() < 1000.0);
        let w = condition_at_time(&mean, &cov, 0.5 + dt).unwrap().temporal_weight;
        prop_assert!(w > 0.0 && w <= 1.0);
        if dt.abs() > 1e-6 {
            prop_assert!(w < 1.0);
        }
        prop_assert_eq!(condition_at_time(&mean, &cov, 0.5).unwrap().temporal_weight, 1.0);
    }

    #[test]
    fn sweep_conserves_count_and_respects_threshold(seed: u64, n in 0usize..30, tau in 0.1f64..0.9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut scene = random_scene(&mut rng, 5, n, 1);
        scene.tau = tau;
        let before = scene.clone();
        let report = sweep_convert(&mut scene);
        prop_assert_eq!(scene.len(), before.len());
        prop_assert_eq!(scene.statics.len(), before.statics.len() + report.count());
        prop_assert!(scene.dynamics.iter().all(|g| !is_static(g, tau)));
        for &i in &report.moved {
            prop_assert!(before.dynamics[i].temporal_scale() > tau);
        }
        // Converted Gaussians keep opacity and color bit for bit.
        for (k, &i) in report.moved.iter().enumerate() {
            let g3 = &scene.statics[before.statics.len() + k];
            prop_assert_eq!(g3.opacity_logit.to_bits(), before.dynamics[i].opacity_logit.to_bits());
            prop_assert_eq!(&g3.color, &before.dynamics[i].color);
            prop_assert_eq!(g3.mean, before.dynamics[i].mean);
        }
    }

    #[test]
    fn static_set_grows_as_tau_shrinks(seed: u64, t1 in 0.05f64..1.0, t2 in 0.05f64..1.0) {
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let g = random_dynamic(&mut rng, 1.0, (0.02, 0.3), 0);
            prop_assert!(!is_static(&g, hi) || is_static(&g, lo));
        }
    }

    #[test]
    fn histogram_counts_every_gaussian(seed: u64, ns in 0usize..10, nd in 0usize..30, bins in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scene = random_scene(&mut rng, ns, nd, 0);
        let h = temporal_scale_histogram(&scene, bins, 1.0).unwrap();
        prop_assert_eq!(h.counts.iter().sum::<u64>() as usize, scene.len());
        prop_assert_eq!(h.bin_edges.len(), bins + 1);
    }

    #[test]
    fn normalized_times_are_affine(n in 0usize..500) {
        let t = normalized_times(n);
        prop_assert_eq!(t.len(), n);
        if n >= 2 {
            prop_assert_eq!(t[0], 0.0);
            prop_assert_eq!(t[n - 1], 1.0);
            let step = 1.0 / (n - 1) as f64;
            for (k, w) in t.windows(2).enumerate() {
                prop_assert!(w[1] > w[0]);
                prop_assert!((t[k] - k as f64 * step).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn metrics_are_symmetric(seed: u64, w in 11usize..24, h in 11usize..24) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Image::new(w, h);
        let mut b = Image::new(w, h);
        a.data.iter_mut().for_each(|v| *v = rng.random_range(0.0..1.0));
        b.data.iter_mut().for_each(|v| *v = rng.random_range(0.0..1.0));
        prop_assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        prop_assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-14);
        prop_assert!(ssim(&a, &a).unwrap() > 1.0 - 1e-12);
        prop_assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn checkpoint_roundtrip_is_exact(seed: u64, ns in 0usize..12, nd in 0usize..12, degree in 0u8..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scene = random_scene(&mut rng, ns, nd, degree);
        let bytes = checkpoint_to_bytes(&scene, None);
        let back = checkpoint_from_bytes(&bytes).unwrap();
        prop_assert!(back.state.is_none());
        prop_assert_eq!(checkpoint_to_bytes(&back.scene, None), bytes);
        prop_assert_eq!(back.scene, scene);
    }

    #[test]
    fn conversion_yields_proper_rotation(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_dynamic(&mut rng, 0.5, (0.05, 0.2), 1);
        let (g3, leakage) = convert_4d_to_3d(&g).unwrap();
        prop_assert!(leakage.is_finite() && leakage >= 0.0);
        prop_assert!((quat_to_rot3(&g3.rot).unwrap().matrix().determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tiled_equals_reference_small_scenes(seed: u64, ns in 0usize..15, nd in 0usize..15, t in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scene = random_scene(&mut rng, ns, nd, 1);
        let cam = random_camera(&mut rng, 40, 36);
        let a = rasterize(&scene, &cam, t, [0.2, 0.0, 1.0], &RenderOptions::default()).unwrap();
        let b = reference_render(&scene, &cam, t, [0.2, 0.0, 1.0]).unwrap();
        prop_assert!(a.image.max_abs_diff(&b.image) <= 1e-5);
    }
}
