//! Trains on the default synthetic scene and reports held-out quality,
//! pool sizes and how much of the static content ended up in the 3D pool.
//!
//! cargo run --release --example train_synthetic -- [config.toml] [seed]

use hybrid_gs::eval::{evaluate, static_mass_fraction, Benchmark};
use hybrid_gs::io::SyntheticSpec;
use hybrid_gs::scene::temporal_scale_histogram;
use hybrid_gs::train::{train_with_observer, TrainConfig};

fn main() -> hybrid_gs::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let cfg = match args.get(1) {
        Some(path) => TrainConfig::load(path)?,
        None => TrainConfig::default(),
    };
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(7);
    let bench = Benchmark::synthetic(&SyntheticSpec::default(), seed, 0)?;
    let gt = bench.ground_truth.as_ref().expect("synthetic");
    let out = train_with_observer(&bench.train, bench.initial_scene(cfg.tau)?, &cfg, |it, scene| {
        if it % 100 == 0 {
            let m = evaluate(scene, &bench.test, cfg.background).map(|r| r.mean_psnr()).unwrap_or(f64::NAN);
            println!(
                "iter {it:5}  held-out {m:6.2} dB  4d {:5}  3d {:5}  static mass {:.3}",
                scene.dynamics.len(),
                scene.statics.len(),
                static_mass_fraction(scene, gt).unwrap_or(f64::NAN)
            );
        }
    })?;
    let last = out.log.rows().last().expect("at least one iteration");
    let report = evaluate(&out.scene, &bench.test, cfg.background)?;
    println!("held-out PSNR {:.2} dB, SSIM {:.4}", report.mean_psnr(), report.mean_ssim());
    println!("pools: {} dynamic, {} static; wall {:.1} s", out.scene.dynamics.len(), out.scene.statics.len(), last.wall_s);
    if let Some(f) = static_mass_fraction(&out.scene, gt) {
        println!("static mass in 3D pool: {:.1}%", 100.0 * f);
    }
    print!("{}", temporal_scale_histogram(&out.scene, 20, 1.0)?.to_csv());
    Ok(())
}
