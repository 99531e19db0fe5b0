//! Trains the hybrid model and an all-4D model on the same data and prints
//! how many dynamic Gaussians cover each pixel of the held-out view. In the
//! hybrid model the static background is carried by 3D Gaussians, so the
//! 4D pool concentrates on the moving objects.
//!
//! cargo run --release --example density_map -- [t] [out_dir]

use std::path::PathBuf;

use hybrid_gs::eval::{masked_max, static_region_mask, Benchmark};
use hybrid_gs::io::SyntheticSpec;
use hybrid_gs::raster::density_map;
use hybrid_gs::train::TrainConfig;

fn main() -> hybrid_gs::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let t: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let out = PathBuf::from(args.get(2).map_or(".", String::as_str));
    let bench = Benchmark::synthetic(&SyntheticSpec::default(), 7, 0)?;
    let gt = bench.ground_truth.as_ref().expect("synthetic");
    let cam = &bench.test.views[0].camera;
    let mask = static_region_mask(gt, cam, &bench.test.times);

    let hybrid_cfg = TrainConfig::default();
    let all_4d_cfg = TrainConfig { tau: f64::INFINITY, ..TrainConfig::default() };
    for (name, cfg) in [("hybrid", hybrid_cfg), ("all-4d", all_4d_cfg)] {
        let scene = bench.train(&cfg)?.scene;
        let map = density_map(&scene, cam, t, true);
        let path = out.join(format!("density_{name}.pgm"));
        map.write_pgm(&path)?;
        println!(
            "{name:7} 4d pool {:4}, max coverage {:3}, max over static pixels {:3} -> {}",
            scene.dynamics.len(),
            map.max(),
            masked_max(&map, &mask),
            path.display()
        );
    }
    Ok(())
}
