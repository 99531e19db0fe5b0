//! Trains briefly, saves a checkpoint with optimizer state, reloads it and
//! shows that the reloaded scene renders bit-identically. Then corrupts one
//! byte to show the integrity check.
//!
//! cargo run --release --example checkpoint_roundtrip

use hybrid_gs::eval::Benchmark;
use hybrid_gs::io::{checkpoint_from_bytes, load_checkpoint, save_checkpoint, SyntheticSpec};
use hybrid_gs::train::TrainConfig;
use hybrid_gs::{rasterize, RenderOptions};

fn main() -> hybrid_gs::Result<()> {
    let spec = SyntheticSpec { width: 48, height: 48, n_frames: 8, ..Default::default() };
    let bench = Benchmark::synthetic(&spec, 3, 0)?;
    let cfg = TrainConfig { iterations: 150, warmup_iters: 50, densify_interval: 50, ..Default::default() };
    let out = bench.train(&cfg)?;

    let path = std::env::temp_dir().join("hgs_example.ckpt");
    save_checkpoint(&path, &out.scene, Some(&out.state))?;
    let size = std::fs::metadata(&path)?.len();
    let back = load_checkpoint(&path)?;
    println!("{} ({size} bytes): {} static, {} dynamic", path.display(), back.scene.statics.len(), back.scene.dynamics.len());

    let cam = &bench.test.views[0].camera;
    let a = rasterize(&out.scene, cam, 0.5, [0.0; 3], &RenderOptions::default())?;
    let b = rasterize(&back.scene, cam, 0.5, [0.0; 3], &RenderOptions::default())?;
    println!("render identical after reload: {}", a == b);
    println!("optimizer state restored: {}", back.state.as_ref() == Some(&out.state));

    let mut bytes = std::fs::read(&path)?;
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x10;
    match checkpoint_from_bytes(&bytes) {
        Ok(_) => println!("corruption went unnoticed"),
        Err(e) => println!("corrupted copy rejected: {e}"),
    }
    std::fs::remove_file(&path)?;
    Ok(())
}
