//! Brute-force renderer: one global depth sort, every primitive tested at
//! every pixel. Shares projection and blending rules with the tiled path and
//! exists to check it.

use super::camera::Camera;
use super::project::{project_scene, DEFAULT_WEIGHT_CUTOFF};
use super::tiles::{blend_pixel, check_time, depth_bits, RenderOutput};
use crate::error::Result;
use crate::image::{CountMap, Image};
use crate::scene::HybridScene;

pub fn reference_render(
    scene: &HybridScene,
    camera: &Camera,
    t: f64,
    background: [f64; 3],
) -> Result<RenderOutput> {
    check_time(t)?;
    let projected = project_scene(scene, camera, t, DEFAULT_WEIGHT_CUTOFF, true);
    let prims = &projected.prims;
    let mut order: Vec<u32> = (0..prims.len() as u32).collect();
    order.sort_by_key(|&i| (depth_bits(prims[i as usize].depth), i));

    let (w, h) = (camera.width, camera.height);
    let mut image = Image::new(w, h);
    let mut counts = vec![0u32; w * h];
    let mut trans = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let px = blend_pixel(x as f64 + 0.5, y as f64 + 0.5, prims, &order, |_, _, _| {});
            let rgb: [f64; 3] = std::array::from_fn(|ch| px.rgb[ch] + px.transmittance * background[ch]);
            image.set_pixel(x, y, rgb);
            counts[y * w + x] = px.count;
            trans[y * w + x] = px.transmittance;
        }
    }
    Ok(RenderOutput {
        image,
        counts: Some(CountMap { width: w, height: h, counts }),
        transmittance: Some(trans),
    })
}
