use super::camera::Camera;
use super::project::{project_scene, DEFAULT_WEIGHT_CUTOFF};
use crate::image::CountMap;
use crate::scene::HybridScene;

/// Number of projected Gaussians whose 3-sigma box covers each pixel center.
///
/// With `dynamics_only` the static pool is ignored, which is how an all-4D
/// model is inspected.
pub fn density_map(scene: &HybridScene, camera: &Camera, t: f64, dynamics_only: bool) -> CountMap {
    let projected = project_scene(scene, camera, t, DEFAULT_WEIGHT_CUTOFF, !dynamics_only);
    let (w, h) = (camera.width, camera.height);
    let mut counts = vec![0u32; w * h];
    for p in &projected.prims {
        let r = p.radius as f64;
        let x0 = (p.mean2[0] - r - 0.5).ceil().max(0.0) as usize;
        let x1 = ((p.mean2[0] + r - 0.5).floor() + 1.0).clamp(0.0, w as f64) as usize;
        let y0 = (p.mean2[1] - r - 0.5).ceil().max(0.0) as usize;
        let y1 = ((p.mean2[1] + r - 0.5).floor() + 1.0).clamp(0.0, h as f64) as usize;
        for y in y0..y1 {
            for x in x0..x1 {
                counts[y * w + x] += 1;
            }
        }
    }
    CountMap { width: w, height: h, counts }
}
