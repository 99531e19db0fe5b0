//! Image metrics, held-out evaluation, scene diagnostics and ablation runs.

mod ablation;
pub mod metrics;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::Result;
use crate::image::CountMap;
use crate::io::MultiViewDataset;
use crate::math::condition_at_time;
use crate::raster::{rasterize, RenderOptions};
use crate::scene::HybridScene;

pub use ablation::{
    run_ablation, run_ablation_on, standard_variants, AblationMatrix, AblationRow, AblationTable, Benchmark, DataSource, Variant,
};
pub use metrics::{psnr, ssim, FrameMetric, MetricReport};

/// Renders every frame of every view in `dataset` and scores it.
pub fn evaluate(scene: &HybridScene, dataset: &MultiViewDataset, background: [f64; 3]) -> Result<MetricReport> {
    let jobs: Vec<(usize, usize)> =
        (0..dataset.views.len()).flat_map(|v| (0..dataset.frame_count()).map(move |f| (v, f))).collect();
    let frames = jobs
        .par_iter()
        .map(|&(v, f)| {
            let view = &dataset.views[v];
            let t = dataset.times[f];
            let out = rasterize(scene, &view.camera, t, background, &RenderOptions::default())?;
            let rendered = out.image.clamped();
            Ok(FrameMetric {
                camera: view.id,
                frame: f,
                t,
                psnr: psnr(&rendered, &view.frames[f])?,
                ssim: ssim(&rendered, &view.frames[f])?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport { frames })
}

/// Time samples per ground-truth 4D Gaussian used to trace its path.
const PATH_SAMPLES: usize = 9;

/// Spatial points occupied by the moving part of `gt`: each 4D Gaussian's
/// conditional mean at times within two temporal standard deviations.
fn dynamic_trace(gt: &HybridScene) -> Vec<Vector3<f64>> {
    let mut out = Vec::new();
    for g in &gt.dynamics {
        let cov = g.covariance();
        let sd = cov.temporal_variance().sqrt();
        for k in 0..PATH_SAMPLES {
            let t = g.mean_t + sd * (4.0 * k as f64 / (PATH_SAMPLES - 1) as f64 - 2.0);
            if let Ok(slice) = condition_at_time(&g.mean4(), &cov, t) {
                out.push(slice.mean3);
            }
        }
    }
    out
}

fn nearest(p: &Vector3<f64>, set: &[Vector3<f64>]) -> f64 {
    set.iter().map(|q| (p - q).norm_squared()).fold(f64::INFINITY, f64::min)
}

/// Share of the opacity mass sitting on ground-truth static content that
/// the trained scene holds in its static pool.
///
/// A trained Gaussian belongs to static content when its mean is closer to
/// a ground-truth static mean than to any point on a ground-truth dynamic
/// path. Its mass is its opacity. Returns `None` when no trained Gaussian
/// lands on static content.
pub fn static_mass_fraction(trained: &HybridScene, gt: &HybridScene) -> Option<f64> {
    let statics: Vec<_> = gt.statics.iter().map(|g| g.mean).collect();
    let trace = dynamic_trace(gt);
    let on_static = |p: &Vector3<f64>| nearest(p, &statics) < nearest(p, &trace);
    let held: f64 = trained.statics.iter().filter(|g| on_static(&g.mean)).map(|g| g.opacity()).sum();
    let missed: f64 = trained.dynamics.iter().filter(|g| on_static(&g.mean)).map(|g| g.opacity()).sum();
    let total = held + missed;
    (total > 0.0).then(|| held / total)
}

/// Pixels that no ground-truth dynamic Gaussian covers at any of `times`.
pub fn static_region_mask(gt: &HybridScene, camera: &crate::raster::Camera, times: &[f64]) -> Vec<bool> {
    let mut mask = vec![true; camera.width * camera.height];
    for &t in times {
        let m = crate::raster::density_map(gt, camera, t, true);
        for (keep, c) in mask.iter_mut().zip(&m.counts) {
            *keep &= *c == 0;
        }
    }
    mask
}

/// Largest count over the pixels selected by `mask`.
pub fn masked_max(map: &CountMap, mask: &[bool]) -> u32 {
    map.counts.iter().zip(mask).filter(|(_, m)| **m).map(|(c, _)| *c).max().unwrap_or(0)
}
