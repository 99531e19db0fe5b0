//! Reverse pass through compositing, projection, slicing and covariance
//! assembly.
//!
//! The forward blend is re-run per pixel to recover each contributor's alpha
//! and transmittance, then walked back to front. Every tile accumulates into
//! its own buffer; buffers are summed in tile order so the result does not
//! depend on scheduling.

use rayon::prelude::*;

use super::grad::{dynamic_param_grad, falloff_vjp, static_param_grad, PrimGrad};
use super::loss::photometric_loss_grad;
use super::params::{dynamic_width, static_width};
use crate::error::Result;
use crate::image::Image;
use crate::raster::{
    check_time, project_scene, rasterize_primitives, Camera, Pool, RenderOptions, SplatPrimitive, TileBins,
    ALPHA_MIN, DEFAULT_WEIGHT_CUTOFF, TRANSMITTANCE_MIN,
};
use crate::scene::HybridScene;

/// Parameter gradients for both pools, in the row layout of
/// [`super::params`], plus per-Gaussian screen-space mean gradient norms.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneGrads {
    pub statics: Vec<f64>,
    pub dynamics: Vec<f64>,
    pub static_screen: Vec<f64>,
    pub dynamic_screen: Vec<f64>,
    pub static_visible: Vec<bool>,
    pub dynamic_visible: Vec<bool>,
}

impl SceneGrads {
    pub fn zeros(scene: &HybridScene) -> Self {
        let (ns, nd) = (scene.statics.len(), scene.dynamics.len());
        SceneGrads {
            statics: vec![0.0; ns * static_width(scene.sh_degree)],
            dynamics: vec![0.0; nd * dynamic_width(scene.sh_degree)],
            static_screen: vec![0.0; ns],
            dynamic_screen: vec![0.0; nd],
            static_visible: vec![false; ns],
            dynamic_visible: vec![false; nd],
        }
    }
}

#[derive(Clone, Debug)]
pub struct BackwardOutput {
    pub loss: f64,
    pub image: Image,
    pub grads: SceneGrads,
}

/// Renders at time `t`, evaluates the photometric loss against `gt` and
/// returns the gradient of that loss for every parameter.
pub fn render_backward(
    scene: &HybridScene,
    camera: &Camera,
    t: f64,
    gt: &Image,
    background: [f64; 3],
    ssim_lambda: f64,
) -> Result<BackwardOutput> {
    check_time(t)?;
    let projected = project_scene(scene, camera, t, DEFAULT_WEIGHT_CUTOFF, true);
    let out = rasterize_primitives(&projected.prims, camera.width, camera.height, background, &RenderOptions::default());
    let (loss, pixel_grad) = photometric_loss_grad(&out.image, gt, ssim_lambda)?;
    let grads = backward_prims(scene, camera, t, &projected.prims, background, &pixel_grad);
    Ok(BackwardOutput { loss, image: out.image, grads })
}

/// Gradient of `sum(pixel_grad * image)` for an arbitrary upstream image
/// gradient laid out like [`Image::data`].
pub fn backward_from_pixels(
    scene: &HybridScene,
    camera: &Camera,
    t: f64,
    background: [f64; 3],
    pixel_grad: &[f64],
) -> Result<SceneGrads> {
    check_time(t)?;
    let projected = project_scene(scene, camera, t, DEFAULT_WEIGHT_CUTOFF, true);
    Ok(backward_prims(scene, camera, t, &projected.prims, background, pixel_grad))
}

fn blend_backward_tile(
    prims: &[SplatPrimitive],
    order: &[u32],
    rect: (usize, usize, usize, usize),
    width: usize,
    background: [f64; 3],
    pixel_grad: &[f64],
) -> Vec<PrimGrad> {
    let mut local = vec![PrimGrad::default(); order.len()];
    let mut contrib: Vec<(usize, f64, f64, f64)> = Vec::new();
    let (x0, x1, y0, y1) = rect;
    for y in y0..y1 {
        for x in x0..x1 {
            let base = 3 * (y * width + x);
            let dl = [pixel_grad[base], pixel_grad[base + 1], pixel_grad[base + 2]];
            if dl == [0.0; 3] {
                continue;
            }
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            contrib.clear();
            let mut t = 1.0;
            for (pos, &idx) in order.iter().enumerate() {
                let p = &prims[idx as usize];
                let g = p.falloff(px, py);
                let alpha = p.alpha * g;
                if alpha < ALPHA_MIN {
                    continue;
                }
                let next_t = t * (1.0 - alpha);
                if next_t < TRANSMITTANCE_MIN {
                    break;
                }
                contrib.push((pos, alpha, g, t));
                t = next_t;
            }
            let mut suffix = background.map(|b| b * t);
            for &(pos, alpha, g, tb) in contrib.iter().rev() {
                let p = &prims[order[pos] as usize];
                let lg = &mut local[pos];
                let mut g_alpha = 0.0;
                for ch in 0..3 {
                    lg.rgb[ch] += dl[ch] * alpha * tb;
                    g_alpha += dl[ch] * (p.rgb[ch] * tb - suffix[ch] / (1.0 - alpha));
                }
                falloff_vjp(p, px, py, g_alpha, g, lg);
                for ch in 0..3 {
                    suffix[ch] += p.rgb[ch] * alpha * tb;
                }
            }
        }
    }
    local
}

pub(crate) fn backward_prims(
    scene: &HybridScene,
    camera: &Camera,
    t: f64,
    prims: &[SplatPrimitive],
    background: [f64; 3],
    pixel_grad: &[f64],
) -> SceneGrads {
    let (w, h) = (camera.width, camera.height);
    let bins = TileBins::build(prims, w, h);
    let n_tiles = bins.tiles_x * bins.tiles_y;
    let per_tile: Vec<Vec<PrimGrad>> = (0..n_tiles)
        .into_par_iter()
        .map(|tile| {
            let rect = bins.tile_pixels(tile, w, h);
            blend_backward_tile(prims, bins.tile_list(tile), rect, w, background, pixel_grad)
        })
        .collect();
    let mut prim_grads = vec![PrimGrad::default(); prims.len()];
    for (tile, local) in per_tile.iter().enumerate() {
        for (g, &idx) in local.iter().zip(bins.tile_list(tile)) {
            prim_grads[idx as usize].add(g);
        }
    }

    let ws = static_width(scene.sh_degree);
    let wd = dynamic_width(scene.sh_degree);
    let rows: Vec<Vec<f64>> = prims
        .par_iter()
        .zip(&prim_grads)
        .map(|(p, pg)| match p.source.pool {
            Pool::Static => {
                let mut row = vec![0.0; ws];
                static_param_grad(&scene.statics[p.source.index], camera, pg, &mut row);
                row
            }
            Pool::Dynamic => {
                let mut row = vec![0.0; wd];
                dynamic_param_grad(&scene.dynamics[p.source.index], t, camera, pg, &mut row);
                row
            }
        })
        .collect();

    let mut out = SceneGrads::zeros(scene);
    for ((p, pg), row) in prims.iter().zip(&prim_grads).zip(rows) {
        let i = p.source.index;
        let screen = pg.mean2[0].hypot(pg.mean2[1]);
        match p.source.pool {
            Pool::Static => {
                out.statics[i * ws..(i + 1) * ws].copy_from_slice(&row);
                out.static_screen[i] = screen;
                out.static_visible[i] = true;
            }
            Pool::Dynamic => {
                out.dynamics[i * wd..(i + 1) * wd].copy_from_slice(&row);
                out.dynamic_screen[i] = screen;
                out.dynamic_visible[i] = true;
            }
        }
    }
    out
}
