//! Tiled front-to-back compositing.
//!
//! Primitives are duplicated into every 16x16 tile their alpha support
//! touches, keyed by `(tile_id << 32) | depth_bits`, sorted, and each tile then
//! blends its pixels independently. Tiles run in parallel but each writes only
//! its own pixels, so results do not depend on the thread count.

use rayon::prelude::*;

use super::camera::Camera;
use super::project::{project_scene, SplatPrimitive, ALPHA_MIN, DEFAULT_WEIGHT_CUTOFF, TRANSMITTANCE_MIN};
use crate::error::{Error, Result};
use crate::image::{CountMap, Image};
use crate::scene::HybridScene;

pub const TILE_SIZE: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderOptions {
    pub weight_cutoff: f64,
    /// Record how many primitives were blended into each pixel.
    pub counts: bool,
    /// Record the transmittance left after the last blended primitive.
    pub transmittance: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions { weight_cutoff: DEFAULT_WEIGHT_CUTOFF, counts: false, transmittance: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderOutput {
    pub image: Image,
    pub counts: Option<CountMap>,
    pub transmittance: Option<Vec<f64>>,
}

/// Order-preserving bits of a positive depth.
#[inline]
pub(crate) fn depth_bits(depth: f64) -> u32 {
    (depth as f32).to_bits()
}

/// Per-tile ranges into a key-sorted primitive index list.
pub(crate) struct TileBins {
    pub tiles_x: usize,
    pub tiles_y: usize,
    pub ranges: Vec<(usize, usize)>,
    pub list: Vec<u32>,
}

impl TileBins {
    pub fn build(prims: &[SplatPrimitive], width: usize, height: usize) -> TileBins {
        let tiles_x = width.div_ceil(TILE_SIZE);
        let tiles_y = height.div_ceil(TILE_SIZE);
        let mut keyed: Vec<(u64, u32)> = Vec::new();
        for (i, p) in prims.iter().enumerate() {
            let Some((x0, x1, y0, y1)) = tile_rect(p, tiles_x, tiles_y) else { continue };
            let depth = depth_bits(p.depth) as u64;
            for ty in y0..y1 {
                for tx in x0..x1 {
                    let tile = (ty * tiles_x + tx) as u64;
                    keyed.push(((tile << 32) | depth, i as u32));
                }
            }
        }
        // Stable: equal keys keep primitive order.
        keyed.sort_by_key(|&(k, _)| k);
        let mut ranges = vec![(0usize, 0usize); tiles_x * tiles_y];
        let mut start = 0;
        while start < keyed.len() {
            let tile = (keyed[start].0 >> 32) as usize;
            let mut end = start;
            while end < keyed.len() && (keyed[end].0 >> 32) as usize == tile {
                end += 1;
            }
            ranges[tile] = (start, end);
            start = end;
        }
        TileBins { tiles_x, tiles_y, ranges, list: keyed.into_iter().map(|(_, i)| i).collect() }
    }

    pub fn tile_list(&self, tile: usize) -> &[u32] {
        let (a, b) = self.ranges[tile];
        &self.list[a..b]
    }

    pub fn tile_pixels(&self, tile: usize, width: usize, height: usize) -> (usize, usize, usize, usize) {
        let tx = tile % self.tiles_x;
        let ty = tile / self.tiles_x;
        let x0 = tx * TILE_SIZE;
        let y0 = ty * TILE_SIZE;
        (x0, (x0 + TILE_SIZE).min(width), y0, (y0 + TILE_SIZE).min(height))
    }
}

fn tile_rect(p: &SplatPrimitive, tiles_x: usize, tiles_y: usize) -> Option<(usize, usize, usize, usize)> {
    let [ex, ey] = p.support_half_extent();
    if ex <= 0.0 {
        return None;
    }
    let ts = TILE_SIZE as f64;
    let clamp = |v: f64, n: usize| -> usize { v.max(0.0).min(n as f64) as usize };
    let x0 = clamp(((p.mean2[0] - ex) / ts).floor(), tiles_x);
    let x1 = clamp(((p.mean2[0] + ex) / ts).floor() + 1.0, tiles_x);
    let y0 = clamp(((p.mean2[1] - ey) / ts).floor(), tiles_y);
    let y1 = clamp(((p.mean2[1] + ey) / ts).floor() + 1.0, tiles_y);
    (x0 < x1 && y0 < y1).then_some((x0, x1, y0, y1))
}

/// Result of blending one pixel, background not yet applied.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PixelBlend {
    pub rgb: [f64; 3],
    pub transmittance: f64,
    pub count: u32,
}

/// Front-to-back blending of `order` at pixel center `(px, py)`.
///
/// `visit(index, alpha, transmittance_before)` sees each blended primitive.
#[inline]
pub(crate) fn blend_pixel(
    px: f64,
    py: f64,
    prims: &[SplatPrimitive],
    order: &[u32],
    mut visit: impl FnMut(usize, f64, f64),
) -> PixelBlend {
    let mut rgb = [0.0; 3];
    let mut t = 1.0;
    let mut count = 0;
    for &idx in order {
        let p = &prims[idx as usize];
        let alpha = p.alpha * p.falloff(px, py);
        if alpha < ALPHA_MIN {
            continue;
        }
        let next_t = t * (1.0 - alpha);
        if next_t < TRANSMITTANCE_MIN {
            break;
        }
        visit(idx as usize, alpha, t);
        for ch in 0..3 {
            rgb[ch] += p.rgb[ch] * alpha * t;
        }
        t = next_t;
        count += 1;
    }
    PixelBlend { rgb, transmittance: t, count }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("render time {t} outside [0, 1]")));
    }
    Ok(())
}

/// Composites already projected primitives with the tiled pipeline.
pub fn rasterize_primitives(
    prims: &[SplatPrimitive],
    width: usize,
    height: usize,
    background: [f64; 3],
    opts: &RenderOptions,
) -> RenderOutput {
    let bins = TileBins::build(prims, width, height);
    let n_tiles = bins.tiles_x * bins.tiles_y;
    let tiles: Vec<Vec<PixelBlend>> = (0..n_tiles)
        .into_par_iter()
        .map(|tile| {
            let (x0, x1, y0, y1) = bins.tile_pixels(tile, width, height);
            let order = bins.tile_list(tile);
            let mut out = Vec::with_capacity((x1 - x0) * (y1 - y0));
            for y in y0..y1 {
                for x in x0..x1 {
                    out.push(blend_pixel(x as f64 + 0.5, y as f64 + 0.5, prims, order, |_, _, _| {}));
                }
            }
            out
        })
        .collect();

    let mut image = Image::new(width, height);
    let mut counts = opts.counts.then(|| vec![0u32; width * height]);
    let mut trans = opts.transmittance.then(|| vec![0.0; width * height]);
    for (tile, pixels) in tiles.iter().enumerate() {
        let (x0, x1, y0, _) = bins.tile_pixels(tile, width, height);
        let tw = x1 - x0;
        for (k, px) in pixels.iter().enumerate() {
            let (x, y) = (x0 + k % tw, y0 + k / tw);
            let rgb: [f64; 3] = std::array::from_fn(|ch| px.rgb[ch] + px.transmittance * background[ch]);
            image.set_pixel(x, y, rgb);
            if let Some(c) = counts.as_mut() {
                c[y * width + x] = px.count;
            }
            if let Some(tr) = trans.as_mut() {
                tr[y * width + x] = px.transmittance;
            }
        }
    }
    RenderOutput {
        image,
        counts: counts.map(|counts| CountMap { width, height, counts }),
        transmittance: trans,
    }
}

/// Renders both pools at time `t` through the tiled pipeline.
pub fn rasterize(
    scene: &HybridScene,
    camera: &Camera,
    t: f64,
    background: [f64; 3],
    opts: &RenderOptions,
) -> Result<RenderOutput> {
    check_time(t)?;
    let projected = project_scene(scene, camera, t, opts.weight_cutoff, true);
    Ok(rasterize_primitives(&projected.prims, camera.width, camera.height, background, opts))
}
