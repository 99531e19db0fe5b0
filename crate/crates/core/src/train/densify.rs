//! Clone, split and prune, applied to each pool separately, plus the
//! classification sweep with optimizer-state bookkeeping.

use nalgebra::{Vector3, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;

use super::adam::{GradAccum, PoolState};
use super::params::{dyn_col, inherited_dynamic_col, static_col};
use crate::math::{logit, quat_to_rot3, sigmoid};
use crate::scene::{sweep_convert, ConversionReport, Gaussian3D, Gaussian4D, HybridScene};

/// Scale divisor applied to both children of a split.
pub const SPLIT_SCALE_DIVISOR: f64 = 1.6;
/// Gaussians smaller than this fraction of the scene extent are cloned, larger ones split.
pub const CLONE_SIZE_FRACTION: f64 = 0.01;
/// Opacity that resets clamp to.
pub const RESET_OPACITY: f64 = 0.01;
/// Clone offsets are this fraction of a sample from the Gaussian itself.
const CLONE_JITTER: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensifyParams {
    /// Mean screen-space gradient norm (pixels) above which a Gaussian densifies.
    pub grad_threshold: f64,
    pub extent: f64,
    pub prune_eps: f64,
    /// Upper bound on the total Gaussian count.
    pub max_gaussians: usize,
    pub opacity_reset: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PoolDensify {
    pub cloned: usize,
    pub split: usize,
    pub pruned: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DensifyReport {
    pub statics: PoolDensify,
    pub dynamics: PoolDensify,
    pub opacity_reset: bool,
}

impl DensifyReport {
    pub fn cloned(&self) -> usize {
        self.statics.cloned + self.dynamics.cloned
    }
    pub fn split(&self) -> usize {
        self.statics.split + self.dynamics.split
    }
    pub fn pruned(&self) -> usize {
        self.statics.pruned + self.dynamics.pruned
    }
}

trait Densify: Copy {
    fn max_spatial_scale(&self) -> f64;
    fn opacity_logit(&self) -> f64;
    fn jittered(&self, rng: &mut impl Rng, fraction: f64) -> Self;
    fn split_child(&self, rng: &mut impl Rng) -> Self;
}

fn normal<const N: usize>(rng: &mut impl Rng) -> [f64; N] {
    std::array::from_fn(|_| rng.sample(StandardNormal))
}

impl Densify for Gaussian3D {
    fn max_spatial_scale(&self) -> f64 {
        self.log_scales.iter().copied().fold(f64::MIN, f64::max).exp()
    }
    fn opacity_logit(&self) -> f64 {
        self.opacity_logit
    }
    fn jittered(&self, rng: &mut impl Rng, fraction: f64) -> Self {
        let r = quat_to_rot3(&self.rot).expect("unit quaternion");
        let z: [f64; 3] = normal(rng);
        let local = Vector3::from_fn(|i, _| z[i] * self.log_scales[i].exp());
        Gaussian3D { mean: self.mean + r.matrix() * local * fraction, ..*self }
    }
    fn split_child(&self, rng: &mut impl Rng) -> Self {
        let mut c = self.jittered(rng, 1.0);
        c.log_scales = self.log_scales.map(|s| s - SPLIT_SCALE_DIVISOR.ln());
        c
    }
}

impl Densify for Gaussian4D {
    fn max_spatial_scale(&self) -> f64 {
        self.log_scales[..3].iter().copied().fold(f64::MIN, f64::max).exp()
    }
    fn opacity_logit(&self) -> f64 {
        self.opacity_logit
    }
    fn jittered(&self, rng: &mut impl Rng, fraction: f64) -> Self {
        let r = self.rotation();
        let z: [f64; 4] = normal(rng);
        let local = Vector4::from_fn(|i, _| z[i] * self.log_scales[i].exp());
        let off = r.matrix() * local * fraction;
        Gaussian4D {
            mean: self.mean + Vector3::new(off[0], off[1], off[2]),
            mean_t: self.mean_t + off[3],
            ..*self
        }
    }
    fn split_child(&self, rng: &mut impl Rng) -> Self {
        let mut c = self.jittered(rng, 1.0);
        c.log_scales = self.log_scales.map(|s| s - SPLIT_SCALE_DIVISOR.ln());
        c
    }
}

fn densify_pool<G: Densify>(
    pool: &mut Vec<G>,
    state: &mut PoolState,
    params: &DensifyParams,
    budget: &mut usize,
    rng: &mut impl Rng,
) -> PoolDensify {
    let mut report = PoolDensify::default();
    let n = pool.len();
    let size_gate = CLONE_SIZE_FRACTION * params.extent;
    let mut keep: Vec<usize> = Vec::with_capacity(n);
    let mut new_items: Vec<G> = Vec::new();
    for i in 0..n {
        let g = pool[i];
        let hot = state.mean_grad(i) > params.grad_threshold;
        if !hot || *budget == 0 {
            keep.push(i);
            continue;
        }
        if g.max_spatial_scale() <= size_gate {
            keep.push(i);
            new_items.push(g.jittered(rng, CLONE_JITTER));
            report.cloned += 1;
        } else {
            new_items.push(g.split_child(rng));
            new_items.push(g.split_child(rng));
            report.split += 1;
        }
        *budget -= 1;
    }
    let mut next: Vec<G> = keep.iter().map(|&i| pool[i]).collect();
    let mut next_state = state.select(&keep);
    next.extend(new_items.iter().copied());
    next_state.push_zero_rows(new_items.len());

    let min_logit = logit(params.prune_eps);
    let survivors: Vec<usize> = (0..next.len()).filter(|&i| !(next[i].opacity_logit() < min_logit)).collect();
    report.pruned = next.len() - survivors.len();
    *pool = survivors.iter().map(|&i| next[i]).collect();
    *state = next_state.select(&survivors);
    report
}

/// Densifies and prunes both pools, then resets the gradient statistics.
///
/// Gaussians whose mean screen gradient exceeds the threshold are cloned
/// when small and split in two when large; the original of a split is
/// removed. New rows get zero optimizer moments. Pruning drops every
/// Gaussian with opacity below `prune_eps`. If the total would pass
/// `max_gaussians`, the remaining candidates are left alone.
pub fn densify_and_prune(
    scene: &mut HybridScene,
    state: &mut GradAccum,
    params: &DensifyParams,
    rng: &mut impl Rng,
) -> DensifyReport {
    let mut budget = params.max_gaussians.saturating_sub(scene.len());
    let dynamics = densify_pool(&mut scene.dynamics, &mut state.dynamics, params, &mut budget, rng);
    let statics = densify_pool(&mut scene.statics, &mut state.statics, params, &mut budget, rng);
    state.statics.reset_stats();
    state.dynamics.reset_stats();
    if params.opacity_reset {
        reset_opacity(scene, state);
    }
    DensifyReport { statics, dynamics, opacity_reset: params.opacity_reset }
}

/// Lowers every opacity above [`RESET_OPACITY`] to it and clears the
/// opacity moments.
pub fn reset_opacity(scene: &mut HybridScene, state: &mut GradAccum) {
    let cap = logit(RESET_OPACITY);
    for (i, g) in scene.statics.iter_mut().enumerate() {
        g.opacity_logit = g.opacity_logit.min(cap);
        let c = i * state.statics.width + static_col::OPACITY;
        state.statics.m[c] = 0.0;
        state.statics.v[c] = 0.0;
    }
    for (i, g) in scene.dynamics.iter_mut().enumerate() {
        g.opacity_logit = g.opacity_logit.min(cap);
        let c = i * state.dynamics.width + dyn_col::OPACITY;
        state.dynamics.m[c] = 0.0;
        state.dynamics.v[c] = 0.0;
    }
    debug_assert!(scene.statics.iter().all(|g| sigmoid(g.opacity_logit) <= RESET_OPACITY + 1e-12));
}

/// Runs the classification sweep and moves the optimizer rows along.
///
/// Converted Gaussians inherit the moments of their mean, spatial scales,
/// opacity and SH rows; the quaternion moments start from zero because the
/// static rotation is a different parameter. The temporal rows are dropped.
pub fn sweep_convert_with_state(scene: &mut HybridScene, state: &mut GradAccum) -> ConversionReport {
    let report = sweep_convert(scene);
    if report.moved.is_empty() {
        return report;
    }
    let old = &state.dynamics;
    let n_old = old.rows();
    let mut moved_mask = vec![false; n_old];
    for &i in &report.moved {
        moved_mask[i] = true;
    }
    let keep: Vec<usize> = (0..n_old).filter(|&i| !moved_mask[i]).collect();
    let ws = state.statics.width;
    let wd = old.width;
    for &i in &report.moved {
        for c in 0..ws {
            let (m, v) = match inherited_dynamic_col(c) {
                Some(dc) => (old.m[i * wd + dc], old.v[i * wd + dc]),
                None => (0.0, 0.0),
            };
            state.statics.m.push(m);
            state.statics.v.push(v);
        }
        state.statics.grad_norm.push(old.grad_norm[i]);
        state.statics.count.push(old.count[i]);
    }
    state.dynamics = old.select(&keep);
    report
}
