use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{optimizer_step, GradAccum, LearningRates};
use super::backward::{render_backward, BackwardOutput, SceneGrads};
use super::densify::{densify_and_prune, sweep_convert_with_state, DensifyParams, DensifyReport};
use crate::error::{Error, Result};
use crate::eval::metrics::psnr;
use crate::io::MultiViewDataset;
use crate::scene::HybridScene;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub warmup_iters: usize,
    pub densify_interval: usize,
    pub densify_stop_iter: usize,
    /// Mean screen-space gradient norm of a Gaussian's projected center, in
    /// loss units per pixel.
    pub grad_threshold: f64,
    pub opacity_prune_eps: f64,
    /// Temporal-scale threshold in normalized time; `inf` keeps every
    /// Gaussian 4D.
    pub tau: f64,
    pub ssim_lambda: f64,
    pub lr: LearningRates,
    pub opacity_reset_enabled: bool,
    pub opacity_reset_interval: usize,
    pub seed: u64,
    pub max_gaussians: usize,
    /// Overrides the extent derived from the initial point spread.
    pub scene_extent: Option<f64>,
    pub background: [f64; 3],
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 2000,
            batch_size: 2,
            warmup_iters: 500,
            densify_interval: 100,
            densify_stop_iter: 1500,
            grad_threshold: 2e-4,
            opacity_prune_eps: 0.005,
            tau: 0.3,
            ssim_lambda: 0.2,
            lr: LearningRates::default(),
            opacity_reset_enabled: false,
            opacity_reset_interval: 200,
            seed: 0,
            max_gaussians: 20_000,
            scene_extent: None,
            background: [0.0; 3],
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| Error::invalid(format!("train config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.warmup_iters > self.iterations {
            return Err(Error::invalid("warmup_iters exceeds iterations"));
        }
        if self.densify_interval == 0 || self.batch_size == 0 || self.opacity_reset_interval == 0 {
            return Err(Error::invalid("densify_interval, batch_size and opacity_reset_interval must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.ssim_lambda) {
            return Err(Error::invalid(format!("ssim_lambda {} outside [0, 1]", self.ssim_lambda)));
        }
        if !(self.tau > 0.0) {
            return Err(Error::invalid("tau must be positive"));
        }
        if !(self.opacity_prune_eps >= 0.0 && self.opacity_prune_eps < 1.0) || !(self.grad_threshold >= 0.0) {
            return Err(Error::invalid("opacity_prune_eps must be in [0, 1) and grad_threshold non-negative"));
        }
        if let Some(e) = self.scene_extent {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::invalid("scene_extent must be positive"));
            }
        }
        self.lr.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainLogRow {
    pub iteration: usize,
    pub loss: f64,
    /// PSNR of the first image of the batch against its ground truth.
    pub psnr: f64,
    pub n_static: usize,
    pub n_dynamic: usize,
    pub converted: usize,
    pub cloned: usize,
    pub split: usize,
    pub pruned: usize,
    pub skipped: usize,
    pub wall_s: f64,
}

/// Append-only per-iteration record.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    rows: Vec<TrainLogRow>,
}

impl TrainLog {
    pub fn push(&mut self, row: TrainLogRow) {
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[TrainLogRow] {
        &self.rows
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,loss,psnr,n_static,n_dynamic,converted,cloned,split,pruned,skipped,wall_s\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{:.3}\n",
                r.iteration,
                r.loss,
                r.psnr,
                r.n_static,
                r.n_dynamic,
                r.converted,
                r.cloned,
                r.split,
                r.pruned,
                r.skipped,
                r.wall_s
            ));
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub scene: HybridScene,
    pub log: TrainLog,
    pub state: GradAccum,
}

/// Radius of the bounding sphere around the centroid of all Gaussian means.
pub fn scene_extent(scene: &HybridScene) -> f64 {
    let means: Vec<_> = scene.dynamics.iter().map(|g| g.mean).chain(scene.statics.iter().map(|g| g.mean)).collect();
    if means.is_empty() {
        return 1.0;
    }
    let c = means.iter().sum::<nalgebra::Vector3<f64>>() / means.len() as f64;
    let r = means.iter().map(|m| (m - c).norm()).fold(0.0, f64::max);
    if r > 0.0 {
        r
    } else {
        1.0
    }
}

fn average(outputs: &[BackwardOutput], scene: &HybridScene) -> SceneGrads {
    let mut g = SceneGrads::zeros(scene);
    let inv = 1.0 / outputs.len() as f64;
    for o in outputs {
        for (a, b) in g.statics.iter_mut().zip(&o.grads.statics) {
            *a += b * inv;
        }
        for (a, b) in g.dynamics.iter_mut().zip(&o.grads.dynamics) {
            *a += b * inv;
        }
        for (a, b) in g.static_visible.iter_mut().zip(&o.grads.static_visible) {
            *a |= b;
        }
        for (a, b) in g.dynamic_visible.iter_mut().zip(&o.grads.dynamic_visible) {
            *a |= b;
        }
    }
    g
}

/// Optimizes `init` against `dataset`.
///
/// Every iteration draws `batch_size` (view, frame) pairs, averages their
/// gradients and takes one Adam step. From `warmup_iters` on, every
/// `densify_interval` iterations the pools are densified and pruned (until
/// `densify_stop_iter`) and then swept for 4D-to-3D conversion.
pub fn train(dataset: &MultiViewDataset, init: HybridScene, cfg: &TrainConfig) -> Result<TrainOutput> {
    train_with_observer(dataset, init, cfg, |_, _| {})
}

/// Like [`train`], calling `observe(iteration, scene)` after each iteration.
pub fn train_with_observer(
    dataset: &MultiViewDataset,
    init: HybridScene,
    cfg: &TrainConfig,
    mut observe: impl FnMut(usize, &HybridScene),
) -> Result<TrainOutput> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("training dataset has no frames"));
    }
    let mut scene = init;
    scene.tau = cfg.tau;
    let mut state = GradAccum::new(&scene);
    let mut log = TrainLog::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let extent = cfg.scene_extent.unwrap_or_else(|| scene_extent(&scene));
    let start = Instant::now();

    for iter in 1..=cfg.iterations {
        let batch: Vec<(usize, usize)> = (0..cfg.batch_size)
            .map(|_| (rng.random_range(0..dataset.views.len()), rng.random_range(0..dataset.frame_count())))
            .collect();
        let outputs: Vec<BackwardOutput> = batch
            .par_iter()
            .map(|&(v, f)| {
                let view = &dataset.views[v];
                render_backward(&scene, &view.camera, dataset.times[f], &view.frames[f], cfg.background, cfg.ssim_lambda)
            })
            .collect::<Result<_>>()?;
        let loss = outputs.iter().map(|o| o.loss).sum::<f64>() / outputs.len() as f64;
        if !loss.is_finite() {
            return Err(Error::NumericAbort {
                iteration: iter,
                reason: format!(
                    "loss is {loss}; {} static, {} dynamic, {} non-finite Gaussians",
                    scene.statics.len(),
                    scene.dynamics.len(),
                    scene.statics.iter().filter(|g| !g.is_finite()).count()
                        + scene.dynamics.iter().filter(|g| !g.is_finite()).count()
                ),
            });
        }
        let (v0, f0) = batch[0];
        let probe = psnr(&outputs[0].image, &dataset.views[v0].frames[f0])?;
        for o in &outputs {
            state.record_view(&o.grads);
        }
        let grads = average(&outputs, &scene);
        let lrs = cfg.lr.at(iter, cfg.iterations, extent);
        let step = optimizer_step(&mut scene, &mut state, &grads, &lrs)?;

        let mut densify = DensifyReport::default();
        let mut converted = 0;
        if iter >= cfg.warmup_iters && iter % cfg.densify_interval == 0 {
            if iter <= cfg.densify_stop_iter {
                let params = DensifyParams {
                    grad_threshold: cfg.grad_threshold,
                    extent,
                    prune_eps: cfg.opacity_prune_eps,
                    max_gaussians: cfg.max_gaussians,
                    opacity_reset: cfg.opacity_reset_enabled && iter % cfg.opacity_reset_interval == 0,
                };
                densify = densify_and_prune(&mut scene, &mut state, &params, &mut rng);
            }
            converted = sweep_convert_with_state(&mut scene, &mut state).count();
        }
        debug_assert!(state.is_aligned(&scene));

        log.push(TrainLogRow {
            iteration: iter,
            loss,
            psnr: probe,
            n_static: scene.statics.len(),
            n_dynamic: scene.dynamics.len(),
            converted,
            cloned: densify.cloned(),
            split: densify.split(),
            pruned: densify.pruned(),
            skipped: step.skipped,
            wall_s: start.elapsed().as_secs_f64(),
        });
        observe(iter, &scene);
    }
    Ok(TrainOutput { scene, log, state })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_validation() {
        let cfg = TrainConfig::from_toml("iterations = 10\nwarmup_iters = 5\ntau = inf\n").unwrap();
        assert_eq!(cfg.iterations, 10);
        assert_eq!(cfg.densify_interval, 100);
        assert!(cfg.tau.is_infinite());
        assert!(TrainConfig::from_toml("iterations = 10\nwarmup_iters = 50\n").is_err());
        assert!(TrainConfig::from_toml("ssim_lambda = 1.5\n").is_err());
        assert!(TrainConfig::from_toml("densify_interval = 0\n").is_err());
        assert!(TrainConfig::from_toml("bogus = 1\n").is_err());
        let back = TrainConfig::from_toml(&TrainConfig::default().to_toml()).unwrap();
        assert_eq!(back, TrainConfig::default());
    }
}
