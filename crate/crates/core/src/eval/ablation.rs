//! Paired training runs over a matrix of variants sharing one dataset and seed.

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::evaluate;
use crate::error::{Error, Result};
use crate::io::{
    generate_synthetic, init_scene, load_dataset, read_points, InitPoint, MultiViewDataset, SyntheticSpec, POINTS_FILE,
};
use crate::scene::HybridScene;
use crate::train::{train, TrainConfig, TrainOutput};

/// Where the benchmark frames come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// A dataset directory with `points.txt` next to `cameras.txt`.
    Directory(PathBuf),
    Synthetic(SyntheticSpec),
}

/// A train/test split plus the initial point list.
#[derive(Clone, Debug)]
pub struct Benchmark {
    pub train: MultiViewDataset,
    pub test: MultiViewDataset,
    pub points: Vec<InitPoint>,
    /// Known only for synthetic data.
    pub ground_truth: Option<HybridScene>,
}

impl Benchmark {
    pub fn load(source: &DataSource, seed: u64, held_out: usize) -> Result<Self> {
        match source {
            DataSource::Directory(root) => {
                let (train, test) = load_dataset(root, held_out)?;
                let points = read_points(root.join(POINTS_FILE))?;
                Ok(Benchmark { train, test, points, ground_truth: None })
            }
            DataSource::Synthetic(spec) => Self::synthetic(spec, seed, held_out),
        }
    }

    pub fn synthetic(spec: &SyntheticSpec, seed: u64, held_out: usize) -> Result<Self> {
        let s = generate_synthetic(spec, seed)?;
        if s.dataset.view(held_out).is_none() {
            return Err(Error::invalid(format!("held-out camera {held_out} does not exist")));
        }
        let (test, train): (Vec<_>, Vec<_>) = s.dataset.views.into_iter().partition(|v| v.id == held_out);
        let times = s.dataset.times;
        let duration_seconds = s.dataset.duration_seconds;
        Ok(Benchmark {
            train: MultiViewDataset { views: train, times: times.clone(), duration_seconds },
            test: MultiViewDataset { views: test, times, duration_seconds },
            points: s.points,
            ground_truth: Some(s.ground_truth),
        })
    }

    pub fn initial_scene(&self, tau: f64) -> Result<HybridScene> {
        init_scene(&self.points, tau, self.train.duration_seconds, 0)
    }

    pub fn train(&self, cfg: &TrainConfig) -> Result<TrainOutput> {
        train(&self.train, self.initial_scene(cfg.tau)?, cfg)
    }
}

/// Overrides applied to the base config for one row of the table.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub name: String,
    pub tau: Option<f64>,
    pub opacity_reset: Option<bool>,
    pub iterations: Option<usize>,
}

impl Variant {
    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        let mut cfg = base.clone();
        if let Some(t) = self.tau {
            cfg.tau = t;
        }
        if let Some(r) = self.opacity_reset {
            cfg.opacity_reset_enabled = r;
        }
        if let Some(n) = self.iterations {
            cfg.iterations = n;
            cfg.warmup_iters = cfg.warmup_iters.min(n);
        }
        cfg
    }
}

/// `ours`, the all-4D stand-in for the 4D baseline (`tau = inf`, so nothing
/// ever converts), `ours` with opacity resets, and a threshold sweep.
pub fn standard_variants(taus: &[f64]) -> Vec<Variant> {
    let mut v = vec![
        Variant { name: "ours".into(), ..Default::default() },
        Variant { name: "all-4d".into(), tau: Some(f64::INFINITY), ..Default::default() },
        Variant { name: "with-reset".into(), opacity_reset: Some(true), ..Default::default() },
    ];
    v.extend(taus.iter().map(|&t| Variant { name: format!("tau={t}"), tau: Some(t), ..Default::default() }));
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationMatrix {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub held_out: usize,
    pub data: DataSource,
    #[serde(default)]
    pub base: TrainConfig,
    #[serde(rename = "variant")]
    pub variants: Vec<Variant>,
}

impl AblationMatrix {
    pub fn from_toml(text: &str) -> Result<Self> {
        let m: AblationMatrix = toml::from_str(text).map_err(|e| Error::invalid(format!("ablation matrix: {e}")))?;
        if m.variants.is_empty() {
            return Err(Error::invalid("ablation matrix lists no variants"));
        }
        for v in &m.variants {
            v.apply(&m.base).validate().map_err(|e| Error::invalid(format!("variant `{}`: {e}", v.name)))?;
        }
        Ok(m)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub variant: String,
    pub psnr: f64,
    pub ssim: f64,
    pub n_dynamic: usize,
    pub n_static: usize,
    pub wall_s: f64,
    /// Set when the variant failed; the metric fields are then NaN or zero.
    pub error: Option<String>,
}

impl AblationRow {
    pub fn total(&self) -> usize {
        self.n_dynamic + self.n_static
    }

    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, variant: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("variant,psnr,ssim,n_4d,n_3d,wall_s,status\n");
        for r in &self.rows {
            let status = match &r.error {
                None => "ok".to_string(),
                Some(e) => format!("failed: {}", e.replace([',', '\n'], ";")),
            };
            s.push_str(&format!(
                "{},{:.4},{:.5},{},{},{:.2},{}\n",
                r.variant, r.psnr, r.ssim, r.n_dynamic, r.n_static, r.wall_s, status
            ));
        }
        s
    }
}

fn run_variant(bench: &Benchmark, cfg: &TrainConfig, name: &str) -> AblationRow {
    let start = Instant::now();
    let result = cfg.validate().and_then(|_| bench.train(cfg)).and_then(|out| {
        let report = evaluate(&out.scene, &bench.test, cfg.background)?;
        Ok((out.scene, report))
    });
    let wall_s = start.elapsed().as_secs_f64();
    match result {
        Ok((scene, report)) => AblationRow {
            variant: name.to_string(),
            psnr: report.mean_psnr(),
            ssim: report.mean_ssim(),
            n_dynamic: scene.dynamics.len(),
            n_static: scene.statics.len(),
            wall_s,
            error: None,
        },
        Err(e) => AblationRow {
            variant: name.to_string(),
            psnr: f64::NAN,
            ssim: f64::NAN,
            n_dynamic: 0,
            n_static: 0,
            wall_s,
            error: Some(e.to_string()),
        },
    }
}

/// Trains every variant on the same benchmark and seed, in matrix order.
/// A variant that fails is reported as a failed row.
pub fn run_ablation(matrix: &AblationMatrix) -> Result<AblationTable> {
    let bench = Benchmark::load(&matrix.data, matrix.seed, matrix.held_out)?;
    Ok(run_ablation_on(&bench, &matrix.base, &matrix.variants))
}

pub fn run_ablation_on(bench: &Benchmark, base: &TrainConfig, variants: &[Variant]) -> AblationTable {
    let rows = variants.iter().map(|v| run_variant(bench, &v.apply(base), &v.name)).collect();
    AblationTable { rows }
}
