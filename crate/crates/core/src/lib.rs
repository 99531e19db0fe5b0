//! Hybrid 3D/4D Gaussian splatting on the CPU.
//!
//! A scene starts as a pool of space-time (4D) Gaussians. During training,
//! Gaussians whose temporal extent grows past a threshold are converted into
//! plain 3D Gaussians, and both kinds are rendered together by a tiled
//! software rasterizer.
//!
//! Modules:
//! - [`math`]: rotations, covariances, temporal conditioning
//! - [`scene`]: Gaussian pools, SH color, classification and conversion
//! - [`raster`]: projection, tiled and reference renderers, density maps
//! - [`train`]: loss, analytic gradients, Adam, densification, training loop
//! - [`io`]: datasets, synthetic scenes, point import, checkpoints
//! - [`eval`]: PSNR/SSIM and ablation runs

pub mod error;
pub mod eval;
pub mod image;
pub mod io;
pub mod math;
pub mod raster;
pub mod scene;
pub mod train;

pub use error::{Error, Result};
pub use image::{CountMap, Image};
pub use raster::{rasterize, reference_render, Camera, RenderOptions, RenderOutput};
pub use scene::{Gaussian3D, Gaussian4D, HybridScene, ShColor};
