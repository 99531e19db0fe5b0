//! Hybrid scene representation: the static and dynamic Gaussian pools,
//! spherical-harmonic color, temporal-scale classification and 4D to 3D
//! conversion.

mod gaussian;
mod hybrid;
pub mod sh;

pub use gaussian::{Gaussian3D, Gaussian4D};
pub use hybrid::{
    convert_4d_to_3d, is_static, sweep_convert, temporal_scale_histogram, ConversionReport,
    HybridScene, ScaleHistogram,
};
pub use sh::{eval_sh, ShColor};
