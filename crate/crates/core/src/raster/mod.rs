//! Software rasterizer for mixed static/dynamic Gaussian scenes.
//!
//! Dynamic Gaussians are sliced at the render time, both pools are projected
//! into one primitive list, duplicated per tile with `(tile, depth)` keys,
//! sorted and alpha-composited front to back.

mod camera;
mod density;
mod project;
mod reference;
mod tiles;

pub use camera::Camera;
pub use density::density_map;
pub use project::{
    project_3d, project_scene, project_static, slice_project_4d, Cull, CullStats, Footprint, Pool,
    ProjectedScene, Source, SplatPrimitive, ALPHA_MAX, ALPHA_MIN, DEFAULT_WEIGHT_CUTOFF, LOW_PASS,
    TRANSMITTANCE_MIN,
};
pub use reference::reference_render;
pub use tiles::{rasterize, rasterize_primitives, RenderOptions, RenderOutput, TILE_SIZE};

pub(crate) use project::perspective_jacobian;
pub(crate) use tiles::{check_time, TileBins};
