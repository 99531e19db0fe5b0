//! Everything that touches the filesystem: datasets, point lists,
//! synthetic scenes and checkpoints.

mod checkpoint;
mod dataset;
mod points;
mod synth;

pub use checkpoint::{
    checkpoint_from_bytes, checkpoint_to_bytes, load_checkpoint, save_checkpoint, Checkpoint, MAGIC, VERSION,
};
pub use dataset::{
    camera_dir, frame_path, load_cameras, load_dataset, normalized_times, write_dataset, CameraView, MultiViewDataset, DEFAULT_FPS,
};
pub use points::{
    init_scene, parse_points, points_to_text, read_points, write_points, InitPoint, INIT_MEAN_T, INIT_OPACITY,
    INIT_TEMPORAL_SCALE, NEIGHBORS,
};
pub use synth::{generate_synthetic, moving_gaussian, write_synthetic, SyntheticScene, SyntheticSpec, POINTS_FILE};
