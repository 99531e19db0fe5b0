//! Optimization of a hybrid scene against multi-view frames: photometric
//! loss, analytic gradients, Adam, densification and the 4D-to-3D sweep.

mod adam;
mod backward;
mod densify;
pub(crate) mod grad;
pub mod loss;
pub mod params;
mod trainer;

pub use adam::{optimizer_step, GradAccum, LearningRates, PoolState, StepReport, BETA1, BETA2, EPSILON};
pub use backward::{backward_from_pixels, render_backward, BackwardOutput, SceneGrads};
pub use densify::{
    densify_and_prune, reset_opacity, sweep_convert_with_state, DensifyParams, DensifyReport, PoolDensify,
    CLONE_SIZE_FRACTION, RESET_OPACITY, SPLIT_SCALE_DIVISOR,
};
pub use loss::{photometric_loss, photometric_loss_grad};
pub use trainer::{scene_extent, train, train_with_observer, TrainConfig, TrainLog, TrainLogRow, TrainOutput};
