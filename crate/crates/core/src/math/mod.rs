//! Pure numeric kernels: rotations, covariance assembly and temporal
//! conditioning. Nothing in here holds scene or rendering state.

mod cov;
mod quat;
mod rot4;

pub use cov::{
    build_cov3, build_cov4, condition_at_time, Cov3, Cov4, TemporalSlice, EIGEN_FLOOR,
    MIN_TEMPORAL_VARIANCE,
};
pub use quat::{matrix_to_quat, quat_mul, quat_to_rot3, rot3_to_quat, Rot3, UnitQuat};
pub use rot4::{extract_spatial_rot, pair_from_rot4, rot4_from_pair, QuatPair, Rot4};

pub(crate) use cov::rotated_diag;
pub(crate) use quat::rot3_matrix;
pub(crate) use rot4::{left_matrix, right_matrix};

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
