use nalgebra::{Vector3, Vector4};

use super::sh::ShColor;
use crate::math::{
    build_cov3, build_cov4, quat_to_rot3, rot4_from_pair, sigmoid, Cov3, Cov4, QuatPair, Rot4,
    UnitQuat,
};

/// A static Gaussian: no time dependence at all.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gaussian3D {
    pub mean: Vector3<f64>,
    pub rot: UnitQuat,
    pub log_scales: [f64; 3],
    pub opacity_logit: f64,
    pub color: ShColor,
}

/// A space-time Gaussian over `(x, y, z, t)` with `t` in normalized sequence time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gaussian4D {
    pub mean: Vector3<f64>,
    pub mean_t: f64,
    pub rot: QuatPair,
    /// `(s_x, s_y, s_z, s_t)`; `exp(s_t)` is the temporal extent.
    pub log_scales: [f64; 4],
    pub opacity_logit: f64,
    pub color: ShColor,
}

impl Gaussian3D {
    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit)
    }

    pub fn covariance(&self) -> Cov3 {
        build_cov3(&quat_to_rot3(&self.rot).expect("stored quaternion is unit"), self.log_scales)
    }

    pub fn is_finite(&self) -> bool {
        self.mean.iter().all(|v| v.is_finite())
            && self.log_scales.iter().all(|v| v.is_finite())
            && self.opacity_logit.is_finite()
            && self.color.coeffs().iter().flatten().all(|v| v.is_finite())
    }
}

impl Gaussian4D {
    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit)
    }

    pub fn mean4(&self) -> Vector4<f64> {
        Vector4::new(self.mean.x, self.mean.y, self.mean.z, self.mean_t)
    }

    pub fn rotation(&self) -> Rot4 {
        rot4_from_pair(&self.rot)
    }

    pub fn covariance(&self) -> Cov4 {
        build_cov4(&self.rotation(), self.log_scales)
    }

    /// `exp(s_t)`.
    pub fn temporal_scale(&self) -> f64 {
        self.log_scales[3].exp()
    }

    pub fn is_finite(&self) -> bool {
        self.mean.iter().all(|v| v.is_finite())
            && self.mean_t.is_finite()
            && self.log_scales.iter().all(|v| v.is_finite())
            && self.opacity_logit.is_finite()
            && self.color.coeffs().iter().flatten().all(|v| v.is_finite())
    }
}
