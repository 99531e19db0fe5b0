//! Flat per-Gaussian parameter rows shared by gradients and optimizer state.

use crate::error::Result;
use crate::math::UnitQuat;
use crate::scene::sh::coeff_count;
use crate::scene::{Gaussian3D, Gaussian4D};

/// Column offsets of a static row: mean, quaternion, log-scales, opacity
/// logit, then SH coefficients as `3 * k + channel`.
pub mod static_col {
    pub const MEAN: usize = 0;
    pub const ROT: usize = 3;
    pub const SCALE: usize = 7;
    pub const OPACITY: usize = 10;
    pub const SH: usize = 11;
}

/// Column offsets of a dynamic row.
pub mod dyn_col {
    pub const MEAN: usize = 0;
    pub const MEAN_T: usize = 3;
    pub const ROT_L: usize = 4;
    pub const ROT_R: usize = 8;
    /// Four entries, the last being `s_t`.
    pub const SCALE: usize = 12;
    pub const OPACITY: usize = 16;
    pub const SH: usize = 17;
}

pub fn static_width(sh_degree: u8) -> usize {
    static_col::SH + 3 * coeff_count(sh_degree)
}

pub fn dynamic_width(sh_degree: u8) -> usize {
    dyn_col::SH + 3 * coeff_count(sh_degree)
}

/// Learning-rate classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamClass {
    Mean,
    MeanT,
    Rotation,
    Scale,
    ScaleT,
    Opacity,
    ShDc,
    ShRest,
}

pub fn static_class(col: usize) -> ParamClass {
    use static_col::*;
    match col {
        c if c < ROT => ParamClass::Mean,
        c if c < SCALE => ParamClass::Rotation,
        c if c < OPACITY => ParamClass::Scale,
        OPACITY => ParamClass::Opacity,
        c if c < SH + 3 => ParamClass::ShDc,
        _ => ParamClass::ShRest,
    }
}

pub fn dynamic_class(col: usize) -> ParamClass {
    use dyn_col::*;
    match col {
        c if c < MEAN_T => ParamClass::Mean,
        MEAN_T => ParamClass::MeanT,
        c if c < SCALE => ParamClass::Rotation,
        c if c < SCALE + 3 => ParamClass::Scale,
        c if c == SCALE + 3 => ParamClass::ScaleT,
        OPACITY => ParamClass::Opacity,
        c if c < SH + 3 => ParamClass::ShDc,
        _ => ParamClass::ShRest,
    }
}

pub(crate) fn read_static(g: &Gaussian3D, row: &mut [f64]) {
    use static_col::*;
    row[MEAN..MEAN + 3].copy_from_slice(g.mean.as_slice());
    row[ROT..ROT + 4].copy_from_slice(&g.rot.as_array());
    row[SCALE..SCALE + 3].copy_from_slice(&g.log_scales);
    row[OPACITY] = g.opacity_logit;
    for (k, c) in g.color.coeffs().iter().enumerate() {
        row[SH + 3 * k..SH + 3 * k + 3].copy_from_slice(c);
    }
}

/// Writes a row back, renormalizing the quaternion. Returns whether the
/// quaternion's sign was flipped by canonicalization.
pub(crate) fn write_static(row: &[f64], g: &mut Gaussian3D) -> Result<bool> {
    use static_col::*;
    g.mean.copy_from_slice(&row[MEAN..MEAN + 3]);
    let (q, flip) = UnitQuat::new_reporting_flip(row[ROT..ROT + 4].try_into().unwrap())?;
    g.rot = q;
    g.log_scales.copy_from_slice(&row[SCALE..SCALE + 3]);
    g.opacity_logit = row[OPACITY];
    for (k, c) in g.color.coeffs_mut().iter_mut().enumerate() {
        c.copy_from_slice(&row[SH + 3 * k..SH + 3 * k + 3]);
    }
    Ok(flip)
}

pub(crate) fn read_dynamic(g: &Gaussian4D, row: &mut [f64]) {
    use dyn_col::*;
    row[MEAN..MEAN + 3].copy_from_slice(g.mean.as_slice());
    row[MEAN_T] = g.mean_t;
    row[ROT_L..ROT_L + 4].copy_from_slice(&g.rot.left.as_array());
    row[ROT_R..ROT_R + 4].copy_from_slice(&g.rot.right.as_array());
    row[SCALE..SCALE + 4].copy_from_slice(&g.log_scales);
    row[OPACITY] = g.opacity_logit;
    for (k, c) in g.color.coeffs().iter().enumerate() {
        row[SH + 3 * k..SH + 3 * k + 3].copy_from_slice(c);
    }
}

/// Returns whether the left and right quaternions were sign-flipped.
pub(crate) fn write_dynamic(row: &[f64], g: &mut Gaussian4D) -> Result<(bool, bool)> {
    use dyn_col::*;
    g.mean.copy_from_slice(&row[MEAN..MEAN + 3]);
    g.mean_t = row[MEAN_T];
    let (l, fl) = UnitQuat::new_reporting_flip(row[ROT_L..ROT_L + 4].try_into().unwrap())?;
    let (r, fr) = UnitQuat::new_reporting_flip(row[ROT_R..ROT_R + 4].try_into().unwrap())?;
    g.rot.left = l;
    g.rot.right = r;
    g.log_scales.copy_from_slice(&row[SCALE..SCALE + 4]);
    g.opacity_logit = row[OPACITY];
    for (k, c) in g.color.coeffs_mut().iter_mut().enumerate() {
        c.copy_from_slice(&row[SH + 3 * k..SH + 3 * k + 3]);
    }
    Ok((fl, fr))
}

/// Column of a dynamic row that a static row inherits on conversion, if any.
pub(crate) fn inherited_dynamic_col(static_c: usize) -> Option<usize> {
    use static_col as s;
    match static_c {
        c if c < s::ROT => Some(dyn_col::MEAN + c),
        c if c < s::SCALE => None,
        c if c < s::OPACITY => Some(dyn_col::SCALE + (c - s::SCALE)),
        s::OPACITY => Some(dyn_col::OPACITY),
        c => Some(dyn_col::SH + (c - s::SH)),
    }
}
