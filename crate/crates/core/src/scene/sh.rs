//! Real spherical harmonics up to degree 3, in the sign convention used by
//! Gaussian splatting renderers (Condon-Shortley phase folded into the
//! constants).

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub const MAX_SH_DEGREE: u8 = 3;
pub const MAX_SH_COEFFS: usize = 16;

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
pub const SH_C1: f64 = 0.488_602_511_902_919_9;
pub const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
pub const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// Number of coefficients per channel for a given degree.
pub fn coeff_count(degree: u8) -> usize {
    let d = degree as usize + 1;
    d * d
}

/// View-dependent RGB color as spherical-harmonic coefficients.
///
/// Storage is fixed-size; only the first `coeff_count(degree)` triples are
/// meaningful and the rest stay zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShColor {
    degree: u8,
    coeffs: [[f64; 3]; MAX_SH_COEFFS],
}

impl ShColor {
    pub fn zeros(degree: u8) -> Result<Self> {
        if degree > MAX_SH_DEGREE {
            return Err(Error::invalid(format!("SH degree {degree} exceeds {MAX_SH_DEGREE}")));
        }
        Ok(ShColor { degree, coeffs: [[0.0; 3]; MAX_SH_COEFFS] })
    }

    /// Constant color `rgb` (in the post-offset output space).
    pub fn from_rgb(degree: u8, rgb: [f64; 3]) -> Result<Self> {
        let mut c = Self::zeros(degree)?;
        c.coeffs[0] = rgb.map(|v| (v - 0.5) / SH_C0);
        Ok(c)
    }

    pub fn from_coeffs(degree: u8, coeffs: &[[f64; 3]]) -> Result<Self> {
        let mut c = Self::zeros(degree)?;
        if coeffs.len() != coeff_count(degree) {
            return Err(Error::invalid(format!(
                "degree {degree} needs {} coefficient triples, got {}",
                coeff_count(degree),
                coeffs.len()
            )));
        }
        c.coeffs[..coeffs.len()].copy_from_slice(coeffs);
        Ok(c)
    }

    pub fn degree(&self) -> u8 {
        self.degree
    }

    pub fn coeffs(&self) -> &[[f64; 3]] {
        &self.coeffs[..coeff_count(self.degree)]
    }

    pub fn coeffs_mut(&mut self) -> &mut [[f64; 3]] {
        let n = coeff_count(self.degree);
        &mut self.coeffs[..n]
    }
}

/// Basis values `Y_k(d)` for `k < coeff_count(degree)`; `d` must be unit.
pub(crate) fn sh_basis(degree: u8, d: &Vector3<f64>) -> [f64; MAX_SH_COEFFS] {
    let mut y = [0.0; MAX_SH_COEFFS];
    let (x, yy, z) = (d.x, d.y, d.z);
    y[0] = SH_C0;
    if degree >= 1 {
        y[1] = -SH_C1 * yy;
        y[2] = SH_C1 * z;
        y[3] = -SH_C1 * x;
    }
    if degree >= 2 {
        let (xx, y2, zz) = (x * x, yy * yy, z * z);
        y[4] = SH_C2[0] * x * yy;
        y[5] = SH_C2[1] * yy * z;
        y[6] = SH_C2[2] * (2.0 * zz - xx - y2);
        y[7] = SH_C2[3] * x * z;
        y[8] = SH_C2[4] * (xx - y2);
        if degree >= 3 {
            y[9] = SH_C3[0] * yy * (3.0 * xx - y2);
            y[10] = SH_C3[1] * x * yy * z;
            y[11] = SH_C3[2] * yy * (4.0 * zz - xx - y2);
            y[12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * y2);
            y[13] = SH_C3[4] * x * (4.0 * zz - xx - y2);
            y[14] = SH_C3[5] * z * (xx - y2);
            y[15] = SH_C3[6] * x * (xx - 3.0 * y2);
        }
    }
    y
}

/// Gradients `dY_k / d(x, y, z)` of the polynomial basis (treating the
/// components as independent).
pub(crate) fn sh_basis_grad(degree: u8, d: &Vector3<f64>) -> [[f64; 3]; MAX_SH_COEFFS] {
    let mut g = [[0.0; 3]; MAX_SH_COEFFS];
    let (x, y, z) = (d.x, d.y, d.z);
    if degree >= 1 {
        g[1] = [0.0, -SH_C1, 0.0];
        g[2] = [0.0, 0.0, SH_C1];
        g[3] = [-SH_C1, 0.0, 0.0];
    }
    if degree >= 2 {
        g[4] = [SH_C2[0] * y, SH_C2[0] * x, 0.0];
        g[5] = [0.0, SH_C2[1] * z, SH_C2[1] * y];
        g[6] = [-2.0 * SH_C2[2] * x, -2.0 * SH_C2[2] * y, 4.0 * SH_C2[2] * z];
        g[7] = [SH_C2[3] * z, 0.0, SH_C2[3] * x];
        g[8] = [2.0 * SH_C2[4] * x, -2.0 * SH_C2[4] * y, 0.0];
        if degree >= 3 {
            let (xx, yy, zz) = (x * x, y * y, z * z);
            g[9] = [SH_C3[0] * 6.0 * x * y, SH_C3[0] * (3.0 * xx - 3.0 * yy), 0.0];
            g[10] = [SH_C3[1] * y * z, SH_C3[1] * x * z, SH_C3[1] * x * y];
            g[11] = [
                SH_C3[2] * -2.0 * x * y,
                SH_C3[2] * (4.0 * zz - xx - 3.0 * yy),
                SH_C3[2] * 8.0 * y * z,
            ];
            g[12] = [
                SH_C3[3] * -6.0 * x * z,
                SH_C3[3] * -6.0 * y * z,
                SH_C3[3] * (6.0 * zz - 3.0 * xx - 3.0 * yy),
            ];
            g[13] = [
                SH_C3[4] * (4.0 * zz - 3.0 * xx - yy),
                SH_C3[4] * -2.0 * x * y,
                SH_C3[4] * 8.0 * x * z,
            ];
            g[14] = [SH_C3[5] * 2.0 * x * z, SH_C3[5] * -2.0 * y * z, SH_C3[5] * (xx - yy)];
            g[15] = [SH_C3[6] * (3.0 * xx - 3.0 * yy), SH_C3[6] * -6.0 * x * y, 0.0];
        }
    }
    g
}

/// Unclamped color `sum_k c_k Y_k(d) + 0.5` for a unit direction.
pub(crate) fn eval_sh_unclamped(color: &ShColor, dir: &Vector3<f64>) -> [f64; 3] {
    let y = sh_basis(color.degree, dir);
    let mut rgb = [0.5; 3];
    for (k, c) in color.coeffs().iter().enumerate() {
        for ch in 0..3 {
            rgb[ch] += c[ch] * y[k];
        }
    }
    rgb
}

/// Radiance seen along `view_dir`: SH sum, offset by +0.5, clamped at zero.
pub fn eval_sh(color: &ShColor, view_dir: &Vector3<f64>) -> Result<[f64; 3]> {
    let n = view_dir.norm();
    if !((n - 1.0).abs() <= 1e-6) {
        return Err(Error::invalid(format!("view direction has norm {n}, expected unit")));
    }
    Ok(eval_sh_unclamped(color, view_dir).map(|v| v.max(0.0)))
}
