//! Covariance assembly and temporal conditioning.

use nalgebra::{DMatrix, Matrix3, Matrix4, SMatrix, SymmetricEigen, Vector3, Vector4};

use super::quat::Rot3;
use super::rot4::Rot4;
use crate::error::{Error, Result};

/// Smallest temporal variance accepted by [`condition_at_time`].
pub const MIN_TEMPORAL_VARIANCE: f64 = 1e-12;
/// Eigenvalue floor applied to conditioned covariances.
pub const EIGEN_FLOOR: f64 = 1e-12;
/// Negative eigenvalues down to this value are treated as round-off.
pub const NEGATIVE_EIGEN_TOLERANCE: f64 = 1e-8;

/// Symmetric positive semidefinite 3x3 covariance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cov3(Matrix3<f64>);

/// Symmetric positive semidefinite 4x4 space-time covariance; axes 0..3 are
/// spatial, axis 3 is normalized time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cov4(Matrix4<f64>);

impl Cov3 {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        check_symmetric_psd(&m)?;
        Ok(Cov3(m))
    }
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }
}

impl Cov4 {
    pub fn new(m: Matrix4<f64>) -> Result<Self> {
        check_symmetric_psd(&m)?;
        Ok(Cov4(m))
    }
    pub(crate) fn from_matrix_unchecked(m: Matrix4<f64>) -> Self {
        Cov4(m)
    }
    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }
    pub fn temporal_variance(&self) -> f64 {
        self.0[(3, 3)]
    }
}

fn check_symmetric_psd<const D: usize>(m: &SMatrix<f64, D, D>) -> Result<()> {
    let asym = (m - m.transpose()).abs().max();
    if !(asym <= 1e-10) {
        return Err(Error::invalid(format!("covariance not symmetric (max asymmetry {asym:e})")));
    }
    let dyn_m = DMatrix::from_column_slice(D, D, m.as_slice());
    let min_eig = SymmetricEigen::new(dyn_m).eigenvalues.min();
    if min_eig < -NEGATIVE_EIGEN_TOLERANCE {
        return Err(Error::NotPsd(min_eig));
    }
    Ok(())
}

/// `R diag(exp(2 s)) R^T`, written out entrywise so the result is symmetric
/// to the last bit.
pub(crate) fn rotated_diag<const D: usize>(
    r: &SMatrix<f64, D, D>,
    log_scales: &[f64; D],
) -> SMatrix<f64, D, D> {
    let var: [f64; D] = std::array::from_fn(|k| (2.0 * log_scales[k]).exp());
    let mut out = SMatrix::<f64, D, D>::zeros();
    for i in 0..D {
        for j in i..D {
            let v: f64 = (0..D).map(|k| r[(i, k)] * var[k] * r[(j, k)]).sum();
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

pub fn build_cov3(r: &Rot3, log_scales: [f64; 3]) -> Cov3 {
    Cov3(rotated_diag(r.matrix(), &log_scales))
}

pub fn build_cov4(r: &Rot4, log_scales: [f64; 4]) -> Cov4 {
    Cov4(rotated_diag(r.matrix(), &log_scales))
}

/// The spatial Gaussian obtained by conditioning a 4D Gaussian on time `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TemporalSlice {
    pub mean3: Vector3<f64>,
    pub cov3: Cov3,
    /// Marginal temporal density factor `exp(-(t - mu_t)^2 / (2 Sigma_tt))`.
    pub temporal_weight: f64,
}

/// Conditions `N(mean4, cov4)` on its time coordinate taking the value `t`.
///
/// `mean = mu_xyz + Sigma_xt / Sigma_tt * (t - mu_t)` and
/// `cov = Sigma_xx - Sigma_xt Sigma_tx / Sigma_tt` (Schur complement).
pub fn condition_at_time(mean4: &Vector4<f64>, cov4: &Cov4, t: f64) -> Result<TemporalSlice> {
    let s = &cov4.0;
    let var_t = s[(3, 3)];
    if !(var_t >= MIN_TEMPORAL_VARIANCE) {
        return Err(Error::DegenerateTemporal(var_t));
    }
    let dt = t - mean4[3];
    let cross = Vector3::new(s[(0, 3)], s[(1, 3)], s[(2, 3)]);
    let mean3 = Vector3::new(mean4[0], mean4[1], mean4[2]) + cross * (dt / var_t);
    let mut cov3 = Matrix3::zeros();
    for i in 0..3 {
        for j in i..3 {
            let v = 0.5 * (s[(i, j)] + s[(j, i)]) - cross[i] * cross[j] / var_t;
            cov3[(i, j)] = v;
            cov3[(j, i)] = v;
        }
    }
    let cov3 = clamp_psd(cov3)?;
    Ok(TemporalSlice {
        mean3,
        cov3: Cov3(cov3),
        temporal_weight: (-0.5 * dt * dt / var_t).exp(),
    })
}

/// Floors the eigenvalues of a symmetric matrix at [`EIGEN_FLOOR`].
///
/// Matrices whose smallest eigenvalue is provably above the floor are
/// returned untouched; the full eigendecomposition only runs otherwise.
pub(crate) fn clamp_psd(m: Matrix3<f64>) -> Result<Matrix3<f64>> {
    let m00 = m[(0, 0)];
    let minor = m00 * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let det = m.determinant();
    let trace = m.trace();
    // Sylvester: positive definite; lambda_min >= det / lambda_max^2 >= det / tr^2.
    if m00 > 0.0 && minor > 0.0 && det > 0.0 && det >= EIGEN_FLOOR * trace * trace {
        return Ok(m);
    }
    let eig = SymmetricEigen::new(m);
    let min_eig = eig.eigenvalues.min();
    if min_eig < -NEGATIVE_EIGEN_TOLERANCE || !min_eig.is_finite() {
        return Err(Error::NotPsd(min_eig));
    }
    let clamped = eig.eigenvalues.map(|v| v.max(EIGEN_FLOOR));
    let out = eig.eigenvectors * Matrix3::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    Ok(0.5 * (out + out.transpose()))
}
