//! Four-dimensional rotations built from a pair of unit quaternions.
//!
//! A 4D rotation factors as `R = L(a) * Rr(p)`, where `L` is left
//! multiplication by the quaternion `a` and `Rr` right multiplication by `p`,
//! acting on the vector `(x, y, z, t)` read as a quaternion. The pair
//! `(-a, -p)` gives the same matrix. Because every member of a [`QuatPair`] is
//! stored with canonical sign, a pair may reproduce `-R` instead of `R`; both
//! yield the same covariance `R S S^T R^T`.

use nalgebra::{Matrix3, Matrix4};

use super::quat::{Rot3, UnitQuat, ROTATION_TOLERANCE};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuatPair {
    pub left: UnitQuat,
    pub right: UnitQuat,
}

impl QuatPair {
    pub const IDENTITY: QuatPair = QuatPair { left: UnitQuat::IDENTITY, right: UnitQuat::IDENTITY };

    pub fn new(left: UnitQuat, right: UnitQuat) -> Self {
        QuatPair { left, right }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rot4(Matrix4<f64>);

impl Rot4 {
    pub fn identity() -> Self {
        Rot4(Matrix4::identity())
    }

    pub fn new(m: Matrix4<f64>) -> Result<Self> {
        let ortho = (m.transpose() * m - Matrix4::identity()).abs().max();
        let det = m.determinant();
        if !(ortho <= ROTATION_TOLERANCE) || !((det - 1.0).abs() <= ROTATION_TOLERANCE) {
            return Err(Error::invalid(format!(
                "not a proper 4D rotation (|RtR - I| = {ortho:e}, det = {det})"
            )));
        }
        Ok(Rot4(m))
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    /// Frobenius norm of the space-time mixing entries `R[0..3, 3]` and `R[3, 0..3]`.
    pub fn leakage(&self) -> f64 {
        let m = &self.0;
        (0..3).map(|i| m[(i, 3)].powi(2) + m[(3, i)].powi(2)).sum::<f64>().sqrt()
    }
}

/// Left-multiplication matrix of `(a, b, c, d)`.
pub(crate) fn left_matrix(q: [f64; 4]) -> Matrix4<f64> {
    let [a, b, c, d] = q;
    Matrix4::new(
        a, -b, -c, -d, //
        b, a, -d, c, //
        c, d, a, -b, //
        d, -c, b, a,
    )
}

/// Right-multiplication matrix of `(p, q, r, s)`.
pub(crate) fn right_matrix(q: [f64; 4]) -> Matrix4<f64> {
    let [p, q, r, s] = q;
    Matrix4::new(
        p, -q, -r, -s, //
        q, p, s, -r, //
        r, -s, p, q, //
        s, r, -q, p,
    )
}

pub fn rot4_from_pair(pair: &QuatPair) -> Rot4 {
    Rot4(left_matrix(pair.left.as_array()) * right_matrix(pair.right.as_array()))
}

/// Recovers a quaternion pair with `rot4_from_pair(pair) = ±R`.
///
/// The sixteen products `L(e_k) Rr(e_l)` are mutually orthogonal with squared
/// Frobenius norm 4, so projecting `R` onto them yields the rank-one matrix
/// `a p^T`, from which both factors are read off.
pub fn pair_from_rot4(r: &Rot4) -> QuatPair {
    let basis = |k: usize| -> [f64; 4] { std::array::from_fn(|i| if i == k { 1.0 } else { 0.0 }) };
    let mut outer = Matrix4::zeros();
    for k in 0..4 {
        let lk = left_matrix(basis(k));
        for l in 0..4 {
            let prod = lk * right_matrix(basis(l));
            outer[(k, l)] = 0.25 * r.0.component_mul(&prod).sum();
        }
    }
    let (best_col, _) = (0..4)
        .map(|l| (l, outer.column(l).norm()))
        .fold((0, -1.0), |acc, (l, n)| if n > acc.1 { (l, n) } else { acc });
    let col = outer.column(best_col);
    let a = col / col.norm();
    let p = outer.transpose() * a;
    let left = UnitQuat::new(a[0], a[1], a[2], a[3]).expect("nonzero left factor");
    let right = UnitQuat::new(p[0], p[1], p[2], p[3]).expect("nonzero right factor");
    QuatPair { left, right }
}

/// Nearest proper 3D rotation to the top-left block of `R`, plus the
/// space-time leakage of `R`.
///
/// The block is projected onto SO(3) with the polar factor of its SVD
/// (orthogonal Procrustes). A block that is already a rotation is returned
/// unchanged.
pub fn extract_spatial_rot(r: &Rot4) -> Result<(Rot3, f64)> {
    let block: Matrix3<f64> = r.0.fixed_view::<3, 3>(0, 0).into_owned();
    let leakage = r.leakage();

    let ortho = (block.transpose() * block - Matrix3::identity()).abs().max();
    if ortho < 1e-12 && block.determinant() > 0.0 {
        return Ok((Rot3::from_matrix_unchecked(block), leakage));
    }

    let svd = block.svd(true, true);
    let max_sv = svd.singular_values.max();
    if max_sv < 1e-9 {
        return Err(Error::DegenerateRotation(max_sv));
    }
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let d = (u * v_t).determinant().signum();
    let fix = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0, d));
    Ok((Rot3::from_matrix_unchecked(u * fix * v_t), leakage))
}
