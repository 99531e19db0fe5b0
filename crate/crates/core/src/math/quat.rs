//! Unit quaternions and 3D rotation matrices.

use nalgebra::Matrix3;

use crate::error::{Error, Result};

/// Tolerance on `|q| - 1` accepted by the conversion routines.
pub const UNIT_TOLERANCE: f64 = 1e-6;
/// Below this value of `1 + tr(R)` the trace formula loses precision and the
/// largest-diagonal branch is used instead.
pub const TRACE_BRANCH_EPS: f64 = 1e-6;
/// Orthonormality / determinant tolerance for rotation matrices.
pub const ROTATION_TOLERANCE: f64 = 1e-8;

/// A unit quaternion `w + xi + yj + zk` stored with canonical sign.
///
/// Canonical sign means `w >= 0`, and when `w == 0` the first nonzero of
/// `x, y, z` is positive. `q` and `-q` describe the same 3D rotation, so the
/// canonical form is a unique representative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitQuat {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl UnitQuat {
    pub const IDENTITY: UnitQuat = UnitQuat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Normalizes and canonicalizes `(w, x, y, z)`.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < 1e-300 {
            return Err(Error::invalid(format!(
                "cannot normalize quaternion ({w}, {x}, {y}, {z})"
            )));
        }
        Ok(Self::canonical(w / n, x / n, y / n, z / n))
    }

    pub fn from_array(q: [f64; 4]) -> Result<Self> {
        Self::new(q[0], q[1], q[2], q[3])
    }

    /// Rotation by `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Result<Self> {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if n < 1e-300 {
            return Err(Error::invalid("zero rotation axis"));
        }
        let (s, c) = (0.5 * angle).sin_cos();
        Self::new(c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n)
    }

    /// Wraps components that are already unit length and canonical without
    /// touching a single bit. Used by deserialization.
    pub(crate) fn from_raw_unchecked(q: [f64; 4]) -> Self {
        UnitQuat { w: q[0], x: q[1], y: q[2], z: q[3] }
    }

    fn canonical(w: f64, x: f64, y: f64, z: f64) -> Self {
        let flip = if w != 0.0 {
            w < 0.0
        } else if x != 0.0 {
            x < 0.0
        } else if y != 0.0 {
            y < 0.0
        } else {
            z < 0.0
        };
        if flip {
            UnitQuat { w: -w, x: -x, y: -y, z: -z }
        } else {
            UnitQuat { w, x, y, z }
        }
    }

    /// Like [`UnitQuat::new`] but also reports whether canonicalization
    /// flipped the sign of the normalized input.
    pub(crate) fn new_reporting_flip(q: [f64; 4]) -> Result<(Self, bool)> {
        let u = Self::from_array(q)?;
        let flipped = q.iter().zip(u.as_array()).any(|(a, b)| a * b < 0.0);
        Ok((u, flipped))
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn conjugate(&self) -> [f64; 4] {
        [self.w, -self.x, -self.y, -self.z]
    }

    /// Distance to `other` modulo the sign ambiguity.
    pub fn sign_invariant_distance(&self, other: &UnitQuat) -> f64 {
        let a = self.as_array();
        let b = other.as_array();
        let plus: f64 = (0..4).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt();
        let minus: f64 = (0..4).map(|i| (a[i] + b[i]).powi(2)).sum::<f64>().sqrt();
        plus.min(minus)
    }
}

/// Hamilton product of two quaternions given as `[w, x, y, z]`.
pub fn quat_mul(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

/// A proper 3D rotation matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rot3(Matrix3<f64>);

impl Rot3 {
    pub fn identity() -> Self {
        Rot3(Matrix3::identity())
    }

    /// Validates orthonormality and `det = +1` within [`ROTATION_TOLERANCE`].
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        let ortho = (m.transpose() * m - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if !(ortho <= ROTATION_TOLERANCE) || !((det - 1.0).abs() <= ROTATION_TOLERANCE) {
            return Err(Error::invalid(format!(
                "not a proper rotation (|RtR - I| = {ortho:e}, det = {det})"
            )));
        }
        Ok(Rot3(m))
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rot3(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }
}

/// Rotation matrix of a unit quaternion given as raw components.
///
/// The components are used as-is; callers normalize first.
pub(crate) fn rot3_matrix(q: [f64; 4]) -> Matrix3<f64> {
    let [w, x, y, z] = q;
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

pub fn quat_to_rot3(q: &UnitQuat) -> Result<Rot3> {
    if (q.norm() - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::invalid(format!("quaternion norm {} is not unit", q.norm())));
    }
    Ok(Rot3(rot3_matrix(q.as_array())))
}

/// Quaternion of a rotation matrix.
///
/// Uses the trace formula `w = sqrt(1 + tr R) / 2` with the antisymmetric
/// part giving `x, y, z`; near `tr R = -1` that divides by a vanishing `w`, so
/// the largest-diagonal branch takes over.
pub fn rot3_to_quat(r: &Rot3) -> UnitQuat {
    let m = &r.0;
    let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
    let q = if 1.0 + trace >= TRACE_BRANCH_EPS {
        let w = 0.5 * (1.0 + trace).sqrt();
        let f = 1.0 / (4.0 * w);
        [
            w,
            (m[(2, 1)] - m[(1, 2)]) * f,
            (m[(0, 2)] - m[(2, 0)]) * f,
            (m[(1, 0)] - m[(0, 1)]) * f,
        ]
    } else if m[(0, 0)] >= m[(1, 1)] && m[(0, 0)] >= m[(2, 2)] {
        let x = 0.5 * (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).max(0.0).sqrt();
        let f = 1.0 / (4.0 * x);
        [
            (m[(2, 1)] - m[(1, 2)]) * f,
            x,
            (m[(0, 1)] + m[(1, 0)]) * f,
            (m[(0, 2)] + m[(2, 0)]) * f,
        ]
    } else if m[(1, 1)] >= m[(2, 2)] {
        let y = 0.5 * (1.0 - m[(0, 0)] + m[(1, 1)] - m[(2, 2)]).max(0.0).sqrt();
        let f = 1.0 / (4.0 * y);
        [
            (m[(0, 2)] - m[(2, 0)]) * f,
            (m[(0, 1)] + m[(1, 0)]) * f,
            y,
            (m[(1, 2)] + m[(2, 1)]) * f,
        ]
    } else {
        let z = 0.5 * (1.0 - m[(0, 0)] - m[(1, 1)] + m[(2, 2)]).max(0.0).sqrt();
        let f = 1.0 / (4.0 * z);
        [
            (m[(1, 0)] - m[(0, 1)]) * f,
            (m[(0, 2)] + m[(2, 0)]) * f,
            (m[(1, 2)] + m[(2, 1)]) * f,
            z,
        ]
    };
    // A valid rotation never produces a zero quaternion here.
    UnitQuat::from_array(q).expect("rotation matrix yields a nonzero quaternion")
}

/// Like [`rot3_to_quat`] but validates the matrix first.
pub fn matrix_to_quat(m: Matrix3<f64>) -> Result<UnitQuat> {
    Ok(rot3_to_quat(&Rot3::new(m)?))
}
