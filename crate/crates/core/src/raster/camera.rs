use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Pinhole camera. Camera space is x right, y down, z forward; pixel
/// `(i, j)` has its center at `(i + 0.5, j + 0.5)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub near: f64,
    pub far: f64,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Camera {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        near: f64,
        far: f64,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::invalid("focal lengths must be positive"));
        }
        if !(near > 0.0 && near < far) {
            return Err(Error::invalid(format!("need 0 < near < far, got near={near} far={far}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid("image size must be nonzero"));
        }
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if !(ortho <= 1e-8) {
            return Err(Error::invalid(format!("camera rotation not orthonormal ({ortho:e})")));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("camera translation not finite"));
        }
        Ok(Camera { fx, fy, cx, cy, width, height, near, far, rotation, translation })
    }

    /// Camera at `eye` looking at `target`, with horizontal field of view
    /// `fov_x` radians and the principal point at the image center.
    #[allow(clippy::too_many_arguments)]
    pub fn look_at(
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
        fov_x: f64,
        width: usize,
        height: usize,
        near: f64,
        far: f64,
    ) -> Result<Self> {
        let z = (target - eye).normalize();
        let x = z.cross(&up);
        if x.norm() < 1e-9 {
            return Err(Error::invalid("look_at: up is parallel to the view direction"));
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let rotation = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let f = 0.5 * width as f64 / (0.5 * fov_x).tan();
        Camera::new(
            f,
            f,
            0.5 * width as f64,
            0.5 * height as f64,
            width,
            height,
            near,
            far,
            rotation,
            -(rotation * eye),
        )
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    /// Pixel coordinates of a camera-space point with `z > 0`.
    pub fn project_camera_point(&self, p: &Vector3<f64>) -> [f64; 2] {
        [self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy]
    }

    /// World-to-camera `[R | t]` as 12 row-major values.
    pub fn extrinsic_row_major(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x, //
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y, //
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
        ]
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_extrinsic_row_major(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        near: f64,
        far: f64,
        e: &[f64; 12],
    ) -> Result<Self> {
        let rotation = Matrix3::new(e[0], e[1], e[2], e[4], e[5], e[6], e[8], e[9], e[10]);
        let translation = Vector3::new(e[3], e[7], e[11]);
        Camera::new(fx, fy, cx, cy, width, height, near, far, rotation, translation)
    }
}
