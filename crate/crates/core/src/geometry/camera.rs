use nalgebra::{Matrix3, Matrix3x4, UnitQuaternion, Vector2, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use super::rotation::check_rotation;
use super::GeometryError;

/// Points closer to the camera plane than this (meters) cannot be projected.
pub const MIN_DEPTH: f64 = 1e-6;

/// Zero-skew pinhole intrinsics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: f64,
    pub height: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: f64, height: f64) -> Result<Self, GeometryError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// Square-pixel camera with the principal point at the image center and
    /// the given horizontal field of view.
    pub fn from_horizontal_fov(width: f64, height: f64, fov_degrees: f64) -> Result<Self, GeometryError> {
        if !(fov_degrees > 0.0 && fov_degrees < 180.0) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "field of view {fov_degrees} must lie in (0, 180) degrees"
            )));
        }
        let f = 0.5 * width / (0.5 * fov_degrees.to_radians()).tan();
        Self::new(f, f, 0.5 * width, 0.5 * height, width, height)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let all = [self.fx, self.fy, self.cx, self.cy, self.width, self.height];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics("non-finite value".into()));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(GeometryError::InvalidIntrinsics("focal lengths must be positive".into()));
        }
        if self.width <= 0.0 || self.height <= 0.0 {
            return Err(GeometryError::InvalidIntrinsics("image size must be positive".into()));
        }
        if !(0.0..=self.width).contains(&self.cx) || !(0.0..=self.height).contains(&self.cy) {
            return Err(GeometryError::InvalidIntrinsics(
                "principal point outside the image".into(),
            ));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Image diagonal in pixels. Doubles as the per-joint penalty for points
    /// that fall behind the camera during cost evaluation.
    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.height)
    }

    pub fn contains(&self, pixel: &Vector2<f64>) -> bool {
        pixel.x >= 0.0 && pixel.x < self.width && pixel.y >= 0.0 && pixel.y < self.height
    }

    /// Pixel to normalized image coordinates.
    pub fn normalize(&self, pixel: &Vector2<f64>) -> Vector2<f64> {
        Vector2::new((pixel.x - self.cx) / self.fx, (pixel.y - self.cy) / self.fy)
    }
}

/// Rigid world-to-camera transform: `x_cam = R x_world + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrinsics {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Extrinsics {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        check_rotation(&rotation)?;
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::DegenerateConfiguration(
                "non-finite translation".into(),
            ));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_quaternion(q: &UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: q.to_rotation_matrix().into_inner(),
            translation,
        }
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_matrix(&self.rotation)
    }

    pub fn transform_point(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * x + self.translation
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    /// Camera placed at `eye` looking at `target`, with image "up" as close to
    /// `up` as possible.
    pub fn look_at(eye: &Vector3<f64>, target: &Vector3<f64>, up: &Vector3<f64>) -> Result<Self, GeometryError> {
        let forward = target - eye;
        if forward.norm() < MIN_DEPTH {
            return Err(GeometryError::DegenerateConfiguration("eye equals target".into()));
        }
        let z = forward.normalize();
        let x = (-up).cross(&z);
        if x.norm() < 1e-9 {
            return Err(GeometryError::DegenerateConfiguration(
                "viewing direction parallel to up".into(),
            ));
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let rotation = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let translation = -(rotation * eye);
        Self::new(rotation, translation)
    }
}

/// `P = K [R | t]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionMatrix(Matrix3x4<f64>);

impl ProjectionMatrix {
    pub fn new(k: &Intrinsics, extrinsics: &Extrinsics) -> Self {
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&extrinsics.rotation);
        rt.set_column(3, &extrinsics.translation);
        Self(k.matrix() * rt)
    }

    /// Wraps an arbitrary homogeneous projection. Any positive multiple of a
    /// constructed matrix projects identically.
    pub fn from_matrix(m: Matrix3x4<f64>) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix3x4<f64> {
        &self.0
    }
}

pub fn project_point(p: &ProjectionMatrix, x: &Vector3<f64>) -> Result<Vector2<f64>, GeometryError> {
    let h = p.0 * Vector4::new(x.x, x.y, x.z, 1.0);
    if !(h.z > MIN_DEPTH) {
        return Err(GeometryError::NonPositiveDepth { index: 0, depth: h.z });
    }
    Ok(Vector2::new(h.x / h.z, h.y / h.z))
}

/// Projects world points to pixels; fails on the first point without
/// positive depth.
pub fn project(p: &ProjectionMatrix, points: &[Vector3<f64>]) -> Result<Vec<Vector2<f64>>, GeometryError> {
    points
        .iter()
        .enumerate()
        .map(|(index, x)| {
            project_point(p, x).map_err(|e| match e {
                GeometryError::NonPositiveDepth { depth, .. } => {
                    GeometryError::NonPositiveDepth { index, depth }
                }
                other => other,
            })
        })
        .collect()
}
