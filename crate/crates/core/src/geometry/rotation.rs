use nalgebra::{Matrix3, Rotation3, Vector3};

/// Tolerance used when validating orthonormality and determinant of rotations.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Angle of the relative rotation `R_aᵀ R_b`, in radians, clamped to `[0, π]`.
pub fn geodesic_rotation_error(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let relative = a.transpose() * b;
    let cos = ((relative.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    cos.acos()
}

/// Largest absolute deviation of `RᵀR` from identity, or of `det(R)` from one.
fn rotation_defect(r: &Matrix3<f64>) -> f64 {
    let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
    let det = (r.determinant() - 1.0).abs();
    ortho.max(det)
}

/// True when `r` is orthonormal with determinant +1 within [`ROTATION_TOLERANCE`].
pub fn is_rotation(r: &Matrix3<f64>) -> bool {
    r.iter().all(|v| v.is_finite()) && rotation_defect(r) <= ROTATION_TOLERANCE
}

pub(crate) fn check_rotation(r: &Matrix3<f64>) -> Result<(), super::GeometryError> {
    if is_rotation(r) {
        Ok(())
    } else {
        Err(super::GeometryError::InvalidRotation {
            error: rotation_defect(r),
        })
    }
}

/// Closest rotation to `m` in the Frobenius sense (polar decomposition).
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut fix = Matrix3::identity();
        fix[(2, 2)] = -1.0;
        // singular values come back sorted, smallest last
        r = u * fix * v_t;
    }
    r
}

pub fn rotation_from_scaled_axis(axis_angle: &Vector3<f64>) -> Matrix3<f64> {
    Rotation3::from_scaled_axis(*axis_angle).into_inner()
}

pub fn rotation_to_scaled_axis(r: &Matrix3<f64>) -> Vector3<f64> {
    Rotation3::from_matrix_unchecked(*r).scaled_axis()
}
