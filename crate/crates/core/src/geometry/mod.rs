//! Pinhole camera model, PnP extrinsic estimation and skeleton forward
//! kinematics.
//!
//! Everything here is a pure function of its inputs. World coordinates are
//! meters in the LiDAR frame; camera coordinates follow the usual
//! x-right / y-down / z-forward convention; pixel coordinates have their
//! origin at the top-left corner of the image.

mod camera;
mod pnp;
mod rotation;
mod skeleton;

pub use camera::{project, project_point, Extrinsics, Intrinsics, ProjectionMatrix, MIN_DEPTH};
pub use pnp::{solve_pnp, solve_pnp_from, PnpSolution, PNP_MAX_ITERATIONS, PNP_MIN_CORRESPONDENCES};
pub use rotation::{
    geodesic_rotation_error, is_rotation, nearest_rotation, rotation_from_scaled_axis,
    rotation_to_scaled_axis, ROTATION_TOLERANCE,
};
pub use skeleton::{
    forward_kinematics, forward_kinematics_relative, BodyPose, CanonicalSkeleton, SkeletonError,
    CANONICAL_SKELETON_TEXT, JOINT_COUNT,
};

use thiserror::Error;

/// Errors raised by the geometric primitives.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeometryError {
    #[error("point {index} lies at or behind the camera plane (depth {depth})")]
    NonPositiveDepth { index: usize, depth: f64 },
    #[error("need at least {required} valid correspondences, got {found}")]
    InsufficientCorrespondences { found: usize, required: usize },
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("refinement did not converge after {iterations} iterations (rms {rms:.4} px)")]
    NoConvergence { iterations: usize, rms: f64 },
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("matrix is not a proper rotation (orthonormality error {error:e})")]
    InvalidRotation { error: f64 },
    #[error("body pose must have {expected} rotations, got {found}")]
    PoseArity { expected: usize, found: usize },
}
