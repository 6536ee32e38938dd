//! Identity matching between LiDAR person tracks and camera person tracks,
//! with per-frame camera pose recovery.
//!
//! The entry point is [`pcm`]: a sequence-level pose-similarity match,
//! verified against the spread of the camera poses it implies and replaced
//! by per-frame key-point search ([`opt_match`]) when that spread is large.

mod ablation;
mod assignment;
mod cost;
mod opt_match;
mod pcm;
mod tracks;

pub use ablation::{ablation_match, AblationMode};
pub use assignment::{hungarian, CostMatrix, MatchPair, MatchSet, Orientation};
pub use cost::{body_pose_cost, pose_similarity, reprojection_cost, weighted_cost, PoseCache};
pub use opt_match::{opt_match, OptMatchOutput};
pub use pcm::{
    initial_match, pcm, per_frame_extrinsics, smooth_extrinsics, variance_of_translations, PcmOutput,
    PcmStats,
};
pub use tracks::{
    jointly_valid, pair_is_usable, timeline_length, FrameView, Observation2D, Observation3D,
    PersonTrack2D, PersonTrack3D,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, Intrinsics};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MatchError {
    #[error("3D person {idx3d} and 2D person {idx2d} are never valid in the same frame")]
    NoCommonFrames { idx3d: usize, idx2d: usize },
    #[error("track length {found} differs from the common timeline length {expected}")]
    TimelineMismatch { expected: usize, found: usize },
    #[error("no seed pair produced a camera pose at frame {frame}")]
    NoViableProposal { frame: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid track: {0}")]
    InvalidTrack(String),
    #[error("invalid cost matrix: {0}")]
    InvalidCost(String),
    #[error("exhaustive search over {candidates} candidates exceeds the limit of {limit}")]
    ExhaustiveSearchTooLarge { candidates: u128, limit: u128 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Tuning of the sequence-level matcher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcmConfig {
    /// Variance gate on the per-frame camera translations, in cm². The
    /// key-point search runs when the variance exceeds it. Serialized as
    /// the string `"inf"` when infinite (JSON has no infinity).
    #[serde(with = "unbounded")]
    pub delta: f64,
    /// Weight of the body-pose reprojection term.
    pub lambda0: f64,
    /// Refinement passes per proposal in the per-frame search.
    pub n_iter: usize,
    /// Largest mean reprojection error (px) a pair may have and survive.
    /// `None` means 5% of the image diagonal.
    pub reject_threshold: Option<f64>,
    /// Median filter width (frames) applied to the per-frame camera poses.
    pub smoothing_window: usize,
    /// Seed for the randomized ablation strategies.
    pub seed: u64,
}

impl Default for PcmConfig {
    fn default() -> Self {
        Self {
            delta: 100.0,
            lambda0: 0.1,
            n_iter: 2,
            reject_threshold: None,
            smoothing_window: 9,
            seed: 0,
        }
    }
}

impl PcmConfig {
    pub fn validate(&self) -> Result<(), MatchError> {
        // delta = 0 is allowed so the key-point path can be forced
        if self.delta.is_nan() || self.delta < 0.0 {
            return Err(MatchError::InvalidConfig(format!("delta must be >= 0, got {}", self.delta)));
        }
        if !(self.lambda0 >= 0.0 && self.lambda0.is_finite()) {
            return Err(MatchError::InvalidConfig(format!("lambda0 must be >= 0, got {}", self.lambda0)));
        }
        if self.n_iter == 0 {
            return Err(MatchError::InvalidConfig("n_iter must be >= 1".into()));
        }
        if let Some(t) = self.reject_threshold {
            if !(t > 0.0) {
                return Err(MatchError::InvalidConfig(format!("reject_threshold must be > 0, got {t}")));
            }
        }
        if self.smoothing_window == 0 || self.smoothing_window % 2 == 0 {
            return Err(MatchError::InvalidConfig(format!(
                "smoothing_window must be odd and >= 1, got {}",
                self.smoothing_window
            )));
        }
        Ok(())
    }

    pub fn reject_threshold_px(&self, k: &Intrinsics) -> f64 {
        self.reject_threshold.unwrap_or(0.05 * k.diagonal())
    }
}

mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) if matches!(t.to_ascii_lowercase().as_str(), "inf" | "+inf" | "infinity") => {
                Ok(f64::INFINITY)
            }
            Repr::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}
