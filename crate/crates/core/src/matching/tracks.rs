use nalgebra::{Vector2, Vector3};

use super::MatchError;
use crate::geometry::{BodyPose, JOINT_COUNT, PNP_MIN_CORRESPONDENCES};

/// One LiDAR-side detection of a person: world joints plus body pose.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation3D {
    pub joints: Vec<Vector3<f64>>,
    /// Root rotation is the global orientation in the world frame.
    pub body_pose: BodyPose,
}

/// One camera-side detection of a person.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation2D {
    pub joints: Vec<Vector2<f64>>,
    /// Per-joint confidence in `[0, 1]`; zero marks a missing joint.
    pub confidence: Vec<f64>,
    /// Root rotation is the global orientation in the camera frame.
    pub body_pose: BodyPose,
}

impl Observation3D {
    pub fn new(joints: Vec<Vector3<f64>>, body_pose: BodyPose) -> Result<Self, MatchError> {
        if joints.len() != JOINT_COUNT {
            return Err(MatchError::InvalidTrack(format!(
                "3D observation has {} joints, expected {JOINT_COUNT}",
                joints.len()
            )));
        }
        if joints.iter().any(|j| j.iter().any(|v| !v.is_finite())) {
            return Err(MatchError::InvalidTrack("non-finite 3D joint".into()));
        }
        Ok(Self { joints, body_pose })
    }

    pub fn root(&self) -> &Vector3<f64> {
        &self.joints[0]
    }
}

impl Observation2D {
    pub fn new(joints: Vec<Vector2<f64>>, confidence: Vec<f64>, body_pose: BodyPose) -> Result<Self, MatchError> {
        if joints.len() != JOINT_COUNT || confidence.len() != JOINT_COUNT {
            return Err(MatchError::InvalidTrack(format!(
                "2D observation has {} joints and {} confidences, expected {JOINT_COUNT}",
                joints.len(),
                confidence.len()
            )));
        }
        if confidence.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(MatchError::InvalidTrack("confidence outside [0, 1]".into()));
        }
        if joints
            .iter()
            .zip(&confidence)
            .any(|(j, &c)| c > 0.0 && j.iter().any(|v| !v.is_finite()))
        {
            return Err(MatchError::InvalidTrack("non-finite 2D joint".into()));
        }
        Ok(Self {
            joints,
            confidence,
            body_pose,
        })
    }

    pub fn observed_joints(&self) -> usize {
        self.confidence.iter().filter(|&&c| c > 0.0).count()
    }
}

/// Joints usable for a 3D/2D pair: finite on both sides with positive confidence.
pub fn jointly_valid<'a>(o3: &'a Observation3D, o2: &'a Observation2D) -> impl Iterator<Item = usize> + 'a {
    (0..JOINT_COUNT).filter(move |&k| {
        o2.confidence[k] > 0.0
            && o2.joints[k].iter().all(|v| v.is_finite())
            && o3.joints[k].iter().all(|v| v.is_finite())
    })
}

/// A pair can enter a frame's costs only with enough joints to pin down a
/// camera pose.
pub fn pair_is_usable(o3: &Observation3D, o2: &Observation2D) -> bool {
    jointly_valid(o3, o2).count() >= PNP_MIN_CORRESPONDENCES
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersonTrack3D {
    pub person_id: String,
    /// One entry per frame; `None` where the person was not observed.
    pub frames: Vec<Option<Observation3D>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersonTrack2D {
    pub person_id: String,
    pub frames: Vec<Option<Observation2D>>,
}

impl PersonTrack3D {
    pub fn new(person_id: impl Into<String>, frames: Vec<Option<Observation3D>>) -> Self {
        Self {
            person_id: person_id.into(),
            frames,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn at(&self, frame: usize) -> Option<&Observation3D> {
        self.frames.get(frame).and_then(Option::as_ref)
    }
}

impl PersonTrack2D {
    pub fn new(person_id: impl Into<String>, frames: Vec<Option<Observation2D>>) -> Self {
        Self {
            person_id: person_id.into(),
            frames,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn at(&self, frame: usize) -> Option<&Observation2D> {
        self.frames.get(frame).and_then(Option::as_ref)
    }
}

/// Common timeline length of all tracks, or an error when they disagree.
pub fn timeline_length(tracks3d: &[PersonTrack3D], tracks2d: &[PersonTrack2D]) -> Result<usize, MatchError> {
    let mut lengths = tracks3d.iter().map(|t| t.len()).chain(tracks2d.iter().map(|t| t.len()));
    let Some(first) = lengths.next() else {
        return Ok(0);
    };
    for found in lengths {
        if found != first {
            return Err(MatchError::TimelineMismatch {
                expected: first,
                found,
            });
        }
    }
    Ok(first)
}

/// Persons present and usable at one frame, keyed by their track index.
#[derive(Debug, Clone)]
pub struct FrameView<'a> {
    pub frame: usize,
    pub persons3d: Vec<(usize, &'a Observation3D)>,
    pub persons2d: Vec<(usize, &'a Observation2D)>,
}

impl<'a> FrameView<'a> {
    /// Collects persons with at least six usable joints at `frame`.
    pub fn at(tracks3d: &'a [PersonTrack3D], tracks2d: &'a [PersonTrack2D], frame: usize) -> Self {
        let persons3d = tracks3d
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.at(frame).map(|o| (i, o)))
            .filter(|(_, o)| o.joints.iter().filter(|j| j.iter().all(|v| v.is_finite())).count() >= PNP_MIN_CORRESPONDENCES)
            .collect();
        let persons2d = tracks2d
            .iter()
            .enumerate()
            .filter_map(|(j, t)| t.at(frame).map(|o| (j, o)))
            .filter(|(_, o)| o.observed_joints() >= PNP_MIN_CORRESPONDENCES)
            .collect();
        Self {
            frame,
            persons3d,
            persons2d,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.persons3d.is_empty() || self.persons2d.is_empty()
    }
}
