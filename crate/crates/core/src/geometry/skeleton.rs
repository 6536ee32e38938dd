use std::path::Path;
use std::sync::OnceLock;

use nalgebra::{Matrix3, Vector3};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::rotation::{check_rotation, is_rotation};
use super::GeometryError;

/// Number of joints in every skeleton and body pose.
pub const JOINT_COUNT: usize = 24;

/// The versioned skeleton file shipped with the crate.
pub const CANONICAL_SKELETON_TEXT: &str = include_str!("../../data/skeleton.txt");

#[derive(Debug, Error)]
pub enum SkeletonError {
    #[error("skeleton line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("skeleton defines {found} joints, expected {JOINT_COUNT}")]
    JointCount { found: usize },
    #[error("reading skeleton file: {0}")]
    Io(#[from] std::io::Error),
}

/// Fixed 24-joint kinematic tree used to turn body poses into joint positions.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalSkeleton {
    names: Vec<String>,
    parents: Vec<Option<usize>>,
    offsets: Vec<Vector3<f64>>,
    hash: String,
}

impl CanonicalSkeleton {
    /// The built-in skeleton (parsed once).
    pub fn canonical() -> &'static CanonicalSkeleton {
        static SKELETON: OnceLock<CanonicalSkeleton> = OnceLock::new();
        SKELETON.get_or_init(|| {
            CanonicalSkeleton::parse(CANONICAL_SKELETON_TEXT).expect("bundled skeleton is valid")
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SkeletonError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parses the `name parent x y z` text format. Blank lines and lines
    /// starting with `#` are skipped. Parents must precede their children.
    pub fn parse(text: &str) -> Result<Self, SkeletonError> {
        let mut names = Vec::new();
        let mut parents = Vec::new();
        let mut offsets = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| SkeletonError::Parse {
                line: lineno + 1,
                message,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(err(format!("expected 5 fields, found {}", fields.len())));
            }
            let parent: i64 = fields[1]
                .parse()
                .map_err(|_| err(format!("bad parent index {:?}", fields[1])))?;
            let mut offset = Vector3::zeros();
            for (k, f) in fields[2..].iter().enumerate() {
                let v: f64 = f.parse().map_err(|_| err(format!("bad offset {f:?}")))?;
                if !v.is_finite() {
                    return Err(err("offset is not finite".into()));
                }
                offset[k] = v;
            }
            let index = names.len();
            let parent = match (index, parent) {
                (0, -1) => None,
                (0, _) => return Err(err("joint 0 must be the root (parent -1)".into())),
                (_, p) if p >= 0 && (p as usize) < index => Some(p as usize),
                (_, p) => {
                    return Err(err(format!(
                        "parent {p} must name an earlier joint"
                    )))
                }
            };
            names.push(fields[0].to_string());
            parents.push(parent);
            offsets.push(offset);
        }
        if names.len() != JOINT_COUNT {
            return Err(SkeletonError::JointCount { found: names.len() });
        }
        let hash = hex::encode(Sha256::digest(text.as_bytes()));
        Ok(Self {
            names,
            parents,
            offsets,
            hash,
        })
    }

    pub fn joint_count(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, joint: usize) -> &str {
        &self.names[joint]
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        self.parents[joint]
    }

    pub fn offset(&self, joint: usize) -> &Vector3<f64> {
        &self.offsets[joint]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// SHA-256 of the skeleton file text, lowercase hex.
    pub fn content_hash(&self) -> &str {
        &self.hash
    }
}

/// Per-joint local rotations, root first. The root entry carries global
/// orientation; the rest are relative to the parent joint.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyPose {
    rotations: Vec<Matrix3<f64>>,
}

impl BodyPose {
    pub fn new(rotations: Vec<Matrix3<f64>>) -> Result<Self, GeometryError> {
        if rotations.len() != JOINT_COUNT {
            return Err(GeometryError::PoseArity {
                expected: JOINT_COUNT,
                found: rotations.len(),
            });
        }
        for r in &rotations {
            check_rotation(r)?;
        }
        Ok(Self { rotations })
    }

    pub fn identity() -> Self {
        Self {
            rotations: vec![Matrix3::identity(); JOINT_COUNT],
        }
    }

    pub fn rotations(&self) -> &[Matrix3<f64>] {
        &self.rotations
    }

    pub fn root(&self) -> &Matrix3<f64> {
        &self.rotations[0]
    }

    pub fn with_root(&self, root: Matrix3<f64>) -> Self {
        let mut rotations = self.rotations.clone();
        rotations[0] = root;
        Self { rotations }
    }

    pub fn is_valid(&self) -> bool {
        self.rotations.len() == JOINT_COUNT && self.rotations.iter().all(is_rotation)
    }

    /// Non-root rotations, row-major, concatenated (207 values). The root is
    /// left out so the vector does not depend on the sensor's frame.
    pub fn local_feature(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity((JOINT_COUNT - 1) * 9);
        for r in &self.rotations[1..] {
            for i in 0..3 {
                for j in 0..3 {
                    out.push(r[(i, j)]);
                }
            }
        }
        out
    }
}

/// Joint positions relative to the root joint, in world axes.
pub fn forward_kinematics_relative(skeleton: &CanonicalSkeleton, pose: &BodyPose) -> Vec<Vector3<f64>> {
    let n = skeleton.joint_count();
    let mut global = Vec::with_capacity(n);
    let mut positions: Vec<Vector3<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let local = pose.rotations[j];
        match skeleton.parent(j) {
            None => {
                global.push(local);
                positions.push(Vector3::zeros());
            }
            Some(p) => {
                let parent_rot: Matrix3<f64> = global[p];
                positions.push(positions[p] + parent_rot * skeleton.offset(j));
                global.push(parent_rot * local);
            }
        }
    }
    positions
}

/// World joint positions for `pose` with the root joint at `root_position`.
pub fn forward_kinematics(
    skeleton: &CanonicalSkeleton,
    pose: &BodyPose,
    root_position: &Vector3<f64>,
) -> Vec<Vector3<f64>> {
    forward_kinematics_relative(skeleton, pose)
        .into_iter()
        .map(|p| p + root_position)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotation_from_scaled_axis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_pose(rng: &mut ChaCha8Rng) -> BodyPose {
        let rotations = (0..JOINT_COUNT)
            .map(|_| {
                let v = Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                rotation_from_scaled_axis(&v)
            })
            .collect();
        BodyPose::new(rotations).unwrap()
    }

    // Recursive oracle: walk up to the root composing transforms.
    fn global_rotation(s: &CanonicalSkeleton, pose: &BodyPose, j: usize) -> Matrix3<f64> {
        match s.parent(j) {
            None => pose.rotations()[j],
            Some(p) => global_rotation(s, pose, p) * pose.rotations()[j],
        }
    }

    fn oracle_position(s: &CanonicalSkeleton, pose: &BodyPose, root: &Vector3<f64>, j: usize) -> Vector3<f64> {
        match s.parent(j) {
            None => *root,
            Some(p) => oracle_position(s, pose, root, p) + global_rotation(s, pose, p) * s.offset(j),
        }
    }

    #[test]
    fn bundled_skeleton_parses() {
        let s = CanonicalSkeleton::canonical();
        assert_eq!(s.joint_count(), JOINT_COUNT);
        assert_eq!(s.parent(0), None);
        assert_eq!(s.name(15), "head");
        assert_eq!(s.content_hash().len(), 64);
        // 1.70 m overall: ankle clearance 0.07 below, head top 0.15 above
        let rest = forward_kinematics_relative(s, &BodyPose::identity());
        let head = rest[s.index_of("head").unwrap()].z;
        let ankle = rest[s.index_of("left_ankle").unwrap()].z;
        assert!(((head + 0.15) - (ankle - 0.07) - 1.70).abs() < 1e-9);
    }

    #[test]
    fn rest_pose_is_cumulative_offsets() {
        let s = CanonicalSkeleton::canonical();
        let root = Vector3::new(1.0, 2.0, 0.95);
        let joints = forward_kinematics(s, &BodyPose::identity(), &root);
        assert_eq!(joints[0], root);
        for j in 1..JOINT_COUNT {
            let mut expected = root;
            let mut k = j;
            while let Some(p) = s.parent(k) {
                expected += s.offset(k);
                k = p;
            }
            assert!((joints[j] - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn root_half_turn_reflects_about_vertical_axis() {
        let s = CanonicalSkeleton::canonical();
        let root = Vector3::new(0.5, -1.0, 0.9);
        let rest = forward_kinematics(s, &BodyPose::identity(), &root);
        let turned = BodyPose::identity().with_root(rotation_from_scaled_axis(&Vector3::new(0.0, 0.0, PI)));
        let joints = forward_kinematics(s, &turned, &root);
        for j in 0..JOINT_COUNT {
            let d = rest[j] - root;
            let expected = root + Vector3::new(-d.x, -d.y, d.z);
            assert!((joints[j] - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn matches_recursive_oracle() {
        let s = CanonicalSkeleton::canonical();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let pose = random_pose(&mut rng);
            let root = Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), 1.0);
            let joints = forward_kinematics(s, &pose, &root);
            for j in 0..JOINT_COUNT {
                assert!((joints[j] - oracle_position(s, &pose, &root, j)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn rigid_equivariance() {
        let s = CanonicalSkeleton::canonical();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let pose = random_pose(&mut rng);
            let root = Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), 1.0);
            let g = rotation_from_scaled_axis(&Vector3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ));
            let shift = Vector3::new(rng.random_range(-3.0..3.0), 0.4, -1.0);
            let base = forward_kinematics(s, &pose, &root);
            let moved_pose = pose.with_root(g * pose.root());
            let moved = forward_kinematics(s, &moved_pose, &(g * root + shift));
            for j in 0..JOINT_COUNT {
                assert!((moved[j] - (g * base[j] + shift)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            CanonicalSkeleton::parse("root -1 0 0 0\nchild 5 0 0 1\n"),
            Err(SkeletonError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            CanonicalSkeleton::parse("root -1 0 0 0\n"),
            Err(SkeletonError::JointCount { found: 1 })
        ));
        assert!(matches!(
            CanonicalSkeleton::parse("root -1 0 0\n"),
            Err(SkeletonError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn pose_validation() {
        assert!(BodyPose::new(vec![Matrix3::identity(); 23]).is_err());
        let mut rots = vec![Matrix3::identity(); JOINT_COUNT];
        rots[3] *= 1.01;
        assert!(BodyPose::new(rots).is_err());
        assert_eq!(BodyPose::identity().local_feature().len(), 207);
    }
}
