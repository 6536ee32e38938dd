//! Pairwise similarity and reprojection costs.

use nalgebra::{Matrix3, Vector2, Vector3};

use super::tracks::{Observation2D, Observation3D, PersonTrack2D, PersonTrack3D};
use super::MatchError;
use crate::geometry::{
    forward_kinematics_relative, project_point, BodyPose, CanonicalSkeleton, Extrinsics, Intrinsics,
    ProjectionMatrix,
};

/// Mean over co-present frames of the cosine similarity between the two
/// persons' local (root-free) body-pose vectors.
pub fn pose_similarity(track3d: &PersonTrack3D, track2d: &PersonTrack2D) -> Result<f64, MatchError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (o3, o2) in track3d.frames.iter().zip(&track2d.frames) {
        let (Some(o3), Some(o2)) = (o3, o2) else {
            continue;
        };
        sum += cosine(&o3.body_pose.local_feature(), &o2.body_pose.local_feature());
        count += 1;
    }
    if count == 0 {
        return Err(MatchError::NoCommonFrames { idx3d: 0, idx2d: 0 });
    }
    Ok(sum / count as f64)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    // rotation blocks have norm sqrt(3) each, so neither norm can vanish
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Pixel distance, or the image diagonal when the point is not in front of
/// the camera.
pub(crate) fn distance_or_penalty(p: &ProjectionMatrix, x: &Vector3<f64>, u: &Vector2<f64>, penalty: f64) -> f64 {
    match project_point(p, x) {
        Ok(q) => (q - u).norm(),
        Err(_) => penalty,
    }
}

/// Confidence-weighted mean pixel distance between the projected 3D joints
/// and the 2D joints. Joints with zero confidence carry no weight; if none
/// is left the result is the behind-camera penalty.
pub fn reprojection_cost(o3: &Observation3D, o2: &Observation2D, extr: &Extrinsics, k: &Intrinsics) -> f64 {
    reprojection_cost_with(o3, o2, &ProjectionMatrix::new(k, extr), k.diagonal())
}

pub(crate) fn reprojection_cost_with(
    o3: &Observation3D,
    o2: &Observation2D,
    p: &ProjectionMatrix,
    penalty: f64,
) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((x, u), &c) in o3.joints.iter().zip(&o2.joints).zip(&o2.confidence) {
        if c <= 0.0 || !x.iter().all(|v| v.is_finite()) {
            continue;
        }
        num += c * distance_or_penalty(p, x, u, penalty);
        den += c;
    }
    if den > 0.0 {
        num / den
    } else {
        penalty
    }
}

/// Root orientation plus root-relative joints of the identity-rooted pose.
/// A pose with root rotation `G` has joints `G * relative[j]`, so the
/// kinematic chain only needs evaluating once per observation.
#[derive(Debug, Clone)]
pub struct PoseCache {
    pub root: Matrix3<f64>,
    pub relative: Vec<Vector3<f64>>,
}

impl PoseCache {
    pub fn new(pose: &BodyPose) -> Self {
        let relative = forward_kinematics_relative(CanonicalSkeleton::canonical(), &pose.with_root(Matrix3::identity()));
        Self {
            root: *pose.root(),
            relative,
        }
    }
}

/// Mean pixel distance between the projected skeletons of the two poses,
/// both rooted at `root` (the LiDAR person's root joint).
///
/// `pose3d` has its root orientation in the world frame; `pose2d` has its
/// root orientation in the camera frame and is brought to the world frame
/// through `extr`.
pub fn body_pose_cost(
    pose3d: &BodyPose,
    pose2d: &BodyPose,
    root: &Vector3<f64>,
    extr: &Extrinsics,
    k: &Intrinsics,
) -> f64 {
    body_pose_cost_with(
        &PoseCache::new(pose3d),
        &PoseCache::new(pose2d),
        root,
        extr,
        &ProjectionMatrix::new(k, extr),
        k.diagonal(),
    )
}

pub(crate) fn body_pose_cost_with(
    c3: &PoseCache,
    c2: &PoseCache,
    root: &Vector3<f64>,
    extr: &Extrinsics,
    p: &ProjectionMatrix,
    penalty: f64,
) -> f64 {
    let g3 = c3.root;
    let g2 = extr.rotation.transpose() * c2.root;
    let mut total = 0.0;
    for (a, b) in c3.relative.iter().zip(&c2.relative) {
        let xa = root + g3 * a;
        let xb = root + g2 * b;
        total += match (project_point(p, &xa), project_point(p, &xb)) {
            (Ok(ua), Ok(ub)) => (ua - ub).norm(),
            _ => penalty,
        };
    }
    total / c3.relative.len() as f64
}

/// Reprojection cost plus `lambda0` times the body-pose cost.
pub fn weighted_cost(
    o3: &Observation3D,
    o2: &Observation2D,
    extr: &Extrinsics,
    k: &Intrinsics,
    lambda0: f64,
) -> f64 {
    let reproj = reprojection_cost(o3, o2, extr, k);
    if lambda0 == 0.0 {
        return reproj;
    }
    reproj + lambda0 * body_pose_cost(&o3.body_pose, &o2.body_pose, o3.root(), extr, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{
        forward_kinematics, project, rotation_from_scaled_axis, JOINT_COUNT,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k() -> Intrinsics {
        Intrinsics::new(800.0, 780.0, 640.0, 360.0, 1280.0, 720.0).unwrap()
    }

    fn small_rotation(rng: &mut ChaCha8Rng, scale: f64) -> Matrix3<f64> {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        rotation_from_scaled_axis(&(v * scale))
    }

    fn random_pose(rng: &mut ChaCha8Rng) -> BodyPose {
        BodyPose::new((0..JOINT_COUNT).map(|_| small_rotation(rng, 0.6)).collect()).unwrap()
    }

    /// Camera 6 m in front of the origin looking back at it.
    fn camera() -> Extrinsics {
        Extrinsics::look_at(&Vector3::new(0.5, -6.0, 1.2), &Vector3::new(0.0, 0.0, 1.0), &Vector3::z()).unwrap()
    }

    fn person(rng: &mut ChaCha8Rng) -> Observation3D {
        let pose = random_pose(rng);
        let root = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 1.0);
        Observation3D::new(forward_kinematics(CanonicalSkeleton::canonical(), &pose, &root), pose).unwrap()
    }

    fn observe(o3: &Observation3D, extr: &Extrinsics) -> Observation2D {
        let joints = project(&ProjectionMatrix::new(&k(), extr), &o3.joints).unwrap();
        let cam_pose = o3.body_pose.with_root(extr.rotation * o3.body_pose.root());
        Observation2D::new(joints, vec![1.0; JOINT_COUNT], cam_pose).unwrap()
    }

    fn tracks(poses3: Vec<BodyPose>, poses2: Vec<BodyPose>) -> (PersonTrack3D, PersonTrack2D) {
        let root = Vector3::new(0.0, 0.0, 1.0);
        let t3 = PersonTrack3D::new(
            "a",
            poses3
                .into_iter()
                .map(|p| Some(Observation3D::new(forward_kinematics(CanonicalSkeleton::canonical(), &p, &root), p).unwrap()))
                .collect(),
        );
        let t2 = PersonTrack2D::new(
            "b",
            poses2
                .into_iter()
                .map(|p| Some(Observation2D::new(vec![Vector2::zeros(); JOINT_COUNT], vec![1.0; JOINT_COUNT], p).unwrap()))
                .collect(),
        );
        (t3, t2)
    }

    #[test]
    fn identical_pose_sequences_are_fully_similar() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let poses: Vec<_> = (0..5).map(|_| random_pose(&mut rng)).collect();
        let (t3, t2) = tracks(poses.clone(), poses);
        assert!((pose_similarity(&t3, &t2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negated_feature_is_antipodal() {
        // a rotation's negation is not a rotation; check the cosine kernel
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_pose(&mut rng).local_feature();
        let b: Vec<f64> = a.iter().map(|v| -v).collect();
        assert!((cosine(&a, &b) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn similarity_matches_per_frame_oracle_and_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p3: Vec<_> = (0..7).map(|_| random_pose(&mut rng)).collect();
        let p2: Vec<_> = (0..7).map(|_| random_pose(&mut rng)).collect();
        let (mut t3, t2) = tracks(p3.clone(), p2.clone());
        t3.frames[2] = None;
        let mut oracle = Vec::new();
        for t in 0..7 {
            if t == 2 {
                continue;
            }
            let a = p3[t].local_feature();
            let b = p2[t].local_feature();
            let mut dot = 0.0;
            let mut na = 0.0;
            let mut nb = 0.0;
            for i in 0..a.len() {
                dot += a[i] * b[i];
                na += a[i] * a[i];
                nb += b[i] * b[i];
            }
            oracle.push(dot / (na.sqrt() * nb.sqrt()));
        }
        let expected = oracle.iter().sum::<f64>() / oracle.len() as f64;
        assert!((pose_similarity(&t3, &t2).unwrap() - expected).abs() < 1e-12);

        let (s3, s2) = tracks(p2, p3);
        let mut s3 = s3;
        s3.frames[2] = None;
        assert!((pose_similarity(&s3, &s2).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn similarity_ignores_rigid_motion_of_the_joints() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p3: Vec<_> = (0..4).map(|_| random_pose(&mut rng)).collect();
        let p2: Vec<_> = (0..4).map(|_| random_pose(&mut rng)).collect();
        let (t3, t2) = tracks(p3, p2);
        let r = small_rotation(&mut rng, 2.0);
        let shift = Vector3::new(3.0, -1.0, 0.5);
        let mut moved = t3.clone();
        for o in moved.frames.iter_mut().flatten() {
            for j in o.joints.iter_mut() {
                *j = r * *j + shift;
            }
        }
        assert_eq!(pose_similarity(&t3, &t2).unwrap(), pose_similarity(&moved, &t2).unwrap());
    }

    #[test]
    fn no_common_frames_is_an_error() {
        let (mut t3, mut t2) = tracks(vec![BodyPose::identity(); 2], vec![BodyPose::identity(); 2]);
        t3.frames[0] = None;
        t2.frames[1] = None;
        assert!(matches!(pose_similarity(&t3, &t2), Err(MatchError::NoCommonFrames { .. })));
    }

    #[test]
    fn exact_projection_costs_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let o3 = person(&mut rng);
        let o2 = observe(&o3, &camera());
        assert!(reprojection_cost(&o3, &o2, &camera(), &k()) < 1e-9);
    }

    #[test]
    fn constant_offset_costs_its_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let o3 = person(&mut rng);
        let mut o2 = observe(&o3, &camera());
        for u in o2.joints.iter_mut() {
            *u += Vector2::new(3.0, 4.0);
        }
        assert!((reprojection_cost(&o3, &o2, &camera(), &k()) - 5.0).abs() < 1e-9);
    }

    #[test]
    fn reprojection_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let o3 = person(&mut rng);
            let mut o2 = observe(&o3, &camera());
            for (u, c) in o2.joints.iter_mut().zip(o2.confidence.iter_mut()) {
                *u += Vector2::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
                *c = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.1..1.0) };
            }
            let m = k().matrix() * {
                let e = camera();
                let mut rt = nalgebra::Matrix3x4::zeros();
                rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&e.rotation);
                rt.set_column(3, &e.translation);
                rt
            };
            let mut num = 0.0;
            let mut den = 0.0;
            for j in 0..JOINT_COUNT {
                let x = o3.joints[j];
                let h = m * nalgebra::Vector4::new(x.x, x.y, x.z, 1.0);
                let d = ((h.x / h.z - o2.joints[j].x).powi(2) + (h.y / h.z - o2.joints[j].y).powi(2)).sqrt();
                num += o2.confidence[j] * d;
                den += o2.confidence[j];
            }
            assert!((reprojection_cost(&o3, &o2, &camera(), &k()) - num / den).abs() < 1e-10);
        }
    }

    #[test]
    fn behind_camera_joints_use_the_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let o3 = person(&mut rng);
        let o2 = observe(&o3, &camera());
        // flipped camera: everything is behind it
        let flipped = Extrinsics::look_at(&Vector3::new(0.5, -6.0, 1.2), &Vector3::new(0.5, -12.0, 1.2), &Vector3::z()).unwrap();
        assert!((reprojection_cost(&o3, &o2, &flipped, &k()) - k().diagonal()).abs() < 1e-9);
    }

    #[test]
    fn identical_poses_have_zero_body_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let o3 = person(&mut rng);
        let o2 = observe(&o3, &camera());
        let c = body_pose_cost(&o3.body_pose, &o2.body_pose, o3.root(), &camera(), &k());
        assert!(c < 1e-9, "{c}");
    }

    #[test]
    fn body_cost_grows_with_elbow_rotation() {
        let skel = CanonicalSkeleton::canonical();
        let elbow = skel.index_of("left_elbow").unwrap();
        let pose3 = BodyPose::identity();
        let root = Vector3::new(0.0, 0.0, 1.0);
        let extr = camera();
        let mut last = 0.0;
        for step in 1..=90 {
            let angle = (step as f64).to_radians();
            let mut rots = pose3.rotations().to_vec();
            rots[elbow] = rotation_from_scaled_axis(&(Vector3::z() * angle));
            rots[0] = extr.rotation;
            let pose2 = BodyPose::new(rots).unwrap();
            let c = body_pose_cost(&pose3, &pose2, &root, &extr, &k());
            assert!(c > last, "angle {step}: {c} <= {last}");
            last = c;
        }
    }

    #[test]
    fn body_cost_matches_composed_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let skel = CanonicalSkeleton::canonical();
        let extr = camera();
        let p = ProjectionMatrix::new(&k(), &extr);
        for _ in 0..20 {
            let pose3 = random_pose(&mut rng);
            let pose2 = random_pose(&mut rng);
            let root = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 1.0);
            let world2 = pose2.with_root(extr.rotation.transpose() * pose2.root());
            let a = project(&p, &forward_kinematics(skel, &pose3, &root)).unwrap();
            let b = project(&p, &forward_kinematics(skel, &world2, &root)).unwrap();
            let expected = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).sum::<f64>() / JOINT_COUNT as f64;
            let got = body_pose_cost(&pose3, &pose2, &root, &extr, &k());
            assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
        }
    }

    #[test]
    fn weighted_cost_composes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let o3 = person(&mut rng);
        let mut o2 = observe(&o3, &camera());
        o2.body_pose = random_pose(&mut rng);
        for u in o2.joints.iter_mut() {
            *u += Vector2::new(1.0, -2.0);
        }
        let a = reprojection_cost(&o3, &o2, &camera(), &k());
        let b = body_pose_cost(&o3.body_pose, &o2.body_pose, o3.root(), &camera(), &k());
        assert!(b > 0.0);
        assert_eq!(weighted_cost(&o3, &o2, &camera(), &k(), 0.0), a);
        assert!((weighted_cost(&o3, &o2, &camera(), &k(), 0.1) - (a + 0.1 * b)).abs() < 1e-12);
        assert!((weighted_cost(&o3, &o2, &camera(), &k(), 1.0) - (a + b)).abs() < 1e-12);
    }
}
