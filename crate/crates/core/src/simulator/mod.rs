//! Synthetic multi-person scenes seen by one LiDAR and any number of moving
//! cameras, with exact ground truth.
//!
//! Everything is driven by one 64-bit seed. Each random stage draws from
//! its own generator, seeded from `(seed, stage, a, b)` through a
//! splitmix-style mixer, so the output does not depend on evaluation order.

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    forward_kinematics, project_point, rotation_from_scaled_axis, rotation_to_scaled_axis, BodyPose,
    CanonicalSkeleton, Extrinsics, GeometryError, Intrinsics, ProjectionMatrix, JOINT_COUNT,
    PNP_MIN_CORRESPONDENCES,
};
use crate::matching::{MatchSet, Observation2D, Observation3D, PersonTrack2D, PersonTrack3D};

/// Seconds between frames.
pub const FRAME_PERIOD: f64 = 0.1;
/// Upper bound on person speed, m/s.
pub const MAX_SPEED: f64 = 3.0;
/// Per-axis limit on a joint's rotation away from rest, radians.
pub const JOINT_LIMIT: f64 = 120.0 * std::f64::consts::PI / 180.0;
/// Pelvis height above the floor for the canonical skeleton, meters.
pub const PELVIS_HEIGHT: f64 = 0.95;

const KNOT_FRAMES: usize = 10;
const MAX_KNOT_STEP: f64 = 1.2;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimError {
    #[error("invalid scene configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub person_count: usize,
    pub duration_frames: usize,
    pub camera_count: usize,
    /// Gaussian noise on 2D joints, pixels per axis.
    pub pixel_noise_sigma: f64,
    /// Gaussian noise on 3D joints, meters per axis.
    pub joint3d_noise_sigma: f64,
    /// Probability that a 2D joint is not reported.
    pub dropout_rate: f64,
    /// Horizontal field of view of every camera, degrees.
    pub fov_degrees: f64,
    /// Persons in each group share their local body poses.
    pub synchronized_pose_groups: Vec<Vec<usize>>,
    /// Noise on the body-pose estimates of both sensors, degrees per axis
    /// per joint.
    pub pose_noise_deg: f64,
    /// Persons stay within this distance (m) of the scene center.
    pub scene_radius: f64,
    pub image_width: f64,
    pub image_height: f64,
    pub moving_cameras: bool,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            person_count: 4,
            duration_frames: 32,
            camera_count: 1,
            pixel_noise_sigma: 2.0,
            joint3d_noise_sigma: 0.01,
            dropout_rate: 0.1,
            fov_degrees: 70.0,
            synchronized_pose_groups: Vec::new(),
            pose_noise_deg: 5.0,
            scene_radius: 4.0,
            image_width: 1280.0,
            image_height: 720.0,
            moving_cameras: true,
            seed: 0,
        }
    }
}

impl SceneConfig {
    /// Noise-free variant of `self` (no pixel, joint, pose noise or dropout).
    pub fn noiseless(mut self) -> Self {
        self.pixel_noise_sigma = 0.0;
        self.joint3d_noise_sigma = 0.0;
        self.dropout_rate = 0.0;
        self.pose_noise_deg = 0.0;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.person_count == 0 {
            return bad("person_count must be >= 1".into());
        }
        if self.duration_frames == 0 {
            return bad("duration_frames must be >= 1".into());
        }
        for (name, v) in [
            ("pixel_noise_sigma", self.pixel_noise_sigma),
            ("joint3d_noise_sigma", self.joint3d_noise_sigma),
            ("pose_noise_deg", self.pose_noise_deg),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate must lie in [0, 1), got {}", self.dropout_rate));
        }
        if !(self.scene_radius > 0.0 && self.scene_radius < 7.0) {
            return bad(format!("scene_radius must lie in (0, 7) m, got {}", self.scene_radius));
        }
        let mut seen = vec![false; self.person_count];
        for group in &self.synchronized_pose_groups {
            for &p in group {
                if p >= self.person_count {
                    return bad(format!("synchronized person {p} out of range"));
                }
                if std::mem::replace(&mut seen[p], true) {
                    return bad(format!("person {p} appears in more than one synchronized group"));
                }
            }
        }
        Intrinsics::from_horizontal_fov(self.image_width, self.image_height, self.fov_degrees)
            .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        Ok(())
    }

    pub fn intrinsics(&self) -> Result<Intrinsics, SimError> {
        Ok(Intrinsics::from_horizontal_fov(self.image_width, self.image_height, self.fov_degrees)?)
    }
}

/// What actually happened in a generated scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneTruth {
    /// `[person][frame][joint]`, world meters.
    pub joints: Vec<Vec<Vec<Vector3<f64>>>>,
    /// `[person][frame]`, root orientation in the world frame.
    pub body_poses: Vec<Vec<BodyPose>>,
    /// `[camera][frame]`.
    pub extrinsics: Vec<Vec<Extrinsics>>,
    pub intrinsics: Intrinsics,
    /// `[camera]`: (3D person, 2D track) for every person the camera sees in
    /// at least one frame.
    pub correspondence: Vec<Vec<(usize, usize)>>,
    /// `[camera][frame]`: the pairs visible in that frame.
    pub visible: Vec<Vec<Vec<(usize, usize)>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraStream {
    pub intrinsics: Intrinsics,
    pub tracks: Vec<PersonTrack2D>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub config: SceneConfig,
    pub truth: SceneTruth,
    pub tracks3d: Vec<PersonTrack3D>,
    pub cameras: Vec<CameraStream>,
}

#[derive(Clone, Copy)]
#[repr(u64)]
enum Stage {
    Trajectory = 1,
    Pose,
    Camera,
    Noise3d,
    Pose3dNoise,
    Noise2d,
    Pose2dNoise,
    Permutation,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream(seed: u64, stage: Stage, a: u64, b: u64) -> ChaCha8Rng {
    let s = splitmix(splitmix(splitmix(seed ^ splitmix(stage as u64)) ^ a) ^ b.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    ChaCha8Rng::seed_from_u64(s)
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma).expect("sigma is finite and positive").sample(rng)
}

fn gaussian_vec3(rng: &mut ChaCha8Rng, sigma: f64) -> Vector3<f64> {
    Vector3::new(gaussian(rng, sigma), gaussian(rng, sigma), gaussian(rng, sigma))
}

/// Uniform Catmull-Rom spline through `knots` spaced `KNOT_FRAMES` apart.
/// The first and last knots are phantom points used only for tangents.
fn catmull_rom(knots: &[Vector3<f64>], frame: usize) -> Vector3<f64> {
    let u = frame as f64 / KNOT_FRAMES as f64;
    let seg = u.floor() as usize;
    let s = u - seg as f64;
    let (p0, p1, p2, p3) = (knots[seg], knots[seg + 1], knots[seg + 2], knots[seg + 3]);
    let m1 = (p2 - p0) * 0.5;
    let m2 = (p3 - p1) * 0.5;
    let (s2, s3) = (s * s, s * s * s);
    p1 * (2.0 * s3 - 3.0 * s2 + 1.0) + m1 * (s3 - 2.0 * s2 + s) + p2 * (-2.0 * s3 + 3.0 * s2) + m2 * (s3 - s2)
}

/// Root positions and yaw angles of one person. Knots are a bounded random
/// walk inside the scene disc, at most `MAX_KNOT_STEP` apart.
fn trajectory(config: &SceneConfig, person: usize) -> (Vec<Vector3<f64>>, Vec<f64>) {
    let mut rng = stream(config.seed, Stage::Trajectory, person as u64, 0);
    let radius = config.scene_radius;
    let count = config.duration_frames.div_ceil(KNOT_FRAMES) + 3;
    let start_r = radius * rng.random::<f64>().sqrt();
    let start_a = rng.random_range(0.0..std::f64::consts::TAU);
    let mut p = Vector3::new(start_r * start_a.cos(), start_r * start_a.sin(), 0.0);
    let mut yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let mut knots = Vec::with_capacity(count);
    for _ in 0..count {
        // (x, y, yaw) packed into one spline
        knots.push(Vector3::new(p.x, p.y, yaw));
        let step_a = rng.random_range(0.0..std::f64::consts::TAU);
        let step_r = MAX_KNOT_STEP * rng.random::<f64>();
        let mut next = p + Vector3::new(step_r * step_a.cos(), step_r * step_a.sin(), 0.0);
        // radial projection onto the disc never lengthens the step
        if next.norm() > radius {
            next *= radius / next.norm();
        }
        p = next;
        yaw += rng.random_range(-0.6..0.6);
    }
    let mut roots = Vec::with_capacity(config.duration_frames);
    let mut yaws = Vec::with_capacity(config.duration_frames);
    for t in 0..config.duration_frames {
        let s = catmull_rom(&knots, t);
        let bob = 0.02 * (t as f64 * 0.9 + person as f64).sin();
        roots.push(Vector3::new(s.x, s.y, PELVIS_HEIGHT + bob));
        yaws.push(s.z);
    }
    (roots, yaws)
}

fn clamp_to_limits(r: &Matrix3<f64>) -> Matrix3<f64> {
    let v = rotation_to_scaled_axis(r);
    if v.iter().all(|c| c.abs() <= JOINT_LIMIT) {
        return *r;
    }
    rotation_from_scaled_axis(&v.map(|c| c.clamp(-JOINT_LIMIT, JOINT_LIMIT)))
}

/// Local (non-root) rotations per frame: a random start within ±45° per
/// axis, then a multiplicative random walk of 3° per axis per frame.
fn local_pose_walk(config: &SceneConfig, person: usize) -> Vec<Vec<Matrix3<f64>>> {
    let mut rng = stream(config.seed, Stage::Pose, person as u64, 0);
    let step = 3f64.to_radians();
    let start = 45f64.to_radians();
    let mut current: Vec<Matrix3<f64>> = (1..JOINT_COUNT)
        .map(|_| {
            rotation_from_scaled_axis(&Vector3::new(
                rng.random_range(-start..start),
                rng.random_range(-start..start),
                rng.random_range(-start..start),
            ))
        })
        .collect();
    let mut frames = Vec::with_capacity(config.duration_frames);
    for _ in 0..config.duration_frames {
        frames.push(current.clone());
        for r in current.iter_mut() {
            *r = clamp_to_limits(&(*r * rotation_from_scaled_axis(&gaussian_vec3(&mut rng, step))));
        }
    }
    frames
}

fn camera_track(config: &SceneConfig, camera: usize) -> Result<Vec<Extrinsics>, SimError> {
    let mut rng = stream(config.seed, Stage::Camera, camera as u64, 0);
    let tau = std::f64::consts::TAU;
    let base = tau * camera as f64 / config.camera_count.max(1) as f64 + rng.random_range(-0.4..0.4);
    let distance = rng.random_range(8.0..12.0);
    let (omega, wobble, phase) = if config.moving_cameras {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        (sign * rng.random_range(0.01..0.03), rng.random_range(0.3..0.8), rng.random_range(0.0..tau))
    } else {
        (0.0, 0.0, 0.0)
    };
    let target = Vector3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), 1.0);
    (0..config.duration_frames)
        .map(|t| {
            let t = t as f64;
            let angle = base + omega * t;
            let r = distance + wobble * (0.15 * t + phase).sin();
            let height = 1.5 + 0.3 * wobble * (0.11 * t + phase).cos();
            let eye = Vector3::new(r * angle.cos(), r * angle.sin(), height);
            Ok(Extrinsics::look_at(&eye, &target, &Vector3::z())?)
        })
        .collect()
}

fn noisy_pose(rng: &mut ChaCha8Rng, root: Matrix3<f64>, locals: &[Matrix3<f64>], sigma: f64) -> BodyPose {
    let jitter = |rng: &mut ChaCha8Rng, r: &Matrix3<f64>| {
        if sigma == 0.0 {
            *r
        } else {
            r * rotation_from_scaled_axis(&gaussian_vec3(rng, sigma))
        }
    };
    let mut rotations = Vec::with_capacity(JOINT_COUNT);
    rotations.push(jitter(rng, &root));
    for r in locals {
        rotations.push(jitter(rng, r));
    }
    BodyPose::new(rotations).expect("products of rotations are rotations")
}

/// Number of joints in front of the camera and inside the image.
fn joints_in_view(p: &ProjectionMatrix, k: &Intrinsics, joints: &[Vector3<f64>]) -> usize {
    joints
        .iter()
        .filter(|x| project_point(p, x).is_ok_and(|u| k.contains(&u)))
        .count()
}

pub fn generate(config: &SceneConfig) -> Result<Scene, SimError> {
    config.validate()?;
    let k = config.intrinsics()?;
    let skeleton = CanonicalSkeleton::canonical();
    let n = config.person_count;
    let frames = config.duration_frames;
    let pose_sigma = config.pose_noise_deg.to_radians();

    let mut pose_source: Vec<usize> = (0..n).collect();
    for group in &config.synchronized_pose_groups {
        if let Some(&leader) = group.first() {
            for &p in group {
                pose_source[p] = leader;
            }
        }
    }
    let walks: Vec<Option<Vec<Vec<Matrix3<f64>>>>> = (0..n)
        .map(|p| (pose_source[p] == p).then(|| local_pose_walk(config, p)))
        .collect();

    let mut truth_joints = Vec::with_capacity(n);
    let mut truth_poses = Vec::with_capacity(n);
    for p in 0..n {
        let (roots, yaws) = trajectory(config, p);
        let locals = walks[pose_source[p]].as_ref().expect("leaders have walks");
        let mut joints = Vec::with_capacity(frames);
        let mut poses = Vec::with_capacity(frames);
        for t in 0..frames {
            let mut rotations = Vec::with_capacity(JOINT_COUNT);
            rotations.push(rotation_from_scaled_axis(&(Vector3::z() * yaws[t])));
            rotations.extend_from_slice(&locals[t]);
            let pose = BodyPose::new(rotations).expect("generated rotations are proper");
            joints.push(forward_kinematics(skeleton, &pose, &roots[t]));
            poses.push(pose);
        }
        truth_joints.push(joints);
        truth_poses.push(poses);
    }

    let tracks3d = (0..n)
        .map(|p| {
            let frames_obs = (0..frames)
                .map(|t| {
                    let mut rng = stream(config.seed, Stage::Noise3d, p as u64, t as u64);
                    let joints = truth_joints[p][t]
                        .iter()
                        .map(|x| x + gaussian_vec3(&mut rng, config.joint3d_noise_sigma))
                        .collect();
                    let mut prng = stream(config.seed, Stage::Pose3dNoise, p as u64, t as u64);
                    let pose = &truth_poses[p][t];
                    let body = noisy_pose(&mut prng, *pose.root(), &pose.rotations()[1..], pose_sigma);
                    Some(Observation3D::new(joints, body).expect("finite joints"))
                })
                .collect();
            PersonTrack3D::new(format!("p{p}"), frames_obs)
        })
        .collect();

    let mut truth_extrinsics = Vec::with_capacity(config.camera_count);
    let mut correspondence = Vec::with_capacity(config.camera_count);
    let mut visible_pairs = Vec::with_capacity(config.camera_count);
    let mut cameras = Vec::with_capacity(config.camera_count);
    for c in 0..config.camera_count {
        let extr = camera_track(config, c)?;
        let projections: Vec<ProjectionMatrix> = extr.iter().map(|e| ProjectionMatrix::new(&k, e)).collect();
        // visibility[person][frame]
        let visibility: Vec<Vec<bool>> = (0..n)
            .map(|p| {
                (0..frames)
                    .map(|t| joints_in_view(&projections[t], &k, &truth_joints[p][t]) >= PNP_MIN_CORRESPONDENCES)
                    .collect()
            })
            .collect();
        let seen: Vec<usize> = (0..n).filter(|&p| visibility[p].iter().any(|&v| v)).collect();
        let mut order: Vec<usize> = (0..seen.len()).collect();
        order.shuffle(&mut stream(config.seed, Stage::Permutation, c as u64, 0));
        // seen[i] is reported as 2D track order[i]
        let mut tracks: Vec<Option<PersonTrack2D>> = vec![None; seen.len()];
        let mut corr = Vec::with_capacity(seen.len());
        for (i, &p) in seen.iter().enumerate() {
            let j = order[i];
            corr.push((p, j));
            let obs = (0..frames)
                .map(|t| {
                    if !visibility[p][t] {
                        return None;
                    }
                    let mut rng = stream(config.seed, Stage::Noise2d, ((c as u64) << 32) | p as u64, t as u64);
                    let mut joints = Vec::with_capacity(JOINT_COUNT);
                    let mut confidence = Vec::with_capacity(JOINT_COUNT);
                    for x in &truth_joints[p][t] {
                        let noise = Vector2::new(
                            gaussian(&mut rng, config.pixel_noise_sigma),
                            gaussian(&mut rng, config.pixel_noise_sigma),
                        );
                        let dropped = rng.random::<f64>() < config.dropout_rate;
                        let conf = rng.random_range(0.6..=1.0);
                        match project_point(&projections[t], x) {
                            Ok(u) if k.contains(&u) && !dropped => {
                                joints.push(u + noise);
                                confidence.push(conf);
                            }
                            _ => {
                                joints.push(Vector2::zeros());
                                confidence.push(0.0);
                            }
                        }
                    }
                    let mut prng = stream(config.seed, Stage::Pose2dNoise, ((c as u64) << 32) | p as u64, t as u64);
                    let pose = &truth_poses[p][t];
                    let cam_root = extr[t].rotation * pose.root();
                    let body = noisy_pose(&mut prng, cam_root, &pose.rotations()[1..], pose_sigma);
                    Some(Observation2D::new(joints, confidence, body).expect("valid observation"))
                })
                .collect();
            tracks[j] = Some(PersonTrack2D::new(format!("c{c}_{j}"), obs));
        }
        corr.sort_unstable();
        let vis_frames = (0..frames)
            .map(|t| corr.iter().copied().filter(|&(p, _)| visibility[p][t]).collect())
            .collect();
        cameras.push(CameraStream {
            intrinsics: k,
            tracks: tracks.into_iter().map(|t| t.expect("every slot filled")).collect(),
        });
        truth_extrinsics.push(extr);
        correspondence.push(corr);
        visible_pairs.push(vis_frames);
    }

    Ok(Scene {
        config: config.clone(),
        truth: SceneTruth {
            joints: truth_joints,
            body_poses: truth_poses,
            extrinsics: truth_extrinsics,
            intrinsics: k,
            correspondence,
            visible: visible_pairs,
        },
        tracks3d,
        cameras,
    })
}

/// Fraction of the camera's true correspondences present in `result`.
/// A camera that sees nobody scores 1 when nothing is matched, else 0.
pub fn accuracy(result: &MatchSet, truth: &SceneTruth, camera: usize) -> f64 {
    let expected = &truth.correspondence[camera];
    if expected.is_empty() {
        return if result.pairs.is_empty() { 1.0 } else { 0.0 };
    }
    let hits = expected.iter().filter(|&&(i, j)| result.contains(i, j)).count();
    hits as f64 / expected.len() as f64
}
