use crossalign_core::geometry::{is_rotation, project_point, ProjectionMatrix};
use crossalign_core::simulator::{generate, SceneConfig, SimError, FRAME_PERIOD, MAX_SPEED};

#[test]
fn noiseless_detections_are_exact_projections() {
    let scene = generate(&SceneConfig { person_count: 5, camera_count: 2, seed: 3, ..Default::default() }.noiseless()).unwrap();
    for (c, cam) in scene.cameras.iter().enumerate() {
        for &(p, j) in &scene.truth.correspondence[c] {
            for t in 0..scene.config.duration_frames {
                let Some(o2) = cam.tracks[j].at(t) else { continue };
                let proj = ProjectionMatrix::new(&cam.intrinsics, &scene.truth.extrinsics[c][t]);
                for (joint, (u, &conf)) in o2.joints.iter().zip(&o2.confidence).enumerate() {
                    if conf > 0.0 {
                        let want = project_point(&proj, &scene.truth.joints[p][t][joint]).unwrap();
                        assert!((u - want).norm() < 1e-9);
                        assert!(cam.intrinsics.contains(u));
                    }
                }
                let o3 = scene.tracks3d[p].at(t).unwrap();
                for (a, b) in o3.joints.iter().zip(&scene.truth.joints[p][t]) {
                    assert_eq!(a, b);
                }
            }
        }
    }
}

#[test]
fn dropout_rate_is_respected() {
    // in-view joints only: out-of-frame joints are reported missing anyway
    let config = SceneConfig { person_count: 6, dropout_rate: 0.3, fov_degrees: 100.0, seed: 5, ..Default::default() };
    let scene = generate(&config).unwrap();
    let (mut dropped, mut total) = (0usize, 0usize);
    for &(p, j) in &scene.truth.correspondence[0] {
        for t in 0..config.duration_frames {
            let Some(o2) = scene.cameras[0].tracks[j].at(t) else { continue };
            let proj = ProjectionMatrix::new(&scene.truth.intrinsics, &scene.truth.extrinsics[0][t]);
            for (x, &conf) in scene.truth.joints[p][t].iter().zip(&o2.confidence) {
                let in_view = project_point(&proj, x).is_ok_and(|u| scene.truth.intrinsics.contains(&u));
                if in_view {
                    total += 1;
                    dropped += (conf == 0.0) as usize;
                }
            }
        }
    }
    let rate = dropped as f64 / total as f64;
    assert!(total > 1000);
    assert!((rate - 0.3).abs() <= 0.03, "rate {rate}");
}

#[test]
fn same_seed_same_scene() {
    let config = SceneConfig { person_count: 4, camera_count: 2, seed: 77, ..Default::default() };
    assert_eq!(generate(&config).unwrap(), generate(&config).unwrap());
    let other = generate(&SceneConfig { seed: 78, ..config }).unwrap();
    assert_ne!(other.truth.joints, generate(&SceneConfig { seed: 77, person_count: 4, camera_count: 2, ..Default::default() }).unwrap().truth.joints);
}

#[test]
fn persons_walk_at_plausible_speeds_with_valid_poses() {
    let scene = generate(&SceneConfig { person_count: 8, duration_frames: 64, seed: 9, ..Default::default() }).unwrap();
    for (joints, poses) in scene.truth.joints.iter().zip(&scene.truth.body_poses) {
        for t in 1..joints.len() {
            let speed = (joints[t][0] - joints[t - 1][0]).norm() / FRAME_PERIOD;
            assert!(speed <= MAX_SPEED + 1e-9, "speed {speed}");
        }
        for pose in poses {
            assert!(pose.is_valid());
            assert!(pose.rotations().iter().all(is_rotation));
        }
    }
}

#[test]
fn visible_pairs_are_in_front_of_the_camera() {
    let scene = generate(&SceneConfig { person_count: 6, seed: 12, ..Default::default() }.noiseless()).unwrap();
    for (t, pairs) in scene.truth.visible[0].iter().enumerate() {
        let e = &scene.truth.extrinsics[0][t];
        for &(p, j) in pairs {
            assert!(scene.cameras[0].tracks[j].at(t).is_some());
            assert!(e.transform_point(&scene.truth.joints[p][t][0]).z > 0.0);
        }
    }
}

#[test]
fn invalid_configs_are_rejected() {
    for bad in [
        SceneConfig { dropout_rate: 1.5, ..Default::default() },
        SceneConfig { person_count: 0, ..Default::default() },
        SceneConfig { pixel_noise_sigma: -1.0, ..Default::default() },
        SceneConfig { synchronized_pose_groups: vec![vec![0, 9]], ..Default::default() },
    ] {
        assert!(matches!(generate(&bad), Err(SimError::InvalidConfig(_))));
    }
}
