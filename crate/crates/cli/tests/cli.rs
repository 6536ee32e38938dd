use std::io::BufReader;
use std::path::Path;
use std::process::Command;

use crossalign_cli::commands::{cmd_match, cmd_refine, cmd_simulate, MatchArgs, RefineArgs, SimulateArgs};
use crossalign_cli::output::{read_truth, MatchOutput};
use crossalign_cli::stream::{parse_stream_file, records_from_tracks3d, write_stream_file, SensorKind, StreamHeader};
use crossalign_core::geometry::CanonicalSkeleton;
use crossalign_core::matching::AblationMode;
use crossalign_core::simulator::{generate, SceneConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crossalign"))
}

fn simulate(dir: &Path, toml: &str) {
    std::fs::write(dir.join("scene.toml"), toml).unwrap();
    cmd_simulate(&SimulateArgs { config: Some(dir.join("scene.toml")), out: dir.join("sim"), seed: None }).unwrap();
}

#[test]
fn lidar_stream_round_trips() {
    let scene = generate(&SceneConfig { person_count: 3, seed: 2, ..Default::default() }).unwrap();
    let frames = scene.config.duration_frames;
    let header = StreamHeader {
        sensor: SensorKind::Lidar3d,
        frame_rate: 10.0,
        skeleton_hash: CanonicalSkeleton::canonical().content_hash().to_string(),
        intrinsics: None,
        frames: Some(frames),
        persons: Some(scene.tracks3d.iter().map(|t| t.person_id.clone()).collect()),
        config: None,
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lidar.jsonl");
    write_stream_file(&path, &header, &records_from_tracks3d(&scene.tracks3d, frames, 10.0)).unwrap();
    let back = parse_stream_file(&path).unwrap();
    assert!(back.warnings.is_empty());
    let tracks = back.tracks3d().unwrap();
    assert_eq!(tracks.len(), scene.tracks3d.len());
    for (a, b) in tracks.iter().zip(&scene.tracks3d) {
        assert_eq!(a.person_id, b.person_id);
        for t in 0..frames {
            let (oa, ob) = (a.at(t).unwrap(), b.at(t).unwrap());
            assert_eq!(oa.joints, ob.joints);
            for (ra, rb) in oa.body_pose.rotations().iter().zip(ob.body_pose.rotations()) {
                assert!((ra - rb).abs().max() < 1e-12);
            }
        }
    }
}

#[test]
fn simulate_then_match_recovers_truth_for_every_camera() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "person_count = 5\ncamera_count = 2\nseed = 7\n");
    let sim = dir.path().join("sim");
    let truth = read_truth(BufReader::new(std::fs::File::open(sim.join("truth.jsonl")).unwrap())).unwrap();
    let written = cmd_match(&MatchArgs {
        lidar: sim.join("lidar.jsonl"),
        cameras: vec![sim.join("camera_0.jsonl"), sim.join("camera_1.jsonl")],
        out: dir.path().join("m"),
        config: None,
        mode: AblationMode::Full,
        seed: None,
    })
    .unwrap();
    assert_eq!(written.len(), 2);
    for (c, path) in written.iter().enumerate() {
        assert!(path.ends_with(format!("camera_{c}.match.json")));
        let out = MatchOutput::read(path).unwrap();
        let mut got: Vec<(String, String)> = out.pairs.iter().map(|p| (p.id3d.clone(), p.id2d.clone())).collect();
        got.sort();
        let mut want = truth.correspondence[c].clone();
        want.sort();
        assert_eq!(got, want, "camera {c}");
        assert!(!out.extrinsics.is_empty());
    }
}

#[test]
fn refine_writes_a_lidar_stream_close_to_truth() {
    // static cameras: their estimated poses are then much better than the
    // LiDAR joints, which is when refinement can help
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "person_count = 3\ncamera_count = 2\nseed = 11\njoint3d_noise_sigma = 0.05\nmoving_cameras = false\n");
    let sim = dir.path().join("sim");
    let matches = cmd_match(&MatchArgs {
        lidar: sim.join("lidar.jsonl"),
        cameras: vec![sim.join("camera_0.jsonl"), sim.join("camera_1.jsonl")],
        out: dir.path().join("m"),
        config: None,
        mode: AblationMode::Full,
        seed: None,
    })
    .unwrap();
    let out = cmd_refine(&RefineArgs { lidar: sim.join("lidar.jsonl"), matches, out: dir.path().join("refined.jsonl"), config: None }).unwrap();
    let refined = parse_stream_file(&out).unwrap().tracks3d().unwrap();
    let raw = parse_stream_file(sim.join("lidar.jsonl")).unwrap().tracks3d().unwrap();
    let truth = read_truth(BufReader::new(std::fs::File::open(sim.join("truth.jsonl")).unwrap())).unwrap();
    let err = |tracks: &[crossalign_core::matching::PersonTrack3D]| {
        let mut total = 0.0;
        for (p, track) in tracks.iter().enumerate() {
            for (t, frame) in truth.joints.iter().enumerate() {
                let o = track.at(t).unwrap();
                total += o.joints.iter().zip(&frame[p]).map(|(a, b)| (a - b).norm()).sum::<f64>();
            }
        }
        total
    };
    assert_eq!(refined.len(), raw.len());
    assert!(err(&refined) < err(&raw), "refined {} raw {}", err(&refined), err(&raw));
}

#[test]
fn invalid_scene_config_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "dropout_rate = 1.5\n").unwrap();
    let status = bin().current_dir(dir.path()).args(["simulate", "--config", "bad.toml", "--out", "x"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
    std::fs::write(dir.path().join("typo.toml"), "person_cout = 3\n").unwrap();
    let status = bin().current_dir(dir.path()).args(["simulate", "--config", "typo.toml", "--out", "x"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn bad_arguments_are_usage_errors() {
    assert_eq!(bin().arg("frobnicate").status().unwrap().code(), Some(1));
    assert_eq!(bin().args(["match", "--mode", "nope", "a", "b", "--out", "o"]).status().unwrap().code(), Some(1));
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
    let v = bin().arg("version").output().unwrap();
    assert!(v.status.success() && String::from_utf8_lossy(&v.stdout).starts_with("crossalign "));
}

#[test]
fn refine_rejects_a_modified_camera_stream() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "person_count = 2\nseed = 3\n");
    let sim = dir.path().join("sim");
    let run = |args: &[&str]| bin().current_dir(dir.path()).args(args).output().unwrap();
    assert!(run(&["match", "sim/lidar.jsonl", "sim/camera_0.jsonl", "--out", "m"]).status.success());
    let mut text = std::fs::read_to_string(sim.join("camera_0.jsonl")).unwrap();
    text.push('\n');
    std::fs::write(sim.join("camera_0.jsonl"), text).unwrap();
    let out = run(&["refine", "sim/lidar.jsonl", "m/camera_0.match.json", "--out", "r.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hash mismatch"));
}

#[test]
fn camera_without_persons_matches_nothing() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "person_count = 2\nseed = 5\n");
    let sim = dir.path().join("sim");
    // keep only the header line of the camera stream
    let text = std::fs::read_to_string(sim.join("camera_0.jsonl")).unwrap();
    let header = text.lines().next().unwrap().replace("\"persons\":[\"c0_0\",\"c0_1\"],", "");
    std::fs::write(sim.join("empty.jsonl"), format!("{header}\n")).unwrap();
    let written = cmd_match(&MatchArgs {
        lidar: sim.join("lidar.jsonl"),
        cameras: vec![sim.join("empty.jsonl")],
        out: dir.path().join("m"),
        config: None,
        mode: AblationMode::Full,
        seed: None,
    })
    .unwrap();
    let out = MatchOutput::read(&written[0]).unwrap();
    assert!(out.pairs.is_empty());
    assert_eq!(out.unmatched3d.len(), 2);
    assert!(out.warnings.iter().any(|w| w.contains("no persons")));
}
