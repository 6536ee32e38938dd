//! The `match`, `refine`, `simulate` and `bench` commands.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use crossalign_core::geometry::CanonicalSkeleton;
use crossalign_core::harness::{export_report, run_bench, BenchSpec, HarnessError};
use crossalign_core::matching::{ablation_match, AblationMode, MatchError, PcmConfig, PersonTrack3D};
use crossalign_core::refiner::{refine, CameraObservation, RefineProblem, RefineWeights};
use crossalign_core::simulator::{generate, SceneConfig, SimError, FRAME_PERIOD};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::output::{file_sha256, write_truth, MatchOutput, MatchSources, OutputError};
use crate::stream::{
    parse_stream_file, records_from_tracks2d, records_from_tracks3d, write_stream_file, FrameRecord, PersonRecord,
    SensorKind, StreamFile, StreamHeader,
};

/// Failure classes with stable exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0:#}")]
    Data(anyhow::Error),
    #[error("{0:#}")]
    Numerical(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

fn data(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Data(e.into())
}

impl From<MatchError> for CliError {
    fn from(e: MatchError) -> Self {
        match e {
            MatchError::Geometry(_) | MatchError::NoViableProposal { .. } => CliError::Numerical(e.into()),
            other => CliError::Data(other.into()),
        }
    }
}

/// Settings shared by `match` and `refine`, read from a TOML file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub pcm: PcmConfig,
    pub refine: RefineWeights,
}

fn read_toml<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))
        .map_err(data)?;
    toml::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))
        .map_err(data)
}

pub fn load_app_config(path: Option<&Path>) -> Result<AppConfig, CliError> {
    let config: AppConfig = read_toml(path)?;
    config.pcm.validate().map_err(data)?;
    config.refine.validate().map_err(data)?;
    Ok(config)
}

fn skeleton_hash() -> String {
    CanonicalSkeleton::canonical().content_hash().to_string()
}

fn check_skeleton(what: &str, found: &str) -> Result<(), CliError> {
    let expected = skeleton_hash();
    if found != expected {
        return Err(data(OutputError::HashMismatch {
            what: format!("{what} skeleton"),
            expected,
            found: found.to_string(),
        }));
    }
    Ok(())
}

fn load_stream(path: &Path, sensor: SensorKind) -> Result<StreamFile, CliError> {
    let s = parse_stream_file(path).map_err(data)?;
    if s.header.sensor != sensor {
        return Err(data(anyhow!("{}: expected a {sensor} stream, found {}", path.display(), s.header.sensor)));
    }
    check_skeleton(&path.display().to_string(), &s.header.skeleton_hash)?;
    Ok(s)
}

pub struct MatchArgs {
    pub lidar: PathBuf,
    pub cameras: Vec<PathBuf>,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
    pub mode: AblationMode,
    pub seed: Option<u64>,
}

/// Output file of camera stream `camera` (index `i` among the inputs).
fn match_file_name(camera: &Path) -> String {
    let stem = camera.file_stem().map_or("camera".into(), |s| s.to_string_lossy().into_owned());
    format!("{stem}.match.json")
}

/// Matches every camera stream against the LiDAR stream, one output file
/// per camera. Fails only when every camera failed.
pub fn cmd_match(args: &MatchArgs) -> Result<Vec<PathBuf>, CliError> {
    if args.cameras.is_empty() {
        return Err(CliError::Usage("match needs at least one camera stream".into()));
    }
    let names: Vec<String> = args.cameras.iter().map(|c| match_file_name(c)).collect();
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(CliError::Usage(format!("two camera streams would both write {n}")));
        }
    }
    let mut app = load_app_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        app.pcm.seed = seed;
    }
    let lidar = load_stream(&args.lidar, SensorKind::Lidar3d)?;
    let lidar_sha = file_sha256(&args.lidar).map_err(data)?;
    let tracks3d = lidar.tracks3d().map_err(data)?;
    let frames = lidar.frame_count();
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .map_err(data)?;

    let results: Vec<Result<PathBuf, CliError>> = args
        .cameras
        .par_iter()
        .zip(&names)
        .map(|(camera, name)| {
            match_camera(&lidar, &args.lidar, &lidar_sha, &tracks3d, frames, camera, &app.pcm, args.mode)
                .and_then(|out| {
                    let path = args.out.join(name);
                    out.write(&path).map_err(data)?;
                    Ok(path)
                })
                .map_err(|e| {
                    log::error!("{}: {e}", camera.display());
                    e
                })
        })
        .collect();
    let mut written = Vec::new();
    let mut first_error = None;
    for r in results {
        match r {
            Ok(p) => written.push(p),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    match (written.is_empty(), first_error) {
        (true, Some(e)) => Err(e),
        _ => Ok(written),
    }
}

#[allow(clippy::too_many_arguments)]
fn match_camera(
    lidar: &StreamFile,
    lidar_path: &Path,
    lidar_sha: &str,
    tracks3d: &[PersonTrack3D],
    frames: usize,
    camera: &Path,
    config: &PcmConfig,
    mode: AblationMode,
) -> Result<MatchOutput, CliError> {
    let cam = load_stream(camera, SensorKind::Camera2d)?;
    let k = cam.header.intrinsics.expect("camera header validated");
    let (tracks2d, mut warnings) = cam.tracks2d_on(lidar.header.frame_rate, frames).map_err(data)?;
    warnings.extend(cam.warnings.iter().cloned());
    for w in &warnings {
        log::warn!("{}: {w}", camera.display());
    }
    if tracks2d.is_empty() {
        let msg = "camera stream contains no persons; nothing to match".to_string();
        log::warn!("{}: {msg}", camera.display());
        warnings.push(msg);
    }
    let out = ablation_match(mode, tracks3d, &tracks2d, &k, config)?;
    Ok(MatchOutput::new(
        MatchSources {
            lidar_stream: lidar_path.display().to_string(),
            lidar_sha256: lidar_sha.to_string(),
            camera_stream: camera.display().to_string(),
            camera_sha256: file_sha256(camera).map_err(data)?,
            skeleton_hash: skeleton_hash(),
            tracks3d,
            tracks2d: &tracks2d,
        },
        mode,
        config,
        &out,
        warnings,
    ))
}

/// The camera stream a match file was made from: the recorded path, or
/// the same file name next to the match file.
fn locate_camera(recorded: &str, match_file: &Path) -> PathBuf {
    let p = PathBuf::from(recorded);
    if p.exists() {
        return p;
    }
    match (match_file.parent(), p.file_name()) {
        (Some(dir), Some(name)) => dir.join(name),
        _ => p,
    }
}

pub struct RefineArgs {
    pub lidar: PathBuf,
    pub matches: Vec<PathBuf>,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
}

/// Refines every LiDAR person in every frame against the cameras matched to
/// it and writes the result as a LiDAR stream.
pub fn cmd_refine(args: &RefineArgs) -> Result<PathBuf, CliError> {
    let app = load_app_config(args.config.as_deref())?;
    let lidar = load_stream(&args.lidar, SensorKind::Lidar3d)?;
    let lidar_sha = file_sha256(&args.lidar).map_err(data)?;
    let tracks3d = lidar.tracks3d().map_err(data)?;
    let frames = lidar.frame_count();

    struct View {
        intrinsics: crossalign_core::geometry::Intrinsics,
        poses: Vec<Option<crossalign_core::geometry::Extrinsics>>,
        tracks2d: Vec<crossalign_core::matching::PersonTrack2D>,
        /// `[3D person]` -> 2D track
        partner: Vec<Option<usize>>,
    }
    let mut views = Vec::new();
    for m in &args.matches {
        let out = MatchOutput::read(m).map_err(data)?;
        check_skeleton(&m.display().to_string(), &out.skeleton_hash)?;
        if out.lidar_sha256 != lidar_sha {
            return Err(data(OutputError::HashMismatch {
                what: format!("{}: LiDAR stream", m.display()),
                expected: out.lidar_sha256,
                found: lidar_sha,
            }));
        }
        let cam_path = locate_camera(&out.camera_stream, m);
        let cam_sha = file_sha256(&cam_path).map_err(data)?;
        if cam_sha != out.camera_sha256 {
            return Err(data(OutputError::HashMismatch {
                what: format!("{}: camera stream {}", m.display(), cam_path.display()),
                expected: out.camera_sha256,
                found: cam_sha,
            }));
        }
        let cam = load_stream(&cam_path, SensorKind::Camera2d)?;
        let (tracks2d, _) = cam.tracks2d_on(lidar.header.frame_rate, frames).map_err(data)?;
        let mut partner = vec![None; tracks3d.len()];
        for p in &out.pairs {
            if p.idx3d >= tracks3d.len() || p.idx2d >= tracks2d.len() {
                return Err(data(anyhow!("{}: pair ({}, {}) out of range", m.display(), p.idx3d, p.idx2d)));
            }
            partner[p.idx3d] = Some(p.idx2d);
        }
        views.push(View {
            intrinsics: cam.header.intrinsics.expect("camera header validated"),
            poses: out.poses(frames),
            tracks2d,
            partner,
        });
    }

    let refined: Vec<Result<Vec<Option<Vec<nalgebra::Vector3<f64>>>>, CliError>> = tracks3d
        .par_iter()
        .enumerate()
        .map(|(i, track)| {
            (0..frames)
                .map(|t| {
                    let Some(o3) = track.at(t) else {
                        return Ok(None);
                    };
                    let observations: Vec<CameraObservation> = views
                        .iter()
                        .filter_map(|v| {
                            let o2 = v.tracks2d[v.partner[i]?].at(t)?;
                            Some(CameraObservation {
                                intrinsics: v.intrinsics,
                                extrinsics: v.poses[t]?,
                                joints2d: o2.joints.clone(),
                                confidence: o2.confidence.clone(),
                            })
                        })
                        .collect();
                    let problem = RefineProblem::new(o3.joints.clone(), observations, app.refine);
                    let r = refine(&problem).map_err(|e| CliError::Numerical(e.into()))?;
                    if !r.converged {
                        log::warn!("person {} frame {t}: refinement hit the iteration cap", track.person_id);
                    }
                    Ok(Some(r.refined3d))
                })
                .collect()
        })
        .collect();

    let mut records: Vec<FrameRecord> = records_from_tracks3d(&tracks3d, frames, lidar.header.frame_rate);
    let refined: Vec<_> = refined.into_iter().collect::<Result<_, _>>()?;
    for rec in &mut records {
        let t = rec.frame as usize;
        for p in &mut rec.persons {
            let i = tracks3d.iter().position(|tr| tr.person_id == p.id).expect("record built from these tracks");
            if let Some(joints) = &refined[i][t] {
                *p = PersonRecord {
                    joints: joints.iter().map(|x| vec![x.x, x.y, x.z]).collect(),
                    ..p.clone()
                };
            }
        }
    }
    // keep the input's own timestamps
    for (rec, orig) in records.iter_mut().zip(frame_times(&lidar, frames)) {
        rec.time = orig;
    }
    records.retain(|r| !r.persons.is_empty() || lidar.records.iter().any(|o| o.frame == r.frame));

    let header = StreamHeader {
        persons: Some(tracks3d.iter().map(|t| t.person_id.clone()).collect()),
        frames: Some(frames),
        config: Some(serde_json::json!({
            "command": "refine",
            "refine": app.refine,
            "lidar_stream": args.lidar.display().to_string(),
            "matches": args.matches.iter().map(|m| m.display().to_string()).collect::<Vec<_>>(),
        })),
        ..lidar.header.clone()
    };
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(data)?;
    }
    write_stream_file(&args.out, &header, &records).map_err(data)?;
    Ok(args.out.clone())
}

fn frame_times(s: &StreamFile, frames: usize) -> Vec<Option<f64>> {
    let mut times = vec![None; frames];
    for r in &s.records {
        if let Some(slot) = times.get_mut(r.frame as usize) {
            *slot = r.time;
        }
    }
    times
}

pub struct SimulateArgs {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
}

/// Writes `lidar.jsonl`, `camera_<c>.jsonl` per camera and `truth.jsonl`.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<Vec<PathBuf>, CliError> {
    let mut config: SceneConfig = read_toml(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let scene = generate(&config).map_err(|e| match e {
        SimError::InvalidConfig(_) => data(e),
        SimError::Geometry(_) => CliError::Numerical(e.into()),
    })?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .map_err(data)?;
    let hash = skeleton_hash();
    let rate = 1.0 / FRAME_PERIOD;
    let frames = config.duration_frames;
    let echo = serde_json::json!({ "command": "simulate", "scene": config });
    let mut written = Vec::new();

    let lidar_path = args.out.join("lidar.jsonl");
    let header = StreamHeader {
        sensor: SensorKind::Lidar3d,
        frame_rate: rate,
        skeleton_hash: hash.clone(),
        intrinsics: None,
        frames: Some(frames),
        persons: Some(scene.tracks3d.iter().map(|t| t.person_id.clone()).collect()),
        config: Some(echo.clone()),
    };
    write_stream_file(&lidar_path, &header, &records_from_tracks3d(&scene.tracks3d, frames, rate)).map_err(data)?;
    written.push(lidar_path);

    for (c, cam) in scene.cameras.iter().enumerate() {
        let path = args.out.join(format!("camera_{c}.jsonl"));
        let header = StreamHeader {
            sensor: SensorKind::Camera2d,
            frame_rate: rate,
            skeleton_hash: hash.clone(),
            intrinsics: Some(cam.intrinsics),
            frames: Some(frames),
            persons: Some(cam.tracks.iter().map(|t| t.person_id.clone()).collect()),
            config: Some(echo.clone()),
        };
        write_stream_file(&path, &header, &records_from_tracks2d(&cam.tracks, frames, rate)).map_err(data)?;
        written.push(path);
    }

    let truth_path = args.out.join("truth.jsonl");
    let file = std::fs::File::create(&truth_path)
        .with_context(|| format!("creating {}", truth_path.display()))
        .map_err(data)?;
    write_truth(&scene, &hash, std::io::BufWriter::new(file))
        .with_context(|| format!("writing {}", truth_path.display()))
        .map_err(data)?;
    written.push(truth_path);
    Ok(written)
}

pub struct BenchArgs {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub mode: Option<AblationMode>,
}

/// Runs a bench spec and writes the CSV report.
pub fn cmd_bench(args: &BenchArgs) -> Result<PathBuf, CliError> {
    let mut spec: BenchSpec = read_toml(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        for s in &mut spec.grid.seeds {
            *s = s.wrapping_add(seed);
        }
    }
    if let Some(mode) = args.mode {
        spec.modes = vec![mode];
    }
    let report = run_bench(&spec).map_err(|e| match e {
        HarnessError::InvalidSpec(_) => data(e),
        other => data(other),
    })?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(data)?;
    }
    export_report(&report, &args.out).map_err(data)?;
    for f in &report.failures {
        log::warn!("bench failure: {f:?}");
    }
    Ok(args.out.clone())
}
