//! Match results and simulator ground truth on disk.

use std::io::{BufRead, Write};
use std::path::Path;

use crossalign_core::geometry::Extrinsics;
use crossalign_core::matching::{AblationMode, PcmConfig, PcmOutput, PersonTrack2D, PersonTrack3D};
use crossalign_core::simulator::{Scene, SceneConfig};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::stream::{rotation_to_wxyz, wxyz_to_rotation};

pub const MATCH_FORMAT: &str = "crossalign-match/1";
pub const TRUTH_FORMAT: &str = "crossalign-truth/1";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Malformed { path: String, message: String },
    #[error("{what} hash mismatch: expected {expected}, found {found}")]
    HashMismatch {
        what: String,
        expected: String,
        found: String,
    },
}

/// Hex SHA-256 of a file's bytes.
pub fn file_sha256(path: impl AsRef<Path>) -> Result<String, OutputError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| OutputError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    /// LiDAR frame index.
    pub frame: usize,
    /// World-to-camera rotation, unit quaternion (w, x, y, z).
    pub quaternion_wxyz: [f64; 4],
    /// Meters.
    pub translation: [f64; 3],
}

impl PoseRecord {
    pub fn new(frame: usize, e: &Extrinsics) -> Self {
        Self {
            frame,
            quaternion_wxyz: rotation_to_wxyz(&e.rotation),
            translation: [e.translation.x, e.translation.y, e.translation.z],
        }
    }

    pub fn extrinsics(&self) -> Extrinsics {
        Extrinsics {
            rotation: wxyz_to_rotation(&self.quaternion_wxyz),
            translation: Vector3::from(self.translation),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub idx3d: usize,
    pub idx2d: usize,
    pub id3d: String,
    pub id2d: String,
    /// Mean reprojection error, pixels.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonRef {
    pub idx: usize,
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchStats {
    /// Camera-translation variance of the pose-only match, cm²; `None`
    /// when fewer than two frames had a pose.
    pub variance_cm2: Option<f64>,
    pub gate_fired: bool,
    pub frame_searches: usize,
    pub frames_voted: usize,
    pub frames_failed: usize,
    pub rejected_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchOutput {
    pub format: String,
    pub lidar_stream: String,
    pub lidar_sha256: String,
    pub camera_stream: String,
    pub camera_sha256: String,
    pub skeleton_hash: String,
    pub mode: AblationMode,
    pub config: PcmConfig,
    pub pairs: Vec<PairRecord>,
    pub unmatched3d: Vec<PersonRef>,
    pub unmatched2d: Vec<PersonRef>,
    /// Frames without a pose are omitted.
    pub extrinsics: Vec<PoseRecord>,
    pub stats: MatchStats,
    pub warnings: Vec<String>,
}

pub struct MatchSources<'a> {
    pub lidar_stream: String,
    pub lidar_sha256: String,
    pub camera_stream: String,
    pub camera_sha256: String,
    pub skeleton_hash: String,
    pub tracks3d: &'a [PersonTrack3D],
    pub tracks2d: &'a [PersonTrack2D],
}

impl MatchOutput {
    pub fn new(src: MatchSources<'_>, mode: AblationMode, config: &PcmConfig, out: &PcmOutput, warnings: Vec<String>) -> Self {
        let r3 = |i: usize| PersonRef {
            idx: i,
            id: src.tracks3d[i].person_id.clone(),
        };
        let r2 = |j: usize| PersonRef {
            idx: j,
            id: src.tracks2d[j].person_id.clone(),
        };
        Self {
            format: MATCH_FORMAT.into(),
            lidar_stream: src.lidar_stream,
            lidar_sha256: src.lidar_sha256,
            camera_stream: src.camera_stream,
            camera_sha256: src.camera_sha256,
            skeleton_hash: src.skeleton_hash,
            mode,
            config: config.clone(),
            pairs: out
                .matches
                .pairs
                .iter()
                .map(|p| PairRecord {
                    idx3d: p.idx3d,
                    idx2d: p.idx2d,
                    id3d: src.tracks3d[p.idx3d].person_id.clone(),
                    id2d: src.tracks2d[p.idx2d].person_id.clone(),
                    residual: p.residual,
                })
                .collect(),
            unmatched3d: out.matches.unmatched3d.iter().map(|&i| r3(i)).collect(),
            unmatched2d: out.matches.unmatched2d.iter().map(|&j| r2(j)).collect(),
            extrinsics: out
                .extrinsics
                .iter()
                .enumerate()
                .filter_map(|(t, e)| e.as_ref().map(|e| PoseRecord::new(t, e)))
                .collect(),
            stats: MatchStats {
                variance_cm2: out.stats.variance_cm2.is_finite().then_some(out.stats.variance_cm2),
                gate_fired: out.stats.gate_fired,
                frame_searches: out.stats.frame_searches,
                frames_voted: out.stats.frames_voted,
                frames_failed: out.stats.frames_failed,
                rejected_pairs: out.stats.rejected_pairs,
            },
            warnings,
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), OutputError> {
        let path = path.as_ref();
        let io = |source| OutputError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut text = serde_json::to_string_pretty(self).expect("match output serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(io)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, OutputError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| OutputError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let out: MatchOutput = serde_json::from_str(&text).map_err(|e| OutputError::Malformed {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if out.format != MATCH_FORMAT {
            return Err(OutputError::Malformed {
                path: path.display().to_string(),
                message: format!("unsupported format {:?}", out.format),
            });
        }
        Ok(out)
    }

    /// Camera pose per LiDAR frame.
    pub fn poses(&self, frames: usize) -> Vec<Option<Extrinsics>> {
        let mut poses = vec![None; frames];
        for p in &self.extrinsics {
            if p.frame < frames {
                poses[p.frame] = Some(p.extrinsics());
            }
        }
        poses
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TruthHeader {
    #[serde(rename = "type")]
    kind: String,
    format: String,
    skeleton_hash: String,
    config: SceneConfig,
    /// `[camera]`: (3D person id, 2D person id) seen at least once.
    correspondence: Vec<Vec<(String, String)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TruthFrame {
    #[serde(rename = "type")]
    kind: String,
    frame: usize,
    /// `[camera]`.
    extrinsics: Vec<PoseRecord>,
    /// `[camera]`: (3D id, 2D id) pairs visible in this frame.
    visible: Vec<Vec<(String, String)>>,
    /// `[person]`: true joints, meters.
    joints: Vec<Vec<[f64; 3]>>,
}

/// Ground truth as one header line plus one line per frame.
pub fn write_truth<W: Write>(scene: &Scene, skeleton_hash: &str, mut out: W) -> std::io::Result<()> {
    let ids = |c: usize, pairs: &[(usize, usize)]| -> Vec<(String, String)> {
        pairs
            .iter()
            .map(|&(i, j)| (scene.tracks3d[i].person_id.clone(), scene.cameras[c].tracks[j].person_id.clone()))
            .collect()
    };
    let header = TruthHeader {
        kind: "header".into(),
        format: TRUTH_FORMAT.into(),
        skeleton_hash: skeleton_hash.into(),
        config: scene.config.clone(),
        correspondence: scene.truth.correspondence.iter().enumerate().map(|(c, p)| ids(c, p)).collect(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for t in 0..scene.config.duration_frames {
        let frame = TruthFrame {
            kind: "frame".into(),
            frame: t,
            extrinsics: scene.truth.extrinsics.iter().map(|e| PoseRecord::new(t, &e[t])).collect(),
            visible: scene.truth.visible.iter().enumerate().map(|(c, v)| ids(c, &v[t])).collect(),
            joints: scene.truth.joints.iter().map(|p| p[t].iter().map(|x| [x.x, x.y, x.z]).collect()).collect(),
        };
        serde_json::to_writer(&mut out, &frame)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// The parts of a truth file needed for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthFile {
    pub config: SceneConfig,
    pub correspondence: Vec<Vec<(String, String)>>,
    /// `[frame][person][joint]`, meters.
    pub joints: Vec<Vec<Vec<Vector3<f64>>>>,
}

pub fn read_truth<R: BufRead>(input: R) -> Result<TruthFile, OutputError> {
    let bad = |line: usize, message: String| OutputError::Malformed {
        path: format!("truth line {line}"),
        message,
    };
    let mut lines = input.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| bad(1, "empty truth file".into()))?;
    let first = first.map_err(|e| bad(1, e.to_string()))?;
    let header: TruthHeader = serde_json::from_str(&first).map_err(|e| bad(1, e.to_string()))?;
    if header.format != TRUTH_FORMAT {
        return Err(bad(1, format!("unsupported format {:?}", header.format)));
    }
    let mut joints = Vec::new();
    for (n, line) in lines {
        let line = line.map_err(|e| bad(n + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: TruthFrame = serde_json::from_str(&line).map_err(|e| bad(n + 1, e.to_string()))?;
        joints.push(f.joints.iter().map(|p| p.iter().map(|x| Vector3::from(*x)).collect()).collect());
    }
    Ok(TruthFile {
        config: header.config,
        correspondence: header.correspondence,
        joints,
    })
}
