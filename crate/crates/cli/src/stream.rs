//! Line-delimited JSON keypoint streams.
//!
//! The first line is a header, every following line one frame:
//!
//! ```text
//! {"type":"header","format":"crossalign-stream/1","sensor":"camera2d","frame_rate":10.0,
//!  "skeleton_hash":"…","intrinsics":{"fx":…,"fy":…,"cx":…,"cy":…,"width":…,"height":…}}
//! {"type":"frame","frame":0,"time":0.0,"persons":[{"id":"p3","joints":[[u,v],…],
//!  "confidence":[…],"body_pose":[[w,x,y,z],…]}]}
//! ```
//!
//! LiDAR streams carry 3-element joints in world meters and no confidence;
//! camera streams carry pixel joints plus per-joint confidence (0 marks a
//! missing joint). `body_pose` holds one unit quaternion (w, x, y, z) per
//! joint, root first; the root is world-frame for LiDAR streams and
//! camera-frame for camera streams. Frame indices must strictly increase.
//! Unknown fields are ignored with a warning.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crossalign_core::geometry::{BodyPose, Intrinsics, JOINT_COUNT};
use crossalign_core::matching::{Observation2D, Observation3D, PersonTrack2D, PersonTrack3D};
use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const STREAM_FORMAT: &str = "crossalign-stream/1";

/// Quaternions further than this from unit norm are rejected.
const QUATERNION_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed header: {message}")]
    MalformedHeader { line: usize, message: String },
    #[error("line {line}: malformed record: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("line {line}: frame {found} does not follow frame {previous}")]
    FrameOrderViolation { line: usize, previous: u64, found: u64 },
    #[error("line {line}: person {person:?} has {found} {what}, expected {JOINT_COUNT}")]
    JointArityMismatch {
        line: usize,
        person: String,
        what: &'static str,
        found: usize,
    },
    #[error("expected a {expected} stream, found {found}")]
    WrongSensor { expected: SensorKind, found: SensorKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    Lidar3d,
    Camera2d,
}

impl std::fmt::Display for SensorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SensorKind::Lidar3d => "lidar3d",
            SensorKind::Camera2d => "camera2d",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamHeader {
    pub sensor: SensorKind,
    /// Frames per second; frame `i` without an explicit time is at
    /// `i / frame_rate` seconds.
    pub frame_rate: f64,
    pub skeleton_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intrinsics: Option<Intrinsics>,
    /// Timeline length; defaults to one past the last frame index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<usize>,
    /// Track order; persons not listed follow in order of first appearance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persons: Option<Vec<String>>,
    /// Whatever produced the stream, echoed for auditability.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonRecord {
    pub id: String,
    pub joints: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<Vec<f64>>,
    pub body_pose: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    pub persons: Vec<PersonRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamFile {
    pub header: StreamHeader,
    pub records: Vec<FrameRecord>,
    /// Unknown-field notices, with line numbers.
    pub warnings: Vec<String>,
}

const HEADER_FIELDS: &[&str] = &["type", "format", "sensor", "frame_rate", "skeleton_hash", "intrinsics", "frames", "persons", "config"];
const FRAME_FIELDS: &[&str] = &["type", "frame", "time", "persons"];
const PERSON_FIELDS: &[&str] = &["id", "joints", "confidence", "body_pose"];

fn unknown_fields(value: &Value, known: &[&str], line: usize, context: &str, warnings: &mut Vec<String>) {
    if let Value::Object(map) = value {
        for key in map.keys().filter(|k| !known.contains(&k.as_str())) {
            let msg = format!("line {line}: ignoring unknown {context} field {key:?}");
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
}

#[derive(Serialize)]
struct HeaderLine<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    format: &'static str,
    #[serde(flatten)]
    header: &'a StreamHeader,
}

#[derive(Serialize)]
struct FrameLine<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    #[serde(flatten)]
    record: &'a FrameRecord,
}

/// Writes a stream; the output depends only on the arguments.
pub fn write_stream<W: Write>(header: &StreamHeader, records: &[FrameRecord], mut out: W) -> std::io::Result<()> {
    let line = HeaderLine {
        kind: "header",
        format: STREAM_FORMAT,
        header,
    };
    serde_json::to_writer(&mut out, &line)?;
    out.write_all(b"\n")?;
    for record in records {
        serde_json::to_writer(&mut out, &FrameLine { kind: "frame", record })?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_stream_file(path: impl AsRef<Path>, header: &StreamHeader, records: &[FrameRecord]) -> Result<(), StreamError> {
    let path = path.as_ref();
    let io = |source| StreamError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    write_stream(header, records, std::io::BufWriter::new(file)).map_err(io)
}

pub fn parse_stream_file(path: impl AsRef<Path>) -> Result<StreamFile, StreamError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| StreamError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_stream(std::io::BufReader::new(file)).map_err(|e| match e {
        StreamError::Io { source, .. } => StreamError::Io {
            path: path.display().to_string(),
            source,
        },
        other => other,
    })
}

/// Parses and validates a stream. Blank lines are skipped; line numbers in
/// errors are 1-based physical lines.
pub fn parse_stream<R: BufRead>(input: R) -> Result<StreamFile, StreamError> {
    let mut header: Option<StreamHeader> = None;
    let mut records: Vec<FrameRecord> = Vec::new();
    let mut warnings = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line_no = n + 1;
        let text = line.map_err(|source| StreamError::Io {
            path: String::new(),
            source,
        })?;
        if text.trim().is_empty() {
            continue;
        }
        match &header {
            None => header = Some(parse_header(&text, line_no, &mut warnings)?),
            Some(h) => {
                let record = parse_record(&text, line_no, h.sensor, &mut warnings)?;
                if let Some(prev) = records.last() {
                    if record.frame <= prev.frame {
                        return Err(StreamError::FrameOrderViolation {
                            line: line_no,
                            previous: prev.frame,
                            found: record.frame,
                        });
                    }
                }
                records.push(record);
            }
        }
    }
    let header = header.ok_or(StreamError::MalformedHeader {
        line: 1,
        message: "empty stream".into(),
    })?;
    Ok(StreamFile {
        header,
        records,
        warnings,
    })
}

fn parse_header(text: &str, line: usize, warnings: &mut Vec<String>) -> Result<StreamHeader, StreamError> {
    let bad = |message: String| StreamError::MalformedHeader { line, message };
    let value: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    if value.get("type").and_then(Value::as_str) != Some("header") {
        return Err(bad("first line must be an object with \"type\": \"header\"".into()));
    }
    match value.get("format").and_then(Value::as_str) {
        Some(STREAM_FORMAT) => {}
        Some(other) => return Err(bad(format!("unsupported format {other:?}"))),
        None => return Err(bad("missing \"format\"".into())),
    }
    unknown_fields(&value, HEADER_FIELDS, line, "header", warnings);
    let header: StreamHeader = serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
    if !(header.frame_rate > 0.0 && header.frame_rate.is_finite()) {
        return Err(bad(format!("frame_rate must be positive, got {}", header.frame_rate)));
    }
    match (header.sensor, &header.intrinsics) {
        (SensorKind::Camera2d, None) => return Err(bad("camera streams must carry intrinsics".into())),
        (_, Some(k)) => k.validate().map_err(|e| bad(e.to_string()))?,
        _ => {}
    }
    Ok(header)
}

fn parse_record(text: &str, line: usize, sensor: SensorKind, warnings: &mut Vec<String>) -> Result<FrameRecord, StreamError> {
    let bad = |message: String| StreamError::MalformedRecord { line, message };
    let value: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    match value.get("type").and_then(Value::as_str) {
        Some("frame") | None => {}
        Some(other) => return Err(bad(format!("unexpected record type {other:?}"))),
    }
    unknown_fields(&value, FRAME_FIELDS, line, "frame", warnings);
    if let Some(Value::Array(persons)) = value.get("persons") {
        for p in persons {
            unknown_fields(p, PERSON_FIELDS, line, "person", warnings);
        }
    }
    let record: FrameRecord = serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
    if let Some(t) = record.time {
        if !t.is_finite() {
            return Err(bad("time must be finite".into()));
        }
    }
    let dim = match sensor {
        SensorKind::Lidar3d => 3,
        SensorKind::Camera2d => 2,
    };
    let mut ids = std::collections::HashSet::new();
    for p in &record.persons {
        if !ids.insert(p.id.as_str()) {
            return Err(bad(format!("person {:?} appears twice", p.id)));
        }
        let arity = |what, found| StreamError::JointArityMismatch {
            line,
            person: p.id.clone(),
            what,
            found,
        };
        if p.joints.len() != JOINT_COUNT {
            return Err(arity("joints", p.joints.len()));
        }
        if p.body_pose.len() != JOINT_COUNT {
            return Err(arity("body-pose rotations", p.body_pose.len()));
        }
        if let Some(j) = p.joints.iter().position(|j| j.len() != dim) {
            return Err(bad(format!("person {:?} joint {j} has {} coordinates, expected {dim}", p.id, p.joints[j].len())));
        }
        match (sensor, &p.confidence) {
            (SensorKind::Camera2d, None) => return Err(bad(format!("person {:?} has no confidence", p.id))),
            (SensorKind::Camera2d, Some(c)) if c.len() != JOINT_COUNT => return Err(arity("confidences", c.len())),
            (SensorKind::Camera2d, Some(c)) if c.iter().any(|v| !(0.0..=1.0).contains(v)) => {
                return Err(bad(format!("person {:?} has a confidence outside [0, 1]", p.id)))
            }
            _ => {}
        }
        for q in &p.body_pose {
            let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !((norm - 1.0).abs() <= QUATERNION_NORM_TOLERANCE) {
                return Err(bad(format!("person {:?} has a non-unit quaternion (norm {norm})", p.id)));
            }
        }
    }
    Ok(record)
}

/// Unit quaternion (w, x, y, z) with `w >= 0`.
pub fn rotation_to_wxyz(r: &Matrix3<f64>) -> [f64; 4] {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r));
    let q = if q.w < 0.0 { -q.into_inner() } else { q.into_inner() };
    [q.w, q.i, q.j, q.k]
}

pub fn wxyz_to_rotation(q: &[f64; 4]) -> Matrix3<f64> {
    UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]))
        .to_rotation_matrix()
        .into_inner()
}

fn body_pose_to_wxyz(pose: &BodyPose) -> Vec<[f64; 4]> {
    pose.rotations().iter().map(rotation_to_wxyz).collect()
}

fn body_pose_from_wxyz(q: &[[f64; 4]]) -> BodyPose {
    BodyPose::new(q.iter().map(wxyz_to_rotation).collect()).expect("unit quaternions give proper rotations")
}

impl StreamFile {
    /// Timeline length implied by the stream.
    pub fn frame_count(&self) -> usize {
        self.header
            .frames
            .unwrap_or_else(|| self.records.last().map_or(0, |r| r.frame as usize + 1))
    }

    fn declared_order(&self) -> (Vec<String>, HashMap<String, usize>) {
        let order: Vec<String> = self.header.persons.clone().unwrap_or_default();
        let index = order.iter().enumerate().map(|(k, id)| (id.clone(), k)).collect();
        (order, index)
    }

    /// Seconds of each record.
    fn record_time(&self, r: &FrameRecord) -> f64 {
        r.time.unwrap_or(r.frame as f64 / self.header.frame_rate)
    }

    fn expect(&self, sensor: SensorKind) -> Result<(), StreamError> {
        if self.header.sensor != sensor {
            return Err(StreamError::WrongSensor {
                expected: sensor,
                found: self.header.sensor,
            });
        }
        Ok(())
    }

    /// Person tracks in order of first appearance, on this stream's own
    /// frame indices.
    pub fn tracks3d(&self) -> Result<Vec<PersonTrack3D>, StreamError> {
        self.expect(SensorKind::Lidar3d)?;
        let frames = self.frame_count();
        let (mut order, mut index) = self.declared_order();
        let mut tracks: Vec<Vec<Option<Observation3D>>> = vec![vec![None; frames]; order.len()];
        for r in &self.records {
            let t = r.frame as usize;
            if t >= frames {
                return Err(StreamError::MalformedRecord {
                    line: 0,
                    message: format!("frame {t} beyond the declared {frames} frames"),
                });
            }
            for p in &r.persons {
                let k = *index.entry(p.id.clone()).or_insert_with(|| {
                    order.push(p.id.clone());
                    tracks.push(vec![None; frames]);
                    tracks.len() - 1
                });
                let joints = p.joints.iter().map(|j| Vector3::new(j[0], j[1], j[2])).collect();
                let obs = Observation3D::new(joints, body_pose_from_wxyz(&p.body_pose)).map_err(|e| {
                    StreamError::MalformedRecord {
                        line: 0,
                        message: format!("frame {t}, person {:?}: {e}", p.id),
                    }
                })?;
                tracks[k][t] = Some(obs);
            }
        }
        Ok(order.into_iter().zip(tracks).map(|(id, f)| PersonTrack3D::new(id, f)).collect())
    }

    /// Camera person tracks resampled onto a LiDAR timeline of `frames`
    /// frames at `rate` Hz: each camera frame goes to the nearest LiDAR
    /// frame. Frames further than half a LiDAR period from every LiDAR
    /// frame, or beaten by a closer camera frame, are dropped and reported.
    pub fn tracks2d_on(&self, rate: f64, frames: usize) -> Result<(Vec<PersonTrack2D>, Vec<String>), StreamError> {
        self.expect(SensorKind::Camera2d)?;
        let mut notices = Vec::new();
        // lidar frame -> (record index, |time offset|)
        let mut slot: Vec<Option<(usize, f64)>> = vec![None; frames];
        for (i, r) in self.records.iter().enumerate() {
            let t = self.record_time(r);
            let target = (t * rate).round();
            let offset = (t - target / rate).abs();
            if target < 0.0 || target >= frames as f64 || offset > 0.5 / rate {
                notices.push(format!("camera frame {} (t = {t} s) has no LiDAR frame; dropped", r.frame));
                continue;
            }
            let target = target as usize;
            match slot[target] {
                Some((j, best)) if best <= offset => {
                    notices.push(format!(
                        "camera frame {} maps to LiDAR frame {target}, already taken by camera frame {}; dropped",
                        r.frame, self.records[j].frame
                    ));
                }
                Some((j, _)) => {
                    notices.push(format!(
                        "camera frame {} maps to LiDAR frame {target}, replaced by closer camera frame {}; dropped",
                        self.records[j].frame, r.frame
                    ));
                    slot[target] = Some((i, offset));
                }
                None => slot[target] = Some((i, offset)),
            }
        }
        let (mut order, mut index) = self.declared_order();
        let mut tracks: Vec<Vec<Option<Observation2D>>> = vec![vec![None; frames]; order.len()];
        for (t, s) in slot.iter().enumerate() {
            let Some((i, _)) = s else {
                continue;
            };
            for p in &self.records[*i].persons {
                let k = *index.entry(p.id.clone()).or_insert_with(|| {
                    order.push(p.id.clone());
                    tracks.push(vec![None; frames]);
                    tracks.len() - 1
                });
                let joints = p.joints.iter().map(|j| Vector2::new(j[0], j[1])).collect();
                let conf = p.confidence.clone().expect("validated camera record");
                let obs = Observation2D::new(joints, conf, body_pose_from_wxyz(&p.body_pose)).map_err(|e| {
                    StreamError::MalformedRecord {
                        line: 0,
                        message: format!("camera frame {}, person {:?}: {e}", self.records[*i].frame, p.id),
                    }
                })?;
                tracks[k][t] = Some(obs);
            }
        }
        Ok((order.into_iter().zip(tracks).map(|(id, f)| PersonTrack2D::new(id, f)).collect(), notices))
    }

    /// Camera tracks on the stream's own frame indices.
    pub fn tracks2d(&self) -> Result<Vec<PersonTrack2D>, StreamError> {
        let frames = self.frame_count();
        let (tracks, _) = StreamFile {
            records: self
                .records
                .iter()
                .map(|r| FrameRecord {
                    time: None,
                    ..r.clone()
                })
                .collect(),
            ..self.clone()
        }
        .tracks2d_on(self.header.frame_rate, frames)?;
        Ok(tracks)
    }
}

/// One record per frame (empty frames included), persons in track order.
pub fn records_from_tracks3d(tracks: &[PersonTrack3D], frames: usize, frame_rate: f64) -> Vec<FrameRecord> {
    (0..frames)
        .map(|t| FrameRecord {
            frame: t as u64,
            time: Some(t as f64 / frame_rate),
            persons: tracks
                .iter()
                .filter_map(|tr| {
                    tr.at(t).map(|o| PersonRecord {
                        id: tr.person_id.clone(),
                        joints: o.joints.iter().map(|j| vec![j.x, j.y, j.z]).collect(),
                        confidence: None,
                        body_pose: body_pose_to_wxyz(&o.body_pose),
                    })
                })
                .collect(),
        })
        .collect()
}

pub fn records_from_tracks2d(tracks: &[PersonTrack2D], frames: usize, frame_rate: f64) -> Vec<FrameRecord> {
    (0..frames)
        .map(|t| FrameRecord {
            frame: t as u64,
            time: Some(t as f64 / frame_rate),
            persons: tracks
                .iter()
                .filter_map(|tr| {
                    tr.at(t).map(|o| PersonRecord {
                        id: tr.person_id.clone(),
                        joints: o.joints.iter().map(|j| vec![j.x, j.y]).collect(),
                        confidence: Some(o.confidence.clone()),
                        body_pose: body_pose_to_wxyz(&o.body_pose),
                    })
                })
                .collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(sensor: SensorKind) -> StreamHeader {
        StreamHeader {
            sensor,
            frame_rate: 10.0,
            skeleton_hash: "abc".into(),
            intrinsics: (sensor == SensorKind::Camera2d)
                .then(|| Intrinsics::new(800.0, 800.0, 320.0, 240.0, 640.0, 480.0).unwrap()),
            frames: None,
            persons: None,
            config: None,
        }
    }

    fn person(id: &str, dim: usize) -> PersonRecord {
        PersonRecord {
            id: id.into(),
            joints: (0..JOINT_COUNT).map(|j| vec![j as f64 * 0.1; dim]).collect(),
            confidence: (dim == 2).then(|| vec![0.9; JOINT_COUNT]),
            body_pose: vec![[1.0, 0.0, 0.0, 0.0]; JOINT_COUNT],
        }
    }

    fn text(header: &StreamHeader, records: &[FrameRecord]) -> String {
        let mut buf = Vec::new();
        write_stream(header, records, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn frame_order_violation_names_the_line() {
        let records: Vec<_> = [3u64, 2]
            .into_iter()
            .map(|frame| FrameRecord {
                frame,
                time: None,
                persons: vec![person("a", 3)],
            })
            .collect();
        let err = parse_stream(text(&header(SensorKind::Lidar3d), &records).as_bytes()).unwrap_err();
        assert!(matches!(err, StreamError::FrameOrderViolation { line: 3, previous: 3, found: 2 }), "{err}");
    }

    #[test]
    fn short_person_is_an_arity_mismatch() {
        let mut p = person("a", 2);
        p.joints.pop();
        let records = vec![FrameRecord {
            frame: 0,
            time: None,
            persons: vec![p],
        }];
        let err = parse_stream(text(&header(SensorKind::Camera2d), &records).as_bytes()).unwrap_err();
        assert!(matches!(err, StreamError::JointArityMismatch { line: 2, found: 23, .. }), "{err}");
    }

    #[test]
    fn missing_or_bad_header_is_malformed() {
        let err = parse_stream(r#"{"type":"frame","frame":0,"persons":[]}"#.as_bytes()).unwrap_err();
        assert!(matches!(err, StreamError::MalformedHeader { line: 1, .. }));
        let no_k = r#"{"type":"header","format":"crossalign-stream/1","sensor":"camera2d","frame_rate":10,"skeleton_hash":"x"}"#;
        assert!(matches!(parse_stream(no_k.as_bytes()), Err(StreamError::MalformedHeader { line: 1, .. })));
    }

    #[test]
    fn unknown_fields_warn_but_parse() {
        let mut t = text(&header(SensorKind::Lidar3d), &[]);
        t = t.replace("\"sensor\"", "\"extra\":1,\"sensor\"");
        t.push_str(r#"{"type":"frame","frame":0,"weather":"rain","persons":[]}"#);
        let s = parse_stream(t.as_bytes()).unwrap();
        assert_eq!(s.warnings.len(), 2);
        assert!(s.warnings[1].starts_with("line 2"));
    }

    #[test]
    fn quaternions_round_trip_and_keep_positive_w() {
        let r = nalgebra::Rotation3::from_euler_angles(2.9, -0.4, 1.3).into_inner();
        let q = rotation_to_wxyz(&r);
        assert!(q[0] >= 0.0);
        assert!((q.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((wxyz_to_rotation(&q) - r).norm() < 1e-14);
    }

    #[test]
    fn nearest_frame_alignment() {
        let mut h = header(SensorKind::Camera2d);
        h.frame_rate = 30.0;
        let times = [0.0, 0.033, 0.066, 0.1, 0.14, 1.0];
        let records: Vec<_> = times
            .iter()
            .enumerate()
            .map(|(i, &t)| FrameRecord {
                frame: i as u64,
                time: Some(t),
                persons: vec![person("c", 2)],
            })
            .collect();
        let s = parse_stream(text(&h, &records).as_bytes()).unwrap();
        let (tracks, notices) = s.tracks2d_on(10.0, 3).unwrap();
        let present: Vec<bool> = tracks[0].frames.iter().map(Option::is_some).collect();
        assert_eq!(present, vec![true, true, false]);
        // 0.033 loses to 0.0, 0.066 loses to 0.1, 0.14 to 0.1, 1.0 is off the timeline
        assert_eq!(notices.len(), 4);
    }
}
