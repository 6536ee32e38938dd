//! Benchmark runner: scene grids x matching strategies, scored against the
//! simulator's ground truth.
//!
//! Accuracy is computed on all cores and merged in a fixed order, so it is
//! bit-identical for any thread count. Throughput is measured afterwards in
//! a separate single-threaded pass over the same scenes.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;
use std::time::Instant;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matching::{ablation_match, AblationMode, PcmConfig};
use crate::refiner::{mean_joint_error, refine, CameraObservation, RefineProblem, RefineWeights};
use crate::simulator::{accuracy, generate, Scene, SceneConfig};

/// Version tag written into every exported report.
pub const REPORT_SCHEMA: &str = "crossalign-bench/1";

const CSV_COLUMNS: [&str; 12] = [
    "mode",
    "person_count",
    "pixel_noise",
    "synchronized",
    "scenes",
    "failures",
    "accuracy_mean",
    "accuracy_std",
    "frames",
    "match_seconds",
    "fps",
    "mean_gate_fired",
];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid bench spec: {0}")]
    InvalidSpec(String),
    #[error("I/O failure on {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed report at line {line}: {message}")]
    MalformedReport { line: usize, message: String },
}

/// The axes of the scene grid. Every combination is one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneGrid {
    pub person_counts: Vec<usize>,
    pub pixel_noise: Vec<f64>,
    /// `true` pairs persons up (0 with 1, 2 with 3, ...) to share body poses.
    pub synchronized: Vec<bool>,
    pub seeds: Vec<u64>,
}

impl Default for SceneGrid {
    fn default() -> Self {
        Self {
            person_counts: vec![4],
            pixel_noise: vec![2.0],
            synchronized: vec![false],
            seeds: vec![0],
        }
    }
}

/// Refinement trial settings: every person visible in the middle frame has
/// its true joints perturbed and refined against the cameras that see it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinementBench {
    /// Gaussian noise added to the true 3D joints, meters per axis.
    pub initial_noise: f64,
    pub weights: RefineWeights,
}

impl Default for RefinementBench {
    fn default() -> Self {
        Self {
            initial_noise: 0.05,
            weights: RefineWeights::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSpec {
    pub grid: SceneGrid,
    pub modes: Vec<AblationMode>,
    pub repetitions: usize,
    /// Everything about the scenes the grid does not override.
    pub scene: SceneConfig,
    pub pcm: PcmConfig,
    pub refinement: Option<RefinementBench>,
    /// Run the single-threaded timing pass.
    pub measure_throughput: bool,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            grid: SceneGrid::default(),
            modes: AblationMode::ALL.to_vec(),
            repetitions: 1,
            scene: SceneConfig::default(),
            pcm: PcmConfig::default(),
            refinement: None,
            measure_throughput: true,
        }
    }
}

/// One grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub person_count: usize,
    pub pixel_noise: f64,
    pub synchronized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub mode: AblationMode,
    pub cell: Cell,
    /// Scenes scored (failures excluded).
    pub scenes: usize,
    pub failures: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    /// Camera frames matched in the timing pass.
    pub frames: usize,
    pub match_seconds: Option<f64>,
    pub fps: Option<f64>,
    /// Fraction of scored runs in which the variance gate fired.
    pub mean_gate_fired: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub mode: Option<AblationMode>,
    pub cell: Cell,
    pub seed: u64,
    pub camera: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementStats {
    pub trials: usize,
    pub mean_input_error: f64,
    pub mean_refined_error: f64,
    /// Mean over trials of refined / input error.
    pub mean_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
    pub failures: Vec<FailureRecord>,
    pub refinement: Option<RefinementStats>,
}

impl MetricsReport {
    pub fn row(&self, mode: AblationMode, cell: &Cell) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.mode == mode && r.cell == *cell)
    }
}

impl BenchSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidSpec(m.into()));
        if self.modes.is_empty() {
            return bad("no matching modes");
        }
        let g = &self.grid;
        if g.person_counts.is_empty() || g.pixel_noise.is_empty() || g.synchronized.is_empty() || g.seeds.is_empty() {
            return bad("every grid axis needs at least one value");
        }
        if self.repetitions == 0 {
            return bad("repetitions must be >= 1");
        }
        self.pcm.validate().map_err(|e| HarnessError::InvalidSpec(e.to_string()))?;
        if let Some(r) = &self.refinement {
            r.weights.validate().map_err(|e| HarnessError::InvalidSpec(e.to_string()))?;
            if !(r.initial_noise >= 0.0 && r.initial_noise.is_finite()) {
                return bad("refinement initial_noise must be finite and >= 0");
            }
        }
        for cell in self.cells() {
            self.scene_config(&cell, 0)
                .validate()
                .map_err(|e| HarnessError::InvalidSpec(e.to_string()))?;
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &person_count in &self.grid.person_counts {
            for &pixel_noise in &self.grid.pixel_noise {
                for &synchronized in &self.grid.synchronized {
                    cells.push(Cell {
                        person_count,
                        pixel_noise,
                        synchronized,
                    });
                }
            }
        }
        cells
    }

    /// Scene seeds of one cell: every grid seed, repeated with distinct
    /// sub-seeds.
    fn scene_seeds(&self) -> Vec<u64> {
        let mut seeds = Vec::new();
        for &s in &self.grid.seeds {
            for rep in 0..self.repetitions as u64 {
                seeds.push(s.wrapping_add(rep.wrapping_mul(0x9E37_79B9_7F4A_7C15)));
            }
        }
        seeds
    }

    pub fn scene_config(&self, cell: &Cell, seed: u64) -> SceneConfig {
        let synchronized_pose_groups = if cell.synchronized {
            (0..cell.person_count / 2).map(|g| vec![2 * g, 2 * g + 1]).collect()
        } else {
            Vec::new()
        };
        SceneConfig {
            person_count: cell.person_count,
            pixel_noise_sigma: cell.pixel_noise,
            synchronized_pose_groups,
            seed,
            ..self.scene.clone()
        }
    }
}

struct SceneOutcome {
    /// `[mode]`: per-camera accuracy and gate flag, or the failure.
    per_mode: Vec<Vec<Result<(f64, bool), String>>>,
    generation_error: Option<String>,
    refinement: Vec<(f64, f64)>,
}

fn run_scene(spec: &BenchSpec, cell: &Cell, seed: u64) -> (Option<Scene>, SceneOutcome) {
    let scene = match generate(&spec.scene_config(cell, seed)) {
        Ok(s) => s,
        Err(e) => {
            return (
                None,
                SceneOutcome {
                    per_mode: Vec::new(),
                    generation_error: Some(e.to_string()),
                    refinement: Vec::new(),
                },
            )
        }
    };
    let per_mode = spec
        .modes
        .iter()
        .map(|&mode| {
            scene
                .cameras
                .iter()
                .enumerate()
                .map(|(c, cam)| {
                    ablation_match(mode, &scene.tracks3d, &cam.tracks, &cam.intrinsics, &spec.pcm)
                        .map(|out| (accuracy(&out.matches, &scene.truth, c), out.stats.gate_fired))
                        .map_err(|e| e.to_string())
                })
                .collect()
        })
        .collect();
    let refinement = spec
        .refinement
        .map(|r| refinement_trials(&scene, &r, seed))
        .unwrap_or_default();
    (
        Some(scene),
        SceneOutcome {
            per_mode,
            generation_error: None,
            refinement,
        },
    )
}

/// (input error, refined error) for every person seen by at least one
/// camera in the middle frame.
fn refinement_trials(scene: &Scene, bench: &RefinementBench, seed: u64) -> Vec<(f64, f64)> {
    let t = scene.truth.extrinsics.first().map_or(0, |e| e.len() / 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0F_5EF1_4E5);
    let normal = Normal::new(0.0, bench.initial_noise.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let mut trials = Vec::new();
    for (p, joints) in scene.truth.joints.iter().enumerate() {
        let truth = &joints[t];
        let mut observations = Vec::new();
        for (c, cam) in scene.cameras.iter().enumerate() {
            let Some(&(_, j)) = scene.truth.visible[c][t].iter().find(|(i, _)| *i == p) else {
                continue;
            };
            let Some(o2) = cam.tracks[j].at(t) else {
                continue;
            };
            observations.push(CameraObservation {
                intrinsics: cam.intrinsics,
                extrinsics: scene.truth.extrinsics[c][t],
                joints2d: o2.joints.clone(),
                confidence: o2.confidence.clone(),
            });
        }
        if observations.is_empty() {
            continue;
        }
        let initial: Vec<Vector3<f64>> = truth
            .iter()
            .map(|x| x + Vector3::from_fn(|_, _| normal.sample(&mut rng)))
            .collect();
        let problem = RefineProblem::new(initial.clone(), observations, bench.weights);
        if let Ok(r) = refine(&problem) {
            trials.push((mean_joint_error(&initial, truth), mean_joint_error(&r.refined3d, truth)));
        }
    }
    trials
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Runs the whole grid. Matching errors become failure records; only an
/// invalid spec is an error.
pub fn run_bench(spec: &BenchSpec) -> Result<MetricsReport, HarnessError> {
    spec.validate()?;
    let cells = spec.cells();
    let seeds = spec.scene_seeds();
    let tasks: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let outcomes: Vec<(Option<Scene>, SceneOutcome)> = tasks
        .par_iter()
        .map(|&(c, seed)| run_scene(spec, &cells[c], seed))
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut refinement = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        let cell_outcomes = &outcomes[c * seeds.len()..(c + 1) * seeds.len()];
        for (k, (_, o)) in cell_outcomes.iter().enumerate() {
            if let Some(msg) = &o.generation_error {
                failures.push(FailureRecord {
                    mode: None,
                    cell: *cell,
                    seed: seeds[k],
                    camera: None,
                    message: msg.clone(),
                });
            }
            refinement.extend_from_slice(&o.refinement);
        }
        for (m, &mode) in spec.modes.iter().enumerate() {
            let mut acc = Vec::new();
            let mut fired = 0usize;
            let mut failed = 0usize;
            for (k, (_, o)) in cell_outcomes.iter().enumerate() {
                if o.generation_error.is_some() {
                    failed += 1;
                    continue;
                }
                for (cam, r) in o.per_mode[m].iter().enumerate() {
                    match r {
                        Ok((a, g)) => {
                            acc.push(*a);
                            fired += usize::from(*g);
                        }
                        Err(msg) => {
                            failed += 1;
                            failures.push(FailureRecord {
                                mode: Some(mode),
                                cell: *cell,
                                seed: seeds[k],
                                camera: Some(cam),
                                message: msg.clone(),
                            });
                        }
                    }
                }
            }
            let (accuracy_mean, accuracy_std) = mean_std(&acc);
            rows.push(MetricsRow {
                mode,
                cell: *cell,
                scenes: acc.len(),
                failures: failed,
                accuracy_mean,
                accuracy_std,
                frames: 0,
                match_seconds: None,
                fps: None,
                mean_gate_fired: if acc.is_empty() { 0.0 } else { fired as f64 / acc.len() as f64 },
            });
        }
    }

    if spec.measure_throughput {
        for (c, cell) in cells.iter().enumerate() {
            let scenes: Vec<&Scene> = outcomes[c * seeds.len()..(c + 1) * seeds.len()]
                .iter()
                .filter_map(|(s, _)| s.as_ref())
                .collect();
            for &mode in &spec.modes {
                let (frames, seconds) = time_mode(mode, &scenes, &spec.pcm);
                let row = rows
                    .iter_mut()
                    .find(|r| r.mode == mode && r.cell == *cell)
                    .expect("row exists for every cell and mode");
                row.frames = frames;
                if frames > 0 && seconds > 0.0 {
                    row.match_seconds = Some(seconds);
                    row.fps = Some(frames as f64 / seconds);
                }
            }
        }
    }

    let refinement = (!refinement.is_empty()).then(|| {
        let n = refinement.len() as f64;
        RefinementStats {
            trials: refinement.len(),
            mean_input_error: refinement.iter().map(|r| r.0).sum::<f64>() / n,
            mean_refined_error: refinement.iter().map(|r| r.1).sum::<f64>() / n,
            mean_ratio: refinement.iter().map(|r| r.1 / r.0).sum::<f64>() / n,
        }
    });
    Ok(MetricsReport {
        rows,
        failures,
        refinement,
    })
}

/// Matching-only wall time of one mode over the given scenes, on the
/// calling thread alone.
fn time_mode(mode: AblationMode, scenes: &[&Scene], config: &PcmConfig) -> (usize, f64) {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("single-thread pool");
    pool.install(|| {
        let mut frames = 0;
        let mut seconds = 0.0;
        for scene in scenes {
            for cam in &scene.cameras {
                let t0 = Instant::now();
                let ok = ablation_match(mode, &scene.tracks3d, &cam.tracks, &cam.intrinsics, config).is_ok();
                let dt = t0.elapsed().as_secs_f64();
                if ok {
                    frames += scene.config.duration_frames;
                    seconds += dt;
                }
            }
        }
        (frames, seconds)
    })
}

fn fmt_f64(v: f64) -> String {
    // 17 significant digits; Rust float formatting never uses the locale
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Writes one CSV row per (mode, cell), then `#`-prefixed `key=value`
/// summary lines.
pub fn write_report<W: Write>(report: &MetricsReport, mut out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(&mut out);
    w.write_record(CSV_COLUMNS)?;
    for r in &report.rows {
        w.write_record([
            r.mode.label().to_string(),
            r.cell.person_count.to_string(),
            fmt_f64(r.cell.pixel_noise),
            r.cell.synchronized.to_string(),
            r.scenes.to_string(),
            r.failures.to_string(),
            fmt_f64(r.accuracy_mean),
            fmt_f64(r.accuracy_std),
            r.frames.to_string(),
            fmt_opt(r.match_seconds),
            fmt_opt(r.fps),
            fmt_f64(r.mean_gate_fired),
        ])?;
    }
    w.flush()?;
    drop(w);
    let mut summary = String::new();
    let _ = writeln!(summary, "# schema={REPORT_SCHEMA}");
    let _ = writeln!(summary, "# rows={}", report.rows.len());
    let _ = writeln!(summary, "# failures={}", report.failures.len());
    for f in &report.failures {
        let _ = writeln!(summary, "# failure={}", serde_json::to_string(f).expect("failure record serializes"));
    }
    if let Some(s) = &report.refinement {
        let _ = writeln!(summary, "# refinement_trials={}", s.trials);
        let _ = writeln!(summary, "# refinement_mean_input_error={}", fmt_f64(s.mean_input_error));
        let _ = writeln!(summary, "# refinement_mean_refined_error={}", fmt_f64(s.mean_refined_error));
        let _ = writeln!(summary, "# refinement_mean_ratio={}", fmt_f64(s.mean_ratio));
    }
    out.write_all(summary.as_bytes())?;
    out.flush()
}

pub fn export_report(report: &MetricsReport, path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let io = |source| HarnessError::IoFailure {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    write_report(report, std::io::BufWriter::new(file)).map_err(io)
}

/// Parses what [`write_report`] produced.
pub fn parse_report<R: BufRead>(input: R) -> Result<MetricsReport, HarnessError> {
    let mut csv_text = String::new();
    let mut summary = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| HarnessError::MalformedReport {
            line: n + 1,
            message: e.to_string(),
        })?;
        match line.strip_prefix("# ") {
            Some(rest) => summary.push((n + 1, rest.to_string())),
            None => {
                csv_text.push_str(&line);
                csv_text.push('\n');
            }
        }
    }

    let bad = |line: usize, message: String| HarnessError::MalformedReport { line, message };
    let mut rows = Vec::new();
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let header = reader.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    if header.iter().ne(CSV_COLUMNS) {
        return Err(bad(1, format!("unexpected columns {header:?}")));
    }
    for (n, record) in reader.records().enumerate() {
        let line = n + 2;
        let record = record.map_err(|e| bad(line, e.to_string()))?;
        let f = |i: usize| -> Result<f64, HarnessError> {
            record[i].parse().map_err(|_| bad(line, format!("bad number {:?} in {}", &record[i], CSV_COLUMNS[i])))
        };
        let u = |i: usize| -> Result<usize, HarnessError> {
            record[i].parse().map_err(|_| bad(line, format!("bad count {:?} in {}", &record[i], CSV_COLUMNS[i])))
        };
        let opt = |i: usize| -> Result<Option<f64>, HarnessError> {
            if record[i].is_empty() {
                Ok(None)
            } else {
                f(i).map(Some)
            }
        };
        rows.push(MetricsRow {
            mode: record[0].parse().map_err(|e: crate::matching::MatchError| bad(line, e.to_string()))?,
            cell: Cell {
                person_count: u(1)?,
                pixel_noise: f(2)?,
                synchronized: record[3].parse().map_err(|_| bad(line, "bad synchronized flag".into()))?,
            },
            scenes: u(4)?,
            failures: u(5)?,
            accuracy_mean: f(6)?,
            accuracy_std: f(7)?,
            frames: u(8)?,
            match_seconds: opt(9)?,
            fps: opt(10)?,
            mean_gate_fired: f(11)?,
        });
    }

    let mut failures = Vec::new();
    let mut refinement = RefinementStats {
        trials: 0,
        mean_input_error: 0.0,
        mean_refined_error: 0.0,
        mean_ratio: 0.0,
    };
    let mut has_refinement = false;
    for (line, entry) in summary {
        let Some((key, value)) = entry.split_once('=') else {
            return Err(bad(line, format!("summary line without '=': {entry:?}")));
        };
        let num = |v: &str| v.parse::<f64>().map_err(|_| bad(line, format!("bad number {v:?}")));
        match key {
            "schema" if value != REPORT_SCHEMA => return Err(bad(line, format!("unsupported schema {value:?}"))),
            "schema" | "rows" | "failures" => {}
            "failure" => failures.push(serde_json::from_str(value).map_err(|e| bad(line, e.to_string()))?),
            "refinement_trials" => {
                has_refinement = true;
                refinement.trials = value.parse().map_err(|_| bad(line, format!("bad count {value:?}")))?;
            }
            "refinement_mean_input_error" => refinement.mean_input_error = num(value)?,
            "refinement_mean_refined_error" => refinement.mean_refined_error = num(value)?,
            "refinement_mean_ratio" => refinement.mean_ratio = num(value)?,
            _ => log::warn!("report line {line}: ignoring unknown summary key {key:?}"),
        }
    }
    Ok(MetricsReport {
        rows,
        failures,
        refinement: has_refinement.then_some(refinement),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> MetricsReport {
        let mut rows = Vec::new();
        for mode in [AblationMode::Pose, AblationMode::Full] {
            for (i, p) in [2usize, 3, 5].into_iter().enumerate() {
                rows.push(MetricsRow {
                    mode,
                    cell: Cell {
                        person_count: p,
                        pixel_noise: 0.1 + i as f64 / 3.0,
                        synchronized: i == 1,
                    },
                    scenes: 7,
                    failures: i,
                    accuracy_mean: 1.0 / 3.0,
                    accuracy_std: std::f64::consts::PI * 1e-7,
                    frames: 224,
                    match_seconds: (i != 2).then_some(0.123456789012345678),
                    fps: (i != 2).then_some(1814.4000000000001),
                    mean_gate_fired: 0.5,
                });
            }
        }
        MetricsReport {
            rows,
            failures: vec![FailureRecord {
                mode: Some(AblationMode::KeyPointsExhaustive),
                cell: Cell {
                    person_count: 9,
                    pixel_noise: 2.0,
                    synchronized: false,
                },
                seed: 3,
                camera: Some(0),
                message: "too many, candidates".into(),
            }],
            refinement: Some(RefinementStats {
                trials: 12,
                mean_input_error: 0.0866,
                mean_refined_error: 0.004,
                mean_ratio: 0.05,
            }),
        }
    }

    #[test]
    fn report_round_trips_exactly() {
        let report = sample_report();
        let mut buf = Vec::new();
        write_report(&report, &mut buf).unwrap();
        let parsed = parse_report(buf.as_slice()).unwrap();
        assert_eq!(parsed, report);
    }

    #[test]
    fn one_row_per_mode_and_cell() {
        let mut buf = Vec::new();
        write_report(&sample_report(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let data_rows = text.lines().skip(1).filter(|l| !l.starts_with('#')).count();
        assert_eq!(data_rows, 6);
    }

    #[test]
    fn numbers_carry_seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.5), "-2.5000000000000000e0");
        let v = 1.0 / 3.0;
        assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn empty_modes_are_rejected() {
        let spec = BenchSpec {
            modes: vec![],
            ..Default::default()
        };
        assert!(matches!(run_bench(&spec), Err(HarnessError::InvalidSpec(_))));
    }

    #[test]
    fn empty_grid_axis_is_rejected() {
        let mut spec = BenchSpec::default();
        spec.grid.seeds.clear();
        assert!(matches!(spec.validate(), Err(HarnessError::InvalidSpec(_))));
    }

    #[test]
    fn synchronized_cells_pair_persons_up() {
        let spec = BenchSpec::default();
        let cell = Cell {
            person_count: 5,
            pixel_noise: 0.0,
            synchronized: true,
        };
        assert_eq!(spec.scene_config(&cell, 1).synchronized_pose_groups, vec![vec![0, 1], vec![2, 3]]);
    }
}
