//! Restricted matching strategies used to measure what each ingredient of
//! [`pcm`] contributes.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::assignment::{hungarian, CostMatrix, MatchPair, MatchSet, Orientation};
use super::cost::reprojection_cost;
use super::opt_match::{opt_match, solve_for_pairs, OptMatchOutput};
use super::pcm::{finalize, initial_match, pcm, vote_over_frames, PcmOutput, PcmStats};
use super::tracks::{pair_is_usable, timeline_length, FrameView, PersonTrack2D, PersonTrack3D};
use super::{MatchError, PcmConfig};
use crate::geometry::{Extrinsics, Intrinsics};

/// Largest number of candidate pairings the exhaustive strategy will score
/// in one frame.
pub const EXHAUSTIVE_LIMIT: u128 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AblationMode {
    /// Key points only, every possible pairing scored per frame.
    #[serde(rename = "KPs")]
    KeyPointsExhaustive,
    /// Key points only, one random LiDAR person seeds the camera pose.
    #[serde(rename = "KP")]
    KeyPointsSingleSeed,
    /// Body pose only, one frame.
    #[serde(rename = "Pose")]
    Pose,
    /// Body pose and key points, one frame.
    #[serde(rename = "P&K")]
    PoseKeyPoints,
    /// Body pose over the whole sequence.
    #[serde(rename = "P&T")]
    PoseTemporal,
    /// The full sequence matcher.
    #[serde(rename = "P&T&K")]
    Full,
}

impl AblationMode {
    pub const ALL: [AblationMode; 6] = [
        AblationMode::KeyPointsExhaustive,
        AblationMode::KeyPointsSingleSeed,
        AblationMode::Pose,
        AblationMode::PoseKeyPoints,
        AblationMode::PoseTemporal,
        AblationMode::Full,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AblationMode::KeyPointsExhaustive => "KPs",
            AblationMode::KeyPointsSingleSeed => "KP",
            AblationMode::Pose => "Pose",
            AblationMode::PoseKeyPoints => "P&K",
            AblationMode::PoseTemporal => "P&T",
            AblationMode::Full => "P&T&K",
        }
    }
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for AblationMode {
    type Err = MatchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| !matches!(c, '&' | '-' | '_' | ' '))
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match norm.as_str() {
            "kps" => AblationMode::KeyPointsExhaustive,
            "kp" => AblationMode::KeyPointsSingleSeed,
            "pose" => AblationMode::Pose,
            "pk" => AblationMode::PoseKeyPoints,
            "pt" => AblationMode::PoseTemporal,
            "ptk" | "pcm" | "full" => AblationMode::Full,
            _ => {
                return Err(MatchError::InvalidConfig(format!(
                    "unknown mode {s:?}; expected one of KPs, KP, Pose, P&K, P&T, P&T&K"
                )))
            }
        })
    }
}

/// Runs the matching strategy `mode`. All strategies finish the same way as
/// [`pcm`]: per-frame camera poses for the chosen pairs, residual rejection
/// and smoothing.
pub fn ablation_match(
    mode: AblationMode,
    tracks3d: &[PersonTrack3D],
    tracks2d: &[PersonTrack2D],
    k: &Intrinsics,
    config: &PcmConfig,
) -> Result<PcmOutput, MatchError> {
    config.validate()?;
    let frames = timeline_length(tracks3d, tracks2d)?;
    match mode {
        AblationMode::Full => pcm(tracks3d, tracks2d, k, config),
        AblationMode::PoseTemporal => initial_match(tracks3d, tracks2d, k, config),
        AblationMode::Pose => {
            let Some(view) = reference_frame(tracks3d, tracks2d, frames) else {
                return Ok(finish(tracks3d, tracks2d, &[], k, config, PcmStats::default()));
            };
            Ok(finish(tracks3d, tracks2d, &single_frame_pose(&view), k, config, PcmStats::default()))
        }
        AblationMode::PoseKeyPoints => {
            let mut stats = PcmStats::default();
            let pairs = match reference_frame(tracks3d, tracks2d, frames) {
                None => Vec::new(),
                Some(view) => {
                    stats.frame_searches = 1;
                    match opt_match(&view, k, config) {
                        Ok(out) => {
                            stats.frames_voted = 1;
                            out.matches.pair_indices()
                        }
                        Err(_) => {
                            stats.frames_failed = 1;
                            Vec::new()
                        }
                    }
                }
            };
            Ok(finish(tracks3d, tracks2d, &pairs, k, config, stats))
        }
        AblationMode::KeyPointsSingleSeed => {
            let mut stats = PcmStats::default();
            let pairs = vote_over_frames(tracks3d, tracks2d, frames, k, config, &mut stats, |view| {
                single_seed(view, k, config)
            });
            Ok(finish(tracks3d, tracks2d, &pairs, k, config, stats))
        }
        AblationMode::KeyPointsExhaustive => {
            let mut stats = PcmStats::default();
            let pairs = vote_over_frames(tracks3d, tracks2d, frames, k, config, &mut stats, |view| {
                exhaustive(view, k, config)
            });
            Ok(finish(tracks3d, tracks2d, &pairs, k, config, stats))
        }
    }
}

fn finish(
    tracks3d: &[PersonTrack3D],
    tracks2d: &[PersonTrack2D],
    pairs: &[(usize, usize)],
    k: &Intrinsics,
    config: &PcmConfig,
    mut stats: PcmStats,
) -> PcmOutput {
    let (matches, _, extrinsics) = finalize(tracks3d, tracks2d, pairs, k, config, &mut stats);
    PcmOutput {
        matches,
        extrinsics,
        stats,
    }
}

/// Frame with the most persons matchable on both sides (then the most
/// persons overall), earliest on ties.
fn reference_frame<'a>(
    tracks3d: &'a [PersonTrack3D],
    tracks2d: &'a [PersonTrack2D],
    frames: usize,
) -> Option<FrameView<'a>> {
    let mut best: Option<(usize, usize, FrameView<'a>)> = None;
    for t in 0..frames {
        let view = FrameView::at(tracks3d, tracks2d, t);
        if view.is_empty() {
            continue;
        }
        let key = (
            view.persons3d.len().min(view.persons2d.len()),
            view.persons3d.len() + view.persons2d.len(),
        );
        if best.as_ref().is_none_or(|(a, b, _)| key > (*a, *b)) {
            best = Some((key.0, key.1, view));
        }
    }
    best.map(|(_, _, v)| v)
}

fn single_frame_pose(view: &FrameView<'_>) -> Vec<(usize, usize)> {
    let feats3: Vec<Vec<f64>> = view.persons3d.iter().map(|(_, o)| o.body_pose.local_feature()).collect();
    let feats2: Vec<Vec<f64>> = view.persons2d.iter().map(|(_, o)| o.body_pose.local_feature()).collect();
    let sim = DMatrix::from_fn(feats3.len(), feats2.len(), |a, b| {
        let dot: f64 = feats3[a].iter().zip(&feats2[b]).map(|(x, y)| x * y).sum();
        let na: f64 = feats3[a].iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = feats2[b].iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    });
    let m = hungarian(&CostMatrix::new(sim, Orientation::Maximize).expect("cosines are finite"));
    m.pair_indices()
        .into_iter()
        .map(|(a, b)| (view.persons3d[a].0, view.persons2d[b].0))
        .collect()
}

/// Packs a local pairing and its pose into the per-frame result type, with
/// the pairing's reprojection cost as (negated) score.
fn frame_result(
    view: &FrameView<'_>,
    pairs: &[(usize, usize)],
    residuals: &[f64],
    extrinsics: Extrinsics,
    config: &PcmConfig,
    k: &Intrinsics,
) -> OptMatchOutput {
    let threshold = config.reject_threshold_px(k);
    let score = -residuals.iter().sum::<f64>();
    let kept = pairs
        .iter()
        .zip(residuals)
        .filter(|(_, r)| **r <= threshold)
        .map(|(&(a, b), &r)| MatchPair {
            idx3d: view.persons3d[a].0,
            idx2d: view.persons2d[b].0,
            residual: r,
        })
        .collect();
    let domain3d: Vec<usize> = view.persons3d.iter().map(|(i, _)| *i).collect();
    let domain2d: Vec<usize> = view.persons2d.iter().map(|(j, _)| *j).collect();
    OptMatchOutput {
        matches: MatchSet::from_pairs(kept, &domain3d, &domain2d),
        extrinsics,
        score,
        proposal_pairs: pairs.len(),
        proposals: 1,
        score_trace: vec![score],
    }
}

/// One randomly chosen LiDAR person is tried against every camera person;
/// the camera pose of each attempt induces an assignment over everyone, and
/// the attempt with the lowest total reprojection cost wins.
fn single_seed(view: &FrameView<'_>, k: &Intrinsics, config: &PcmConfig) -> Result<OptMatchOutput, MatchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (view.frame as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let a = rng.random_range(0..view.persons3d.len());
    let seed3 = view.persons3d[a].1;
    let mut best: Option<(f64, Vec<(usize, usize)>, Vec<f64>, Extrinsics)> = None;
    for (_, o2) in &view.persons2d {
        if !pair_is_usable(seed3, o2) {
            continue;
        }
        let Ok(sol) = solve_for_pairs(&[(seed3, o2)], k, None) else {
            continue;
        };
        let costs = DMatrix::from_fn(view.persons3d.len(), view.persons2d.len(), |x, y| {
            reprojection_cost(view.persons3d[x].1, view.persons2d[y].1, &sol.extrinsics, k)
        });
        let pairs = hungarian(&CostMatrix::new(costs.clone(), Orientation::Minimize)?).pair_indices();
        let residuals: Vec<f64> = pairs.iter().map(|&(x, y)| costs[(x, y)]).collect();
        let total: f64 = residuals.iter().sum();
        if best.as_ref().is_none_or(|b| total < b.0) {
            best = Some((total, pairs, residuals, sol.extrinsics));
        }
    }
    let (_, pairs, residuals, extr) = best.ok_or(MatchError::NoViableProposal { frame: view.frame })?;
    Ok(frame_result(view, &pairs, &residuals, extr, config, k))
}

/// Number of partial injections between sets of size `n3` and `n2`:
/// sum over k of C(n3,k) C(n2,k) k!.
fn partial_injections(n3: usize, n2: usize) -> u128 {
    let mut total: u128 = 0;
    let mut term: u128 = 1; // k = 0
    for k in 0..=n3.min(n2) {
        if k > 0 {
            // C(n3,k)C(n2,k)k! = previous * (n3-k+1)(n2-k+1)/k
            term = term * (n3 - k + 1) as u128 * (n2 - k + 1) as u128 / k as u128;
        }
        total = total.saturating_add(term);
        if total > EXHAUSTIVE_LIMIT * 1000 {
            return total;
        }
    }
    total
}

/// Scores every partial pairing of the frame's persons by a camera pose
/// estimated from all of its pairs. The winner is the largest pairing whose
/// every pair reprojects within the rejection threshold, lowest total cost
/// among those.
fn exhaustive(view: &FrameView<'_>, k: &Intrinsics, config: &PcmConfig) -> Result<OptMatchOutput, MatchError> {
    let (n3, n2) = (view.persons3d.len(), view.persons2d.len());
    let candidates = partial_injections(n3, n2);
    if candidates > EXHAUSTIVE_LIMIT {
        return Err(MatchError::ExhaustiveSearchTooLarge {
            candidates,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let threshold = config.reject_threshold_px(k);
    let mut best: Option<(usize, f64, Vec<(usize, usize)>, Vec<f64>, Extrinsics)> = None;
    let mut used2 = vec![false; n2];
    let mut current: Vec<(usize, usize)> = Vec::new();
    let mut visit = |pairs: &[(usize, usize)]| {
        if pairs.is_empty() {
            return;
        }
        let obs: Vec<_> = pairs
            .iter()
            .map(|&(a, b)| (view.persons3d[a].1, view.persons2d[b].1))
            .collect();
        let Ok(sol) = solve_for_pairs(&obs, k, None) else {
            return;
        };
        let residuals: Vec<f64> = obs
            .iter()
            .map(|(o3, o2)| reprojection_cost(o3, o2, &sol.extrinsics, k))
            .collect();
        if residuals.iter().any(|r| *r > threshold) {
            return;
        }
        let total: f64 = residuals.iter().sum();
        let better = match &best {
            None => true,
            Some((size, cost, ..)) => pairs.len() > *size || (pairs.len() == *size && total < *cost),
        };
        if better {
            best = Some((pairs.len(), total, pairs.to_vec(), residuals, sol.extrinsics));
        }
    };
    enumerate(0, n3, &mut used2, &mut current, &mut visit);
    let (_, _, pairs, residuals, extr) = best.ok_or(MatchError::NoViableProposal { frame: view.frame })?;
    Ok(frame_result(view, &pairs, &residuals, extr, config, k))
}

/// Depth-first enumeration of partial injections: each LiDAR person is
/// either skipped or paired with an unused camera person.
fn enumerate(
    a: usize,
    n3: usize,
    used2: &mut [bool],
    current: &mut Vec<(usize, usize)>,
    visit: &mut dyn FnMut(&[(usize, usize)]),
) {
    if a == n3 {
        visit(current);
        return;
    }
    enumerate(a + 1, n3, used2, current, visit);
    for b in 0..used2.len() {
        if used2[b] {
            continue;
        }
        used2[b] = true;
        current.push((a, b));
        enumerate(a + 1, n3, used2, current, visit);
        current.pop();
        used2[b] = false;
    }
}
