//! Sequence-level matching: pose similarity first, key points when the
//! implied camera motion says the pose-only answer is not trustworthy.

use log::{debug, warn};
use nalgebra::{DMatrix, Quaternion, UnitQuaternion, Vector3, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::assignment::{hungarian, CostMatrix, MatchPair, MatchSet, Orientation};
use super::cost::{pose_similarity, reprojection_cost};
use super::opt_match::{opt_match, solve_for_pairs, OptMatchOutput};
use super::tracks::{timeline_length, FrameView, PersonTrack2D, PersonTrack3D};
use super::{MatchError, PcmConfig};
use crate::geometry::{Extrinsics, Intrinsics};

/// Sentinel similarity for pairs never seen together; below any cosine.
const NO_OVERLAP: f64 = -2.0;

/// Counters describing what a matching run did.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PcmStats {
    /// Translation variance of the pose-only camera track, cm². Infinite
    /// when fewer than two frames produced a camera pose.
    pub variance_cm2: f64,
    pub gate_fired: bool,
    /// Frames handed to the per-frame search.
    pub frame_searches: usize,
    /// Frames whose per-frame search produced a matching.
    pub frames_voted: usize,
    /// Frames whose per-frame search failed.
    pub frames_failed: usize,
    /// Pairs removed for excessive reprojection error.
    pub rejected_pairs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcmOutput {
    pub matches: MatchSet,
    /// Smoothed per-frame camera pose; `None` where the matched persons
    /// did not constrain it.
    pub extrinsics: Vec<Option<Extrinsics>>,
    pub stats: PcmStats,
}

/// Sum of the per-axis sample variances of the translations (m²). Zero for
/// fewer than two entries.
pub fn variance_of_translations(extrinsics: &[Extrinsics]) -> f64 {
    let n = extrinsics.len();
    if n < 2 {
        return 0.0;
    }
    let mean = extrinsics.iter().map(|e| e.translation).sum::<Vector3<f64>>() / n as f64;
    extrinsics
        .iter()
        .map(|e| (e.translation - mean).norm_squared())
        .sum::<f64>()
        / (n - 1) as f64
}

/// Camera pose per frame estimated jointly from every listed pair present
/// in that frame.
pub fn per_frame_extrinsics(
    tracks3d: &[PersonTrack3D],
    tracks2d: &[PersonTrack2D],
    pairs: &[(usize, usize)],
    k: &Intrinsics,
    frames: usize,
) -> Vec<Option<Extrinsics>> {
    (0..frames)
        .map(|t| {
            let present: Vec<_> = pairs
                .iter()
                .filter_map(|&(i, j)| Some((tracks3d[i].at(t)?, tracks2d[j].at(t)?)))
                .collect();
            if present.is_empty() {
                return None;
            }
            solve_for_pairs(&present, k, None).ok().map(|s| s.extrinsics)
        })
        .collect()
}

/// Sliding median of the camera poses: per translation axis, and per
/// quaternion component after aligning signs with the centre frame. Frames
/// without a pose stay without one and do not contribute.
pub fn smooth_extrinsics(extrinsics: &[Option<Extrinsics>], window: usize) -> Vec<Option<Extrinsics>> {
    let half = window / 2;
    let quats: Vec<Option<Vector4<f64>>> = extrinsics
        .iter()
        .map(|e| e.as_ref().map(|e| e.quaternion().into_inner().coords))
        .collect();
    (0..extrinsics.len())
        .map(|t| {
            let centre = quats[t]?;
            let lo = t.saturating_sub(half);
            let hi = (t + half).min(extrinsics.len() - 1);
            let mut q_samples: [Vec<f64>; 4] = Default::default();
            let mut t_samples: [Vec<f64>; 3] = Default::default();
            for s in lo..=hi {
                let (Some(e), Some(q)) = (&extrinsics[s], quats[s]) else {
                    continue;
                };
                let q = if q.dot(&centre) < 0.0 { -q } else { q };
                for c in 0..4 {
                    q_samples[c].push(q[c]);
                }
                for c in 0..3 {
                    t_samples[c].push(e.translation[c]);
                }
            }
            let q = Vector4::from_fn(|c, _| median(&mut q_samples[c]));
            let translation = Vector3::from_fn(|c, _| median(&mut t_samples[c]));
            // coords are stored (i, j, k, w)
            let rotation = UnitQuaternion::from_quaternion(Quaternion::new(q[3], q[0], q[1], q[2]));
            Some(Extrinsics::from_quaternion(&rotation, translation))
        })
        .collect()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Turns a candidate pairing into the final result: per-frame camera
/// poses, mean reprojection residual per pair, rejection of pairs above the
/// threshold (with the poses re-estimated without them), and smoothing.
/// Also returns the unsmoothed poses.
pub(crate) fn finalize(
    tracks3d: &[PersonTrack3D],
    tracks2d: &[PersonTrack2D],
    pairs: &[(usize, usize)],
    k: &Intrinsics,
    config: &PcmConfig,
    stats: &mut PcmStats,
) -> (MatchSet, Vec<Option<Extrinsics>>, Vec<Option<Extrinsics>>) {
    let frames = timeline_length(tracks3d, tracks2d).unwrap_or(0);
    let threshold = config.reject_threshold_px(k);
    let residual_of = |&(i, j): &(usize, usize), extr: &[Option<Extrinsics>]| {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (t, e) in extr.iter().enumerate() {
            if let (Some(e), Some(o3), Some(o2)) = (e, tracks3d[i].at(t), tracks2d[j].at(t)) {
                sum += reprojection_cost(o3, o2, e, k);
                n += 1;
            }
        }
        if n == 0 {
            k.diagonal()
        } else {
            sum / n as f64
        }
    };

    let mut raw = per_frame_extrinsics(tracks3d, tracks2d, pairs, k, frames);
    let kept: Vec<(usize, usize)> = pairs
        .iter()
        .copied()
        .filter(|p| residual_of(p, &raw) <= threshold)
        .collect();
    if kept.len() < pairs.len() {
        stats.rejected_pairs += pairs.len() - kept.len();
        raw = per_frame_extrinsics(tracks3d, tracks2d, &kept, k, frames);
    }
    let matched = kept
        .iter()
        .map(|p| MatchPair {
            idx3d: p.0,
            idx2d: p.1,
            residual: residual_of(p, &raw),
        })
        .collect();
    let domain3d: Vec<usize> = (0..tracks3d.len()).collect();
    let domain2d: Vec<usize> = (0..tracks2d.len()).collect();
    let smoothed = smooth_extrinsics(&raw, config.smoothing_window);
    (MatchSet::from_pairs(matched, &domain3d, &domain2d), raw, smoothed)
}

fn check_inputs(
    tracks3d: &[PersonTrack3D],
    tracks2d: &[PersonTrack2D],
    config: &PcmConfig,
) -> Result<usize, MatchError> {
    config.validate()?;
    timeline_length(tracks3d, tracks2d)
}

fn translation_variance_cm2(raw: &[Option<Extrinsics>]) -> f64 {
    let present: Vec<Extrinsics> = raw.iter().flatten().cloned().collect();
    if present.len() < 2 {
        // no temporal evidence for the pose-only answer
        return f64::INFINITY;
    }
    variance_of_translations(&present) * 1e4
}

/// Pose-only sequence match: assignment on mean body-pose similarity, then
/// per-frame camera poses and residual rejection.
pub fn initial_match(
    tracks3d: &[PersonTrack3D],
    tracks2d: &[PersonTrack2D],
    k: &Intrinsics,
    config: &PcmConfig,
) -> Result<PcmOutput, MatchError> {
    check_inputs(tracks3d, tracks2d, config)?;
    let sim = DMatrix::from_fn(tracks3d.len(), tracks2d.len(), |i, j| {
        pose_similarity(&tracks3d[i], &tracks2d[j]).unwrap_or(NO_OVERLAP)
    });
    let assignment = hungarian(&CostMatrix::new(sim.clone(), Orientation::Maximize)?);
    let pairs: Vec<(usize, usize)> = assignment
        .pair_indices()
        .into_iter()
        .filter(|&(i, j)| sim[(i, j)] > NO_OVERLAP)
        .collect();
    let mut stats = PcmStats::default();
    let (matches, raw, extrinsics) = finalize(tracks3d, tracks2d, &pairs, k, config, &mut stats);
    stats.variance_cm2 = translation_variance_cm2(&raw);
    Ok(PcmOutput {
        matches,
        extrinsics,
        stats,
    })
}

/// Weight of one frame's vote: 1 for a perfect fit, 1/2 when the mean pair
/// cost equals the rejection threshold.
fn vote_weight(out: &OptMatchOutput, threshold: f64) -> f64 {
    let mean_cost = -out.score / out.proposal_pairs.max(1) as f64;
    1.0 / (1.0 + mean_cost.max(0.0) / threshold)
}

/// Accumulates per-frame matchings into a vote matrix and assigns on it.
/// Pairs that never received a vote are not matched.
pub(crate) fn vote(
    n3: usize,
    n2: usize,
    frame_results: impl IntoIterator<Item = (OptMatchOutput, f64)>,
) -> Vec<(usize, usize)> {
    let mut q = DMatrix::zeros(n3, n2);
    for (out, weight) in frame_results {
        for p in &out.matches.pairs {
            q[(p.idx3d, p.idx2d)] += weight;
        }
    }
    let Ok(cm) = CostMatrix::new(q.clone(), Orientation::Maximize) else {
        return Vec::new();
    };
    hungarian(&cm)
        .pair_indices()
        .into_iter()
        .filter(|&(i, j)| q[(i, j)] > 0.0)
        .collect()
}

/// Runs `search` on every frame in parallel and votes over the results in
/// frame order.
pub(crate) fn vote_over_frames<F>(
    tracks3d: &[PersonTrack3D],
    tracks2d: &[PersonTrack2D],
    frames: usize,
    k: &Intrinsics,
    config: &PcmConfig,
    stats: &mut PcmStats,
    search: F,
) -> Vec<(usize, usize)>
where
    F: Fn(&FrameView<'_>) -> Result<OptMatchOutput, MatchError> + Sync,
{
    let threshold = config.reject_threshold_px(k);
    let results: Vec<Option<Result<OptMatchOutput, MatchError>>> = (0..frames)
        .into_par_iter()
        .map(|t| {
            let view = FrameView::at(tracks3d, tracks2d, t);
            (!view.is_empty()).then(|| search(&view))
        })
        .collect();
    let mut votes = Vec::new();
    for (t, r) in results.into_iter().enumerate() {
        let Some(r) = r else { continue };
        stats.frame_searches += 1;
        match r {
            Ok(out) => {
                stats.frames_voted += 1;
                let w = vote_weight(&out, threshold);
                votes.push((out, w));
            }
            Err(e) => {
                stats.frames_failed += 1;
                debug!("frame {t} skipped: {e}");
            }
        }
    }
    vote(tracks3d.len(), tracks2d.len(), votes)
}

/// Full sequence matcher.
///
/// Starts from the pose-only match. If the camera translations it implies
/// vary by more than `config.delta` (cm²) over the sequence, every frame is
/// searched independently with [`opt_match`], the per-frame winners vote
/// (each frame's vote weighted by how well its matching fits), and the vote
/// matrix is assigned. The camera poses of the returned match are
/// median-smoothed.
pub fn pcm(
    tracks3d: &[PersonTrack3D],
    tracks2d: &[PersonTrack2D],
    k: &Intrinsics,
    config: &PcmConfig,
) -> Result<PcmOutput, MatchError> {
    let frames = check_inputs(tracks3d, tracks2d, config)?;
    let init = initial_match(tracks3d, tracks2d, k, config)?;
    let v = init.stats.variance_cm2;
    if !(v > config.delta) {
        return Ok(init);
    }
    let mut stats = PcmStats {
        variance_cm2: v,
        gate_fired: true,
        ..Default::default()
    };
    let pairs = vote_over_frames(tracks3d, tracks2d, frames, k, config, &mut stats, |view| {
        opt_match(view, k, config)
    });
    if stats.frames_voted == 0 && stats.frame_searches > 0 {
        warn!("per-frame search failed on every frame; no pairs matched");
    }
    let (matches, _, extrinsics) = finalize(tracks3d, tracks2d, &pairs, k, config, &mut stats);
    Ok(PcmOutput {
        matches,
        extrinsics,
        stats,
    })
}
