//! Per-frame proposal-and-refine search over identity matchings.

use std::collections::HashMap;

use nalgebra::{DMatrix, Vector2, Vector3};

use super::assignment::{hungarian, CostMatrix, MatchPair, MatchSet, Orientation};
use super::cost::PoseCache;
use super::tracks::{jointly_valid, pair_is_usable, FrameView, Observation2D, Observation3D};
use super::{MatchError, PcmConfig};
use crate::geometry::{
    project_point, solve_pnp, solve_pnp_from, Extrinsics, GeometryError, Intrinsics, PnpSolution, ProjectionMatrix,
    MIN_DEPTH,
};

#[derive(Debug, Clone, PartialEq)]
pub struct OptMatchOutput {
    /// Indices refer to the track lists the [`FrameView`] was built from.
    pub matches: MatchSet,
    pub extrinsics: Extrinsics,
    /// Negated summed weighted cost of the winning proposal (higher is better).
    pub score: f64,
    /// Number of pairs in the winning proposal before rejection.
    pub proposal_pairs: usize,
    /// Distinct proposals produced by the seeds.
    pub proposals: usize,
    /// Best score seen so far after each evaluation, in evaluation order.
    pub score_trace: Vec<f64>,
}

/// PnP over every jointly valid joint of every listed pair, optionally
/// refined from a known nearby pose instead of a linear start.
pub(crate) fn solve_for_pairs(
    pairs: &[(&Observation3D, &Observation2D)],
    k: &Intrinsics,
    warm: Option<&Extrinsics>,
) -> Result<PnpSolution, GeometryError> {
    let mut world: Vec<Vector3<f64>> = Vec::new();
    let mut pixels: Vec<Vector2<f64>> = Vec::new();
    for (o3, o2) in pairs {
        for j in jointly_valid(o3, o2) {
            world.push(o3.joints[j]);
            pixels.push(o2.joints[j]);
        }
    }
    match warm {
        Some(initial) => solve_pnp_from(initial, &world, &pixels, k),
        None => solve_pnp(&world, &pixels, k),
    }
}

type Proposal = Vec<(usize, usize)>;

struct Frame<'v, 'a> {
    view: &'v FrameView<'a>,
    caches3d: Vec<PoseCache>,
    caches2d: Vec<PoseCache>,
    k: &'v Intrinsics,
    penalty: f64,
    /// `[3D][2D]`: the pair shares at least one valid joint.
    usable: DMatrix<bool>,
    /// `[2D person][joint]`: K times the root-relative joint, camera frame.
    skeletons2d: Vec<Vec<Vector3<f64>>>,
}

fn camera_skeletons(caches2d: &[PoseCache], k: &Intrinsics) -> Vec<Vec<Vector3<f64>>> {
    let km = k.matrix();
    caches2d.iter().map(|c| c.relative.iter().map(|b| km * (c.root * b)).collect()).collect()
}

impl Frame<'_, '_> {
    fn pnp(&self, proposal: &[(usize, usize)], warm: Option<&Extrinsics>) -> Result<PnpSolution, GeometryError> {
        let pairs: Vec<_> = proposal
            .iter()
            .map(|&(a, b)| (self.view.persons3d[a].1, self.view.persons2d[b].1))
            .collect();
        solve_for_pairs(&pairs, self.k, warm)
    }

    /// Reprojection (plus `lambda0` x body-pose) cost of every local pair.
    /// Same values as the pairwise cost functions; everything that depends
    /// on one side only is projected once.
    fn costs(&self, extr: &Extrinsics, lambda0: f64) -> DMatrix<f64> {
        let p = ProjectionMatrix::new(self.k, extr);
        let (n3, n2) = (self.view.persons3d.len(), self.view.persons2d.len());
        let project = |x: &Vector3<f64>| project_point(&p, x).ok();
        // outer None: joint missing from the scan; inner None: behind the camera
        let joints3d: Vec<Vec<Option<Option<Vector2<f64>>>>> = self
            .view
            .persons3d
            .iter()
            .map(|(_, o3)| o3.joints.iter().map(|x| x.iter().all(|v| v.is_finite()).then(|| project(x))).collect())
            .collect();
        let with_pose = lambda0 > 0.0;
        let skeletons3d: Vec<Vec<Option<Vector2<f64>>>> = if with_pose {
            self.view
                .persons3d
                .iter()
                .zip(&self.caches3d)
                .map(|((_, o3), c)| c.relative.iter().map(|a| project(&(o3.root() + c.root * a))).collect())
                .collect()
        } else {
            Vec::new()
        };
        // K(R x + t) of each LiDAR root; the camera skeleton hangs off it
        // as K(G rel), which does not depend on the pose
        let roots: Vec<Vector3<f64>> = if with_pose {
            self.view
                .persons3d
                .iter()
                .map(|(_, o3)| p.matrix() * o3.root().push(1.0))
                .collect()
        } else {
            Vec::new()
        };
        DMatrix::from_fn(n3, n2, |a, b| {
            let o2 = self.view.persons2d[b].1;
            if !self.usable[(a, b)] {
                return self.penalty * (1.0 + lambda0);
            }
            let mut num = 0.0;
            let mut den = 0.0;
            for ((q, u), &c) in joints3d[a].iter().zip(&o2.joints).zip(&o2.confidence) {
                let Some(q) = q.filter(|_| c > 0.0) else {
                    continue;
                };
                num += c * q.map_or(self.penalty, |q| (q - u).norm());
                den += c;
            }
            let mut cost = if den > 0.0 { num / den } else { self.penalty };
            if with_pose {
                let mut total = 0.0;
                for (qa, kb) in skeletons3d[a].iter().zip(&self.skeletons2d[b]) {
                    let h = roots[a] + kb;
                    total += match qa {
                        Some(ua) if h.z > MIN_DEPTH => (ua - Vector2::new(h.x / h.z, h.y / h.z)).norm(),
                        _ => self.penalty,
                    };
                }
                cost += lambda0 * (total / self.skeletons2d[b].len() as f64);
            }
            cost
        })
    }
}

fn assign(costs: &DMatrix<f64>) -> Proposal {
    // maximize the negated cost, as the search keeps everything as scores
    let scores = CostMatrix::new(-costs, Orientation::Maximize).expect("costs are finite");
    hungarian(&scores).pair_indices()
}

/// Searches one frame for the matching whose jointly estimated camera pose
/// explains the 2D detections best.
///
/// Every 3D/2D person pair seeds a camera pose from that pair alone; the
/// assignment that pose induces over all persons is a proposal. Each
/// proposal is then re-estimated from all of its pairs and re-assigned
/// under the weighted cost `config.n_iter` times, keeping the best-scoring
/// matching seen. Pairs whose reprojection error under the final pose
/// exceeds the rejection threshold are left unmatched.
pub fn opt_match(view: &FrameView<'_>, k: &Intrinsics, config: &PcmConfig) -> Result<OptMatchOutput, MatchError> {
    let (n3, n2) = (view.persons3d.len(), view.persons2d.len());
    if n3 == 0 || n2 == 0 {
        return Err(MatchError::NoViableProposal { frame: view.frame });
    }
    let frame = Frame {
        view,
        caches3d: view.persons3d.iter().map(|(_, o)| PoseCache::new(&o.body_pose)).collect(),
        caches2d: view.persons2d.iter().map(|(_, o)| PoseCache::new(&o.body_pose)).collect(),
        k,
        penalty: k.diagonal(),
        usable: DMatrix::from_fn(n3, n2, |a, b| pair_is_usable(view.persons3d[a].1, view.persons2d[b].1)),
        skeletons2d: Vec::new(),
    };
    let frame = Frame { skeletons2d: camera_skeletons(&frame.caches2d, k), ..frame };

    // each proposal keeps a seed pose that produced it as a warm start
    let mut proposals: Vec<(Proposal, Extrinsics, f64)> = Vec::new();
    for a in 0..n3 {
        for b in 0..n2 {
            if !frame.usable[(a, b)] {
                continue;
            }
            let Ok(seed) = frame.pnp(&[(a, b)], None) else {
                continue;
            };
            let proposal = assign(&frame.costs(&seed.extrinsics, 0.0));
            match proposals.iter_mut().find(|(p, _, _)| *p == proposal) {
                // the best-fitting seed is the safest warm start
                Some(entry) if seed.rms < entry.2 => {
                    entry.1 = seed.extrinsics;
                    entry.2 = seed.rms;
                }
                Some(_) => {}
                None => proposals.push((proposal, seed.extrinsics, seed.rms)),
            }
        }
    }
    if proposals.is_empty() {
        return Err(MatchError::NoViableProposal { frame: view.frame });
    }

    // refinement chains of different proposals merge quickly; evaluate each
    // matching once
    let mut evaluated: HashMap<Proposal, Option<(f64, Proposal, Extrinsics)>> = HashMap::new();
    let mut best: Option<(f64, Proposal)> = None;
    let mut score_trace = Vec::new();
    for (proposal, seed_pose, _) in &proposals {
        let mut current = proposal.clone();
        let mut warm = *seed_pose;
        for _ in 0..config.n_iter {
            let outcome = evaluated
                .entry(current.clone())
                .or_insert_with(|| {
                    let extr = frame.pnp(&current, Some(&warm)).ok()?.extrinsics;
                    let costs = frame.costs(&extr, config.lambda0);
                    let score = -current.iter().map(|&(a, b)| costs[(a, b)]).sum::<f64>();
                    Some((score, assign(&costs), extr))
                })
                .clone();
            let Some((score, next, extr)) = outcome else {
                break;
            };
            warm = extr;
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, current.clone()));
            }
            score_trace.push(best.as_ref().map_or(f64::NEG_INFINITY, |b| b.0));
            current = next;
        }
    }
    let Some((score, winner)) = best else {
        return Err(MatchError::NoViableProposal { frame: view.frame });
    };

    let threshold = config.reject_threshold_px(k);
    let mut extrinsics = frame.pnp(&winner, None)?.extrinsics;
    let residuals = frame.costs(&extrinsics, 0.0);
    let survivors: Proposal = winner
        .iter()
        .copied()
        .filter(|&(a, b)| residuals[(a, b)] <= threshold)
        .collect();
    if survivors.len() < winner.len() && !survivors.is_empty() {
        if let Ok(sol) = frame.pnp(&survivors, Some(&extrinsics)) {
            extrinsics = sol.extrinsics;
        }
    }
    let pairs = survivors
        .iter()
        .map(|&(a, b)| MatchPair {
            idx3d: view.persons3d[a].0,
            idx2d: view.persons2d[b].0,
            residual: residuals[(a, b)],
        })
        .collect();
    let domain3d: Vec<usize> = view.persons3d.iter().map(|(i, _)| *i).collect();
    let domain2d: Vec<usize> = view.persons2d.iter().map(|(j, _)| *j).collect();
    Ok(OptMatchOutput {
        matches: MatchSet::from_pairs(pairs, &domain3d, &domain2d),
        extrinsics,
        score,
        proposal_pairs: winner.len(),
        proposals: proposals.len(),
        score_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::cost::{body_pose_cost, reprojection_cost};
    use crate::simulator::{generate, SceneConfig};

    #[test]
    fn cost_matrix_agrees_with_pairwise_costs() {
        let scene = generate(&SceneConfig { person_count: 5, dropout_rate: 0.3, seed: 11, ..Default::default() }).unwrap();
        let k = scene.cameras[0].intrinsics;
        let extr = scene.truth.extrinsics[0][4];
        let view = FrameView::at(&scene.tracks3d, &scene.cameras[0].tracks, 4);
        let frame = Frame {
            view: &view,
            caches3d: view.persons3d.iter().map(|(_, o)| PoseCache::new(&o.body_pose)).collect(),
            caches2d: view.persons2d.iter().map(|(_, o)| PoseCache::new(&o.body_pose)).collect(),
            k: &k,
            penalty: k.diagonal(),
            usable: DMatrix::from_fn(view.persons3d.len(), view.persons2d.len(), |a, b| {
                pair_is_usable(view.persons3d[a].1, view.persons2d[b].1)
            }),
            skeletons2d: Vec::new(),
        };
        let frame = Frame { skeletons2d: camera_skeletons(&frame.caches2d, &k), ..frame };
        let m = frame.costs(&extr, 0.1);
        for (a, (_, o3)) in view.persons3d.iter().enumerate() {
            for (b, (_, o2)) in view.persons2d.iter().enumerate() {
                if !pair_is_usable(o3, o2) {
                    continue;
                }
                let want = reprojection_cost(o3, o2, &extr, &k)
                    + 0.1 * body_pose_cost(&o3.body_pose, &o2.body_pose, o3.root(), &extr, &k);
                // same terms, summed in a different order
                assert!((m[(a, b)] - want).abs() <= 1e-9 * want.max(1.0), "{} vs {want}", m[(a, b)]);
            }
        }
    }
}
