//! Perspective-n-point: linear initialization (normalized DLT, or a plane
//! homography when the object points are coplanar) followed by damped
//! Gauss-Newton on rotation + translation.

use nalgebra::{DMatrix, Matrix3, Matrix3x4, Matrix6, Vector2, Vector3, Vector6};

use super::camera::{Extrinsics, Intrinsics, MIN_DEPTH};
use super::rotation::{nearest_rotation, rotation_from_scaled_axis};
use super::GeometryError;

pub const PNP_MIN_CORRESPONDENCES: usize = 6;
/// Coplanar object points need more support for the homography start.
const PNP_MIN_COPLANAR: usize = 8;
pub const PNP_MAX_ITERATIONS: usize = 100;
const PLANARITY_TOLERANCE: f64 = 1e-6;
const RELATIVE_DECREASE_TOLERANCE: f64 = 1e-10;
const INITIAL_DAMPING: f64 = 1e-3;
const MAX_DAMPING: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct PnpSolution {
    pub extrinsics: Extrinsics,
    /// Root-mean-square of the residual components (x and y separately),
    /// pixels, so it is directly comparable with a per-axis noise sigma.
    pub rms: f64,
    /// Number of damped steps attempted (accepted or not).
    pub iterations: usize,
    /// Summed squared reprojection error: the initial value, then one entry
    /// per accepted step.
    pub objective_trace: Vec<f64>,
    /// Correspondences that survived validity filtering.
    pub used: usize,
}

fn valid_pairs(
    points3d: &[Vector3<f64>],
    points2d: &[Vector2<f64>],
) -> Result<(Vec<Vector3<f64>>, Vec<Vector2<f64>>), GeometryError> {
    if points3d.len() != points2d.len() {
        return Err(GeometryError::DegenerateConfiguration(format!(
            "{} object points but {} image points",
            points3d.len(),
            points2d.len()
        )));
    }
    let (world, pixels): (Vec<Vector3<f64>>, Vec<Vector2<f64>>) = points3d
        .iter()
        .zip(points2d)
        .filter(|(x, u)| x.iter().all(|v| v.is_finite()) && u.iter().all(|v| v.is_finite()))
        .map(|(x, u)| (*x, *u))
        .unzip();
    if world.len() < PNP_MIN_CORRESPONDENCES {
        return Err(GeometryError::InsufficientCorrespondences {
            found: world.len(),
            required: PNP_MIN_CORRESPONDENCES,
        });
    }
    Ok((world, pixels))
}

/// Like [`solve_pnp`], but skips the linear initialization and refines
/// from `initial`. Falls back to the full solver when `initial` leaves most
/// points behind the camera or the refinement does not converge from it.
pub fn solve_pnp_from(
    initial: &Extrinsics,
    points3d: &[Vector3<f64>],
    points2d: &[Vector2<f64>],
    k: &Intrinsics,
) -> Result<PnpSolution, GeometryError> {
    let (world, pixels) = valid_pairs(points3d, points2d)?;
    if 2 * in_front(initial, &world) < world.len() {
        return solve_pnp(points3d, points2d, k);
    }
    refine(*initial, &world, &pixels, k).or_else(|_| solve_pnp(points3d, points2d, k))
}

/// Estimates world-to-camera extrinsics from 3D/2D correspondences (pixels).
/// Pairs with non-finite coordinates are dropped before anything else.
pub fn solve_pnp(
    points3d: &[Vector3<f64>],
    points2d: &[Vector2<f64>],
    k: &Intrinsics,
) -> Result<PnpSolution, GeometryError> {
    let (world, pixels) = valid_pairs(points3d, points2d)?;
    let n = world.len();

    let layout = point_layout(&world);
    if layout.spread[1] < PLANARITY_TOLERANCE {
        return Err(GeometryError::DegenerateConfiguration(
            "object points are collinear".into(),
        ));
    }
    let normalized: Vec<Vector2<f64>> = pixels.iter().map(|u| k.normalize(u)).collect();
    let initial = if layout.spread[2] < PLANARITY_TOLERANCE {
        if n < PNP_MIN_COPLANAR {
            return Err(GeometryError::DegenerateConfiguration(format!(
                "coplanar object points need at least {PNP_MIN_COPLANAR} correspondences, got {n}"
            )));
        }
        homography_initialization(&world, &normalized, &layout)?
    } else {
        dlt_initialization(&world, &normalized)?
    };
    if 2 * in_front(&initial, &world) >= n {
        return refine(initial, &world, &pixels, k);
    }
    // The linear start failed cheirality (noisy points with little depth
    // relief). Restart from the axis-aligned rotations instead, each with
    // its least-squares translation, and keep the best refined result.
    let mut starts: Vec<(f64, Extrinsics)> = axis_aligned_rotations()
        .into_iter()
        .filter_map(|rotation| {
            let translation = translation_for_rotation(&rotation, &world, &normalized).ok()?;
            let e = Extrinsics {
                rotation,
                translation,
            };
            (2 * in_front(&e, &world) >= n).then(|| (normalized_cost(&e, &world, &normalized), e))
        })
        .collect();
    starts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best: Option<PnpSolution> = None;
    let mut last_error = None;
    for (_, start) in starts.into_iter().take(FALLBACK_STARTS) {
        match refine(start, &world, &pixels, k) {
            Ok(sol) => {
                if best.as_ref().is_none_or(|b| sol.rms < b.rms) {
                    best = Some(sol);
                }
            }
            Err(e) => last_error = Some(e),
        }
    }
    best.ok_or_else(|| {
        last_error.unwrap_or_else(|| {
            GeometryError::DegenerateConfiguration("no initialization puts the points in front of the camera".into())
        })
    })
}

const FALLBACK_STARTS: usize = 4;

fn in_front(e: &Extrinsics, world: &[Vector3<f64>]) -> usize {
    world.iter().filter(|x| e.transform_point(x).z > MIN_DEPTH).count()
}

/// The 24 rotations that map coordinate axes onto coordinate axes.
fn axis_aligned_rotations() -> Vec<Matrix3<f64>> {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(24);
    for perm in perms {
        for signs in 0..8u32 {
            let mut m = Matrix3::zeros();
            for (row, &col) in perm.iter().enumerate() {
                m[(row, col)] = if signs & (1 << row) != 0 { -1.0 } else { 1.0 };
            }
            if m.determinant() > 0.0 {
                out.push(m);
            }
        }
    }
    out
}

struct PointLayout {
    centroid: Vector3<f64>,
    /// Principal axes, strongest first, forming a right-handed frame.
    axes: Matrix3<f64>,
    /// RMS extent along each principal axis.
    spread: [f64; 3],
}

fn point_layout(points: &[Vector3<f64>]) -> PointLayout {
    let n = points.len() as f64;
    let centroid = points.iter().sum::<Vector3<f64>>() / n;
    let mut scatter = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        scatter += d * d.transpose();
    }
    let eig = scatter.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let e1 = eig.eigenvectors.column(order[0]).into_owned();
    let e2 = eig.eigenvectors.column(order[1]).into_owned();
    let e3 = e1.cross(&e2);
    let spread = order.map(|i| (eig.eigenvalues[i].max(0.0) / n).sqrt());
    PointLayout {
        centroid,
        axes: Matrix3::from_columns(&[e1, e2, e3]),
        spread,
    }
}

/// Similarity that moves the centroid to the origin and sets the mean
/// distance from it to `sqrt(dim)`. Returns (scale, centroid).
fn hartley<const D: usize>(points: impl Iterator<Item = nalgebra::SVector<f64, D>> + Clone) -> (f64, nalgebra::SVector<f64, D>) {
    let count = points.clone().count() as f64;
    let centroid = points.clone().sum::<nalgebra::SVector<f64, D>>() / count;
    let mean_dist = points.map(|p| (p - centroid).norm()).sum::<f64>() / count;
    let scale = if mean_dist > 0.0 {
        (D as f64).sqrt() / mean_dist
    } else {
        1.0
    };
    (scale, centroid)
}

/// Right singular vector of the smallest singular value, after checking the
/// null space is one-dimensional.
fn null_vector(a: DMatrix<f64>) -> Result<Vec<f64>, GeometryError> {
    let cols = a.ncols();
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested v_t");
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    let largest = sv[order[0]];
    let second_smallest = sv[order[order.len() - 2]];
    if !(largest > 0.0) || second_smallest / largest < 1e-12 {
        return Err(GeometryError::DegenerateConfiguration(
            "linear system has a multi-dimensional null space".into(),
        ));
    }
    let row = order[order.len() - 1];
    Ok((0..cols).map(|c| v_t[(row, c)]).collect())
}

/// DLT on normalized image coordinates, so the recovered matrix is a scaled
/// `[R | t]`.
fn dlt_initialization(world: &[Vector3<f64>], image: &[Vector2<f64>]) -> Result<Extrinsics, GeometryError> {
    let n = world.len();
    let (s3, c3) = hartley(world.iter().copied());
    let (s2, c2) = hartley(image.iter().copied());

    let mut a = DMatrix::zeros(2 * n, 12);
    for i in 0..n {
        let x = (world[i] - c3) * s3;
        let u = (image[i] - c2) * s2;
        let xh = [x.x, x.y, x.z, 1.0];
        for j in 0..4 {
            a[(2 * i, j)] = xh[j];
            a[(2 * i, 8 + j)] = -u.x * xh[j];
            a[(2 * i + 1, 4 + j)] = xh[j];
            a[(2 * i + 1, 8 + j)] = -u.y * xh[j];
        }
    }
    let v = null_vector(a)?;
    let normalized_p = Matrix3x4::from_row_slice(&v);

    let mut t3 = nalgebra::Matrix4::identity() * s3;
    t3[(3, 3)] = 1.0;
    t3.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-c3 * s3));
    let mut t2_inv = Matrix3::identity() / s2;
    t2_inv[(2, 2)] = 1.0;
    t2_inv.fixed_view_mut::<2, 1>(0, 2).copy_from(&c2);

    let p = t2_inv * normalized_p * t3;
    // With noise and little depth relief the rotation block can be close to
    // singular, so neither its determinant nor its scale is trustworthy.
    // Both signs are tried, the translation is re-solved for each projected
    // rotation, and the candidate that reprojects best wins.
    let left = p.fixed_view::<3, 3>(0, 0).into_owned();
    let sv = left.singular_values();
    if !(sv.max() > 0.0) || !sv.max().is_finite() {
        return Err(GeometryError::DegenerateConfiguration(
            "DLT produced a singular rotation block".into(),
        ));
    }
    let mut best: Option<(f64, Extrinsics)> = None;
    for block in [left, -left] {
        let rotation = nearest_rotation(&block);
        let Ok(translation) = translation_for_rotation(&rotation, world, image) else {
            continue;
        };
        let candidate = Extrinsics {
            rotation,
            translation,
        };
        let cost = normalized_cost(&candidate, world, image);
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, candidate));
        }
    }
    best.map(|(_, e)| e).ok_or_else(|| {
        GeometryError::DegenerateConfiguration("translation is not determined".into())
    })
}

/// Squared reprojection error in normalized coordinates; points without
/// positive depth count as a unit-squared miss each.
fn normalized_cost(e: &Extrinsics, world: &[Vector3<f64>], image: &[Vector2<f64>]) -> f64 {
    world
        .iter()
        .zip(image)
        .map(|(x, u)| {
            let c = e.transform_point(x);
            if c.z > MIN_DEPTH {
                (Vector2::new(c.x / c.z, c.y / c.z) - u).norm_squared()
            } else {
                1.0
            }
        })
        .sum()
}

/// Least-squares translation for a fixed rotation: each correspondence
/// gives two equations linear in t.
fn translation_for_rotation(
    rotation: &Matrix3<f64>,
    world: &[Vector3<f64>],
    image: &[Vector2<f64>],
) -> Result<Vector3<f64>, GeometryError> {
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for (x, u) in world.iter().zip(image) {
        let rx = rotation * x;
        // u.x (rx.z + tz) - (rx.x + tx) = 0, same for y
        let rows = [
            (Vector3::new(-1.0, 0.0, u.x), rx.x - u.x * rx.z),
            (Vector3::new(0.0, -1.0, u.y), rx.y - u.y * rx.z),
        ];
        for (a, b) in rows {
            ata += a * a.transpose();
            atb += a * b;
        }
    }
    ata.cholesky().map(|c| c.solve(&atb)).ok_or_else(|| {
        GeometryError::DegenerateConfiguration("translation is not determined".into())
    })
}

/// Plane-induced homography start for coplanar object points.
fn homography_initialization(
    world: &[Vector3<f64>],
    image: &[Vector2<f64>],
    layout: &PointLayout,
) -> Result<Extrinsics, GeometryError> {
    let n = world.len();
    let plane: Vec<Vector2<f64>> = world
        .iter()
        .map(|x| {
            let d = layout.axes.transpose() * (x - layout.centroid);
            Vector2::new(d.x, d.y)
        })
        .collect();
    let (sp, cp) = hartley(plane.iter().copied());
    let (si, ci) = hartley(image.iter().copied());

    let mut a = DMatrix::zeros(2 * n, 9);
    for i in 0..n {
        let q = (plane[i] - cp) * sp;
        let u = (image[i] - ci) * si;
        let qh = [q.x, q.y, 1.0];
        for j in 0..3 {
            a[(2 * i, j)] = qh[j];
            a[(2 * i, 6 + j)] = -u.x * qh[j];
            a[(2 * i + 1, 3 + j)] = qh[j];
            a[(2 * i + 1, 6 + j)] = -u.y * qh[j];
        }
    }
    let v = null_vector(a)?;
    let hn = Matrix3::from_row_slice(&v);
    let tp = Matrix3::new(sp, 0.0, -sp * cp.x, 0.0, sp, -sp * cp.y, 0.0, 0.0, 1.0);
    let ti_inv = Matrix3::new(1.0 / si, 0.0, ci.x, 0.0, 1.0 / si, ci.y, 0.0, 0.0, 1.0);
    let mut h = ti_inv * hn * tp;

    let scale = 0.5 * (h.column(0).norm() + h.column(1).norm());
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(GeometryError::DegenerateConfiguration(
            "degenerate plane homography".into(),
        ));
    }
    // plane origin is the centroid, whose depth is the last entry of t
    if h[(2, 2)] < 0.0 {
        h = -h;
    }
    let r1 = h.column(0) / scale;
    let r2 = h.column(1) / scale;
    let plane_rotation = nearest_rotation(&Matrix3::from_columns(&[r1, r2, r1.cross(&r2)]));
    let plane_translation = h.column(2) / scale;

    // x_cam = Rp Bᵀ (x - c) + tp
    let rotation = plane_rotation * layout.axes.transpose();
    let translation = plane_translation - rotation * layout.centroid;
    Ok(Extrinsics {
        rotation,
        translation,
    })
}

struct Residuals<'a> {
    world: &'a [Vector3<f64>],
    pixels: &'a [Vector2<f64>],
    k: &'a Intrinsics,
    penalty: f64,
}

impl Residuals<'_> {
    fn cost(&self, e: &Extrinsics) -> f64 {
        self.world
            .iter()
            .zip(self.pixels)
            .map(|(x, u)| {
                let c = e.transform_point(x);
                if c.z > MIN_DEPTH {
                    let du = self.k.fx * c.x / c.z + self.k.cx - u.x;
                    let dv = self.k.fy * c.y / c.z + self.k.cy - u.y;
                    du * du + dv * dv
                } else {
                    self.penalty * self.penalty
                }
            })
            .sum()
    }

    /// Gauss-Newton normal equations for a left perturbation
    /// `R <- exp(w) R`, `t <- t + dt`, parameters ordered (w, dt).
    fn normal_equations(&self, e: &Extrinsics) -> (Matrix6<f64>, Vector6<f64>) {
        let mut jtj = Matrix6::zeros();
        let mut jtr = Vector6::zeros();
        for (x, u) in self.world.iter().zip(self.pixels) {
            let rx = e.rotation * x;
            let c = rx + e.translation;
            if c.z <= MIN_DEPTH {
                continue;
            }
            let iz = 1.0 / c.z;
            let r = Vector2::new(
                self.k.fx * c.x * iz + self.k.cx - u.x,
                self.k.fy * c.y * iz + self.k.cy - u.y,
            );
            // d(pixel)/d(camera point)
            let dpu = Vector3::new(self.k.fx * iz, 0.0, -self.k.fx * c.x * iz * iz);
            let dpv = Vector3::new(0.0, self.k.fy * iz, -self.k.fy * c.y * iz * iz);
            // g·(-[a]x) = a × g for the rotation block
            let (wu, wv) = (rx.cross(&dpu), rx.cross(&dpv));
            let ju = [wu.x, wu.y, wu.z, dpu.x, dpu.y, dpu.z];
            let jv = [wv.x, wv.y, wv.z, dpv.x, dpv.y, dpv.z];
            // upper triangle only, mirrored below
            for i in 0..6 {
                for j in i..6 {
                    jtj[(i, j)] += ju[i] * ju[j] + jv[i] * jv[j];
                }
                jtr[i] += ju[i] * r.x + jv[i] * r.y;
            }
        }
        for i in 0..6 {
            for j in 0..i {
                jtj[(i, j)] = jtj[(j, i)];
            }
        }
        (jtj, jtr)
    }
}

fn apply_step(e: &Extrinsics, step: &Vector6<f64>) -> Extrinsics {
    let w = Vector3::new(step[0], step[1], step[2]);
    let dt = Vector3::new(step[3], step[4], step[5]);
    Extrinsics {
        rotation: rotation_from_scaled_axis(&w) * e.rotation,
        translation: e.translation + dt,
    }
}

fn refine(
    initial: Extrinsics,
    world: &[Vector3<f64>],
    pixels: &[Vector2<f64>],
    k: &Intrinsics,
) -> Result<PnpSolution, GeometryError> {
    let problem = Residuals {
        world,
        pixels,
        k,
        penalty: k.diagonal(),
    };
    let n = world.len();
    let mut current = initial;
    let mut cost = problem.cost(&current);
    let mut trace = vec![cost];
    let mut lambda = INITIAL_DAMPING;
    let mut iterations = 0;
    let mut converged = cost <= f64::MIN_POSITIVE;

    // only recomputed after an accepted step; a rejected one leaves the pose
    let (mut jtj, mut jtr) = problem.normal_equations(&current);
    let eig = jtj.symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(hi > 0.0) || lo / hi < 1e-15 {
        return Err(GeometryError::DegenerateConfiguration(
            "rank-deficient normal equations".into(),
        ));
    }

    while !converged && iterations < PNP_MAX_ITERATIONS {
        iterations += 1;
        let mut damped = jtj;
        let floor = 1e-12 * jtj.diagonal().max();
        for i in 0..6 {
            damped[(i, i)] += lambda * jtj[(i, i)].max(floor);
        }
        let Some(chol) = damped.cholesky() else {
            lambda *= 10.0;
            if lambda > MAX_DAMPING {
                converged = true;
            }
            continue;
        };
        let step = -chol.solve(&jtr);
        let candidate = apply_step(&current, &step);
        let candidate_cost = problem.cost(&candidate);
        if candidate_cost < cost {
            let relative = (cost - candidate_cost) / cost;
            current = candidate;
            cost = candidate_cost;
            trace.push(cost);
            lambda = (lambda * 0.1).max(1e-15);
            if relative < RELATIVE_DECREASE_TOLERANCE || cost <= f64::MIN_POSITIVE {
                converged = true;
            } else {
                (jtj, jtr) = problem.normal_equations(&current);
            }
        } else {
            lambda *= 10.0;
            // no descent direction left at working precision
            if lambda > MAX_DAMPING {
                converged = true;
            }
        }
    }

    let rms = (cost / (2 * n) as f64).sqrt();
    if !converged {
        return Err(GeometryError::NoConvergence { iterations, rms });
    }
    current.rotation = nearest_rotation(&current.rotation);
    Ok(PnpSolution {
        extrinsics: current,
        rms,
        iterations,
        objective_trace: trace,
        used: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{geodesic_rotation_error, project, ProjectionMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn camera() -> Intrinsics {
        Intrinsics::new(900.0, 900.0, 640.0, 360.0, 1280.0, 720.0).unwrap()
    }

    fn random_pose(rng: &mut ChaCha8Rng) -> Extrinsics {
        let w = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ) * rng.random_range(0.0..std::f64::consts::PI);
        let r = rotation_from_scaled_axis(&w);
        // keep a cloud around the origin in front of the camera
        let t = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(4.0..12.0));
        Extrinsics::new(r, t).unwrap()
    }

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|_| Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn identity_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let k = camera();
        let pts: Vec<_> = random_cloud(&mut rng, 24).into_iter().map(|p| p + Vector3::new(0.0, 0.0, 6.0)).collect();
        let px = project(&ProjectionMatrix::new(&k, &Extrinsics::identity()), &pts).unwrap();
        let sol = solve_pnp(&pts, &px, &k).unwrap();
        assert!(geodesic_rotation_error(&sol.extrinsics.rotation, &Matrix3::identity()) < 1e-6);
        assert!(sol.extrinsics.translation.norm() < 1e-6);
    }

    #[test]
    fn exact_inverse_on_noiseless_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let k = camera();
        for _ in 0..50 {
            let truth = random_pose(&mut rng);
            let pts = random_cloud(&mut rng, 24);
            let px = project(&ProjectionMatrix::new(&k, &truth), &pts).unwrap();
            let sol = solve_pnp(&pts, &px, &k).unwrap();
            assert!(geodesic_rotation_error(&sol.extrinsics.rotation, &truth.rotation) < 1e-4);
            assert!((sol.extrinsics.translation - truth.translation).norm() < 1e-4);
        }
    }

    #[test]
    fn noisy_residual_is_bounded_and_trace_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let k = camera();
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let truth = random_pose(&mut rng);
            let pts = random_cloud(&mut rng, 24);
            let px: Vec<_> = project(&ProjectionMatrix::new(&k, &truth), &pts)
                .unwrap()
                .into_iter()
                .map(|u| u + Vector2::new(noise.sample(&mut rng), noise.sample(&mut rng)))
                .collect();
            let sol = solve_pnp(&pts, &px, &k).unwrap();
            worst = worst.max(sol.rms);
            for w in sol.objective_trace.windows(2) {
                assert!(w[1] <= w[0]);
            }
        }
        assert!(worst <= 1.5, "worst rms {worst}");
    }

    #[test]
    fn coplanar_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let k = camera();
        for _ in 0..20 {
            let truth = random_pose(&mut rng);
            let tilt = rotation_from_scaled_axis(&Vector3::new(0.3, -0.2, 0.5));
            let pts: Vec<_> = (0..10)
                .map(|_| tilt * Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0))
                .collect();
            let Ok(px) = project(&ProjectionMatrix::new(&k, &truth), &pts) else { continue };
            let sol = solve_pnp(&pts, &px, &k).unwrap();
            assert!(geodesic_rotation_error(&sol.extrinsics.rotation, &truth.rotation) < 1e-4);
            assert!((sol.extrinsics.translation - truth.translation).norm() < 1e-4);
            // fewer than eight coplanar points is refused
            let err = solve_pnp(&pts[..7], &px[..7], &k).unwrap_err();
            assert!(matches!(err, GeometryError::DegenerateConfiguration(_)));
        }
    }

    #[test]
    fn distant_noisy_small_object() {
        // a person-sized cloud ~10 m away; the linear start is fragile here
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, 2.0).unwrap();
        let k = camera();
        for _ in 0..300 {
            let truth = random_pose(&mut rng);
            let centre = truth.rotation.transpose() * (Vector3::new(0.0, 0.0, 10.0) - truth.translation);
            let pts: Vec<_> = (0..18)
                .map(|_| {
                    centre
                        + Vector3::new(
                            rng.random_range(-0.3..0.3),
                            rng.random_range(-0.15..0.15),
                            rng.random_range(-0.9..0.9),
                        )
                })
                .collect();
            let px: Vec<_> = project(&ProjectionMatrix::new(&k, &truth), &pts)
                .unwrap()
                .into_iter()
                .map(|u| u + Vector2::new(noise.sample(&mut rng), noise.sample(&mut rng)))
                .collect();
            let sol = solve_pnp(&pts, &px, &k).unwrap();
            assert!(sol.rms < 3.0, "rms {}", sol.rms);
        }
    }

    #[test]
    fn axis_aligned_set_is_the_rotation_group_of_the_cube() {
        let rs = axis_aligned_rotations();
        assert_eq!(rs.len(), 24);
        for (i, a) in rs.iter().enumerate() {
            assert!(crate::geometry::is_rotation(a));
            assert!(rs[i + 1..].iter().all(|b| a != b));
        }
    }

    #[test]
    fn too_few_and_degenerate() {
        let k = camera();
        let pts = vec![Vector3::new(0.0, 0.0, 5.0); 5];
        let px = vec![Vector2::new(640.0, 360.0); 5];
        assert_eq!(
            solve_pnp(&pts, &px, &k).unwrap_err(),
            GeometryError::InsufficientCorrespondences { found: 5, required: 6 }
        );
        // non-finite pairs are filtered before counting
        let mut pts: Vec<_> = (0..6).map(|i| Vector3::new(i as f64, (i * i) as f64, 5.0 + i as f64)).collect();
        let mut px = vec![Vector2::new(1.0, 1.0); 6];
        pts[2].x = f64::NAN;
        px[4].y = f64::INFINITY;
        assert!(matches!(
            solve_pnp(&pts, &px, &k),
            Err(GeometryError::InsufficientCorrespondences { found: 4, .. })
        ));
        let line: Vec<_> = (0..8).map(|i| Vector3::new(i as f64, 0.0, 5.0)).collect();
        let px = vec![Vector2::new(1.0, 1.0); 8];
        assert!(matches!(solve_pnp(&line, &px, &k), Err(GeometryError::DegenerateConfiguration(_))));
    }
}
