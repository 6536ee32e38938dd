//! Least-squares refinement of one person's 3D joints against any number of
//! calibrated camera views.
//!
//! The objective, for candidate joints `X` and input joints `X0`, is
//!
//! ```text
//! l1 * |X - X0|^2  +  sum over cameras, joints:  (l2 * conf + l3) * |proj(X) - u|^2
//! ```
//!
//! with meters in the first term and pixels in the second. Joints with zero
//! confidence (or non-finite pixels) are not observations and contribute
//! nothing; a joint behind a camera contributes the image diagonal squared
//! (with zero gradient). Every joint is independent of the others, so the
//! damped Gauss-Newton system is block diagonal with 3x3 blocks.

use nalgebra::{Matrix2x3, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Extrinsics, Intrinsics, JOINT_COUNT, MIN_DEPTH};

/// Iteration cap of [`refine`].
pub const REFINE_MAX_ITERATIONS: usize = 50;

const INITIAL_DAMPING: f64 = 1e-3;
const MAX_DAMPING: f64 = 1e12;
const RELATIVE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RefineError {
    #[error("invalid refinement problem: {0}")]
    InvalidProblem(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineWeights {
    /// Anchor to the input 3D joints.
    pub lambda1: f64,
    /// Confidence-weighted reprojection.
    pub lambda2: f64,
    /// Unweighted reprojection.
    pub lambda3: f64,
}

impl Default for RefineWeights {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 0.01,
        }
    }
}

impl RefineWeights {
    pub fn validate(&self) -> Result<(), RefineError> {
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2), ("lambda3", self.lambda3)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(RefineError::InvalidProblem(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// One camera's view of the person.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraObservation {
    pub intrinsics: Intrinsics,
    pub extrinsics: Extrinsics,
    pub joints2d: Vec<Vector2<f64>>,
    pub confidence: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineProblem {
    pub initial3d: Vec<Vector3<f64>>,
    pub observations: Vec<CameraObservation>,
    pub weights: RefineWeights,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineResult {
    pub refined3d: Vec<Vector3<f64>>,
    /// Objective at the start and after every accepted step.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

impl RefineProblem {
    pub fn new(initial3d: Vec<Vector3<f64>>, observations: Vec<CameraObservation>, weights: RefineWeights) -> Self {
        Self {
            initial3d,
            observations,
            weights,
        }
    }

    pub fn validate(&self) -> Result<(), RefineError> {
        self.weights.validate()?;
        if self.initial3d.len() != JOINT_COUNT {
            return Err(RefineError::InvalidProblem(format!(
                "expected {JOINT_COUNT} initial joints, got {}",
                self.initial3d.len()
            )));
        }
        if self.initial3d.iter().any(|x| !x.iter().all(|v| v.is_finite())) {
            return Err(RefineError::InvalidProblem("initial joints must be finite".into()));
        }
        for (c, obs) in self.observations.iter().enumerate() {
            if obs.joints2d.len() != JOINT_COUNT || obs.confidence.len() != JOINT_COUNT {
                return Err(RefineError::InvalidProblem(format!(
                    "camera {c}: expected {JOINT_COUNT} joints and confidences, got {} and {}",
                    obs.joints2d.len(),
                    obs.confidence.len()
                )));
            }
            if obs.confidence.iter().any(|&w| !(0.0..=1.0).contains(&w)) {
                return Err(RefineError::InvalidProblem(format!("camera {c}: confidence outside [0, 1]")));
            }
        }
        Ok(())
    }

    fn check_candidate(&self, candidate: &[Vector3<f64>]) -> Result<(), RefineError> {
        if candidate.len() != self.initial3d.len() {
            return Err(RefineError::InvalidProblem(format!(
                "candidate has {} joints, problem has {}",
                candidate.len(),
                self.initial3d.len()
            )));
        }
        if candidate.iter().any(|x| !x.iter().all(|v| v.is_finite())) {
            return Err(RefineError::InvalidProblem("candidate joints must be finite".into()));
        }
        Ok(())
    }

    /// Weight of joint `j` in camera `obs`, zero when it was not observed.
    fn weight(&self, obs: &CameraObservation, j: usize) -> f64 {
        let c = obs.confidence[j];
        if c <= 0.0 || !obs.joints2d[j].iter().all(|v| v.is_finite()) {
            return 0.0;
        }
        self.weights.lambda2 * c + self.weights.lambda3
    }
}

/// Pixel residual of joint `x` in one camera and its Jacobian with respect
/// to `x`, or `None` behind the camera.
fn residual(obs: &CameraObservation, x: &Vector3<f64>, u: &Vector2<f64>) -> Option<(Vector2<f64>, Matrix2x3<f64>)> {
    let k = &obs.intrinsics;
    let xc = obs.extrinsics.rotation * x + obs.extrinsics.translation;
    if !(xc.z > MIN_DEPTH) {
        return None;
    }
    let iz = 1.0 / xc.z;
    let r = Vector2::new(k.fx * xc.x * iz + k.cx - u.x, k.fy * xc.y * iz + k.cy - u.y);
    let dproj = Matrix2x3::new(
        k.fx * iz,
        0.0,
        -k.fx * xc.x * iz * iz,
        0.0,
        k.fy * iz,
        -k.fy * xc.y * iz * iz,
    );
    Some((r, dproj * obs.extrinsics.rotation))
}

fn joint_objective(problem: &RefineProblem, j: usize, x: &Vector3<f64>) -> f64 {
    let mut total = problem.weights.lambda1 * (x - problem.initial3d[j]).norm_squared();
    for obs in &problem.observations {
        let w = problem.weight(obs, j);
        if w == 0.0 {
            continue;
        }
        total += w * match residual(obs, x, &obs.joints2d[j]) {
            Some((r, _)) => r.norm_squared(),
            None => obs.intrinsics.diagonal().powi(2),
        };
    }
    total
}

/// Gradient and Gauss-Newton matrix of one joint's terms.
fn joint_normal_equations(problem: &RefineProblem, j: usize, x: &Vector3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
    let l1 = problem.weights.lambda1;
    let mut g = 2.0 * l1 * (x - problem.initial3d[j]);
    let mut h = Matrix3::identity() * (2.0 * l1);
    for obs in &problem.observations {
        let w = problem.weight(obs, j);
        if w == 0.0 {
            continue;
        }
        if let Some((r, jac)) = residual(obs, x, &obs.joints2d[j]) {
            g += 2.0 * w * jac.transpose() * r;
            h += 2.0 * w * jac.transpose() * jac;
        }
    }
    (g, h)
}

/// Value of the refinement objective at `candidate`.
pub fn objective(problem: &RefineProblem, candidate: &[Vector3<f64>]) -> Result<f64, RefineError> {
    problem.validate()?;
    problem.check_candidate(candidate)?;
    Ok(candidate.iter().enumerate().map(|(j, x)| joint_objective(problem, j, x)).sum())
}

/// Analytic gradient of [`objective`] (one 3-vector per joint).
pub fn gradient(problem: &RefineProblem, candidate: &[Vector3<f64>]) -> Result<Vec<Vector3<f64>>, RefineError> {
    problem.validate()?;
    problem.check_candidate(candidate)?;
    Ok(candidate
        .iter()
        .enumerate()
        .map(|(j, x)| joint_normal_equations(problem, j, x).0)
        .collect())
}

/// Minimizes [`objective`] from `initial3d` by damped Gauss-Newton.
///
/// Hitting the iteration cap is not an error: the best iterate is returned
/// with `converged = false`.
pub fn refine(problem: &RefineProblem) -> Result<RefineResult, RefineError> {
    problem.validate()?;
    let n = problem.initial3d.len();
    let mut x = problem.initial3d.clone();
    let mut cost = objective(problem, &x)?;
    let mut trace = vec![cost];
    let mut damping = INITIAL_DAMPING;
    let mut converged = false;

    for _ in 0..REFINE_MAX_ITERATIONS {
        let systems: Vec<_> = (0..n).map(|j| joint_normal_equations(problem, j, &x[j])).collect();
        if cost == 0.0 || systems.iter().all(|(g, _)| g.iter().all(|v| *v == 0.0)) {
            converged = true;
            break;
        }
        let mut accepted = false;
        while damping <= MAX_DAMPING {
            let candidate: Vec<Vector3<f64>> = systems
                .iter()
                .zip(&x)
                .map(|((g, h), xj)| {
                    let floor = 1e-12 * h.diagonal().max().max(1e-300);
                    let mut a = *h;
                    for i in 0..3 {
                        a[(i, i)] += damping * h[(i, i)].max(floor);
                    }
                    match a.cholesky() {
                        Some(ch) => xj - ch.solve(g),
                        None => *xj,
                    }
                })
                .collect();
            let new_cost: f64 = candidate.iter().enumerate().map(|(j, c)| joint_objective(problem, j, c)).sum();
            if new_cost < cost {
                let decrease = (cost - new_cost) / cost;
                x = candidate;
                cost = new_cost;
                trace.push(cost);
                damping = (damping * 0.1).max(1e-15);
                accepted = true;
                if decrease < RELATIVE_TOLERANCE {
                    converged = true;
                }
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            // no descent direction left at any damping: numerical minimum
            converged = true;
        }
        if converged {
            break;
        }
    }
    Ok(RefineResult {
        refined3d: x,
        objective_trace: trace,
        converged,
    })
}

/// Mean Euclidean distance between corresponding joints (meters).
pub fn mean_joint_error(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).sum::<f64>() / a.len() as f64
}
