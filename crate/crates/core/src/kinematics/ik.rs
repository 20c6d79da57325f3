//! Damped least-squares inverse kinematics.

use nalgebra::{DMatrix, DVector, Matrix6, Vector6};
use rand::Rng;

use super::chain::{ee_jacobian, forward_kinematics};
use super::model::RobotModel;
use super::KinematicsError;
use crate::geometry::pose::{pose_error, Pose};

#[derive(Debug, Clone, Copy)]
pub struct IkOptions {
    pub damping: f64,
    pub max_iterations: usize,
    pub position_tol: f64,
    pub orientation_tol: f64,
    /// Largest joint step per iteration, radians.
    pub max_step: f64,
}

impl Default for IkOptions {
    fn default() -> Self {
        IkOptions {
            damping: 1e-2,
            max_iterations: 200,
            position_tol: 1e-4,
            orientation_tol: 1e-3,
            max_step: 0.5,
        }
    }
}

impl IkOptions {
    /// Tight settings for projecting onto a constraint manifold.
    pub fn tight() -> Self {
        IkOptions { position_tol: 1e-10, orientation_tol: 1e-10, damping: 1e-4, ..Self::default() }
    }
}

/// Upper bound on the distance between the first joint and the end effector.
pub fn reach(model: &RobotModel) -> f64 {
    model.joints.iter().skip(1).map(|j| j.origin.translation.vector.norm()).sum::<f64>()
        + model.ee_offset.translation.vector.norm()
}

pub fn solve_ik(
    model: &RobotModel,
    target: &Pose,
    seed: &DVector<f64>,
    opts: &IkOptions,
) -> Result<DVector<f64>, KinematicsError> {
    model.check_dim(seed)?;
    let shoulder = (model.base * model.joints[0].origin).translation.vector;
    let distance = (target.translation.vector - shoulder).norm();
    let r = reach(model);
    if distance > r + opts.position_tol {
        return Err(KinematicsError::OutOfReach { distance, reach: r });
    }
    let mut q = model.clamp(seed);
    let mut last = f64::INFINITY;
    for _ in 0..=opts.max_iterations {
        let fk = forward_kinematics(model, &q)?;
        let e: Vector6<f64> = pose_error(target, &fk.ee);
        let ep = e.fixed_rows::<3>(0).norm();
        let eo = e.fixed_rows::<3>(3).norm();
        last = ep.max(eo);
        if ep <= opts.position_tol && eo <= opts.orientation_tol {
            return Ok(q);
        }
        let j = ee_jacobian(&fk);
        let jjt: Matrix6<f64> = &j * j.transpose() + Matrix6::identity() * opts.damping.powi(2);
        let Some(y) = jjt.cholesky().map(|c| c.solve(&e)) else { break };
        let mut dq: DVector<f64> = j.transpose() * y;
        let step = dq.amax();
        if step > opts.max_step {
            dq *= opts.max_step / step;
        }
        q = model.clamp(&(q + dq));
    }
    Err(KinematicsError::MaxIterations { iterations: opts.max_iterations, residual: last })
}

/// Tries `seed` first, then up to `restarts` uniformly random seeds.
pub fn solve_ik_with_restarts<R: Rng>(
    model: &RobotModel,
    target: &Pose,
    seed: &DVector<f64>,
    restarts: usize,
    opts: &IkOptions,
    rng: &mut R,
) -> Result<DVector<f64>, KinematicsError> {
    let mut err = match solve_ik(model, target, seed, opts) {
        Ok(q) => return Ok(q),
        Err(e @ KinematicsError::OutOfReach { .. }) => return Err(e),
        Err(e) => e,
    };
    for _ in 0..restarts {
        let s = random_configuration(model, rng);
        match solve_ik(model, target, &s, opts) {
            Ok(q) => return Ok(q),
            Err(e) => err = e,
        }
    }
    Err(err)
}

pub fn random_configuration<R: Rng>(model: &RobotModel, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(
        model.joint_count(),
        (0..model.joint_count()).map(|i| rng.random_range(model.q_min[i]..model.q_max[i])),
    )
}

/// Dense 6 x n pseudo-inverse helper used by callers that need a
/// minimum-norm correction instead of a full solve.
pub fn damped_pinv_step(j: &DMatrix<f64>, e: &DVector<f64>, damping: f64) -> Option<DVector<f64>> {
    let m = j.nrows();
    let a = j * j.transpose() + DMatrix::identity(m, m) * damping * damping;
    a.cholesky().map(|c| j.transpose() * c.solve(e))
}
