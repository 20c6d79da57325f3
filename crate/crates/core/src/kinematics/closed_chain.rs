//! Two arms rigidly holding one object.

use nalgebra::{DVector, Matrix3, Matrix3xX, Matrix6xX, Vector3, Vector6};

use super::chain::{ee_jacobian, forward_kinematics, FkResult};
use super::ik::{solve_ik, IkOptions};
use super::model::{CollisionSphere, ControlPoint, RobotModel};
use super::KinematicsError;
use crate::geometry::pose::{pose_from_array, pose_to_array, rotation_error, Pose, POSE_DIM};

#[derive(Debug, Clone)]
pub struct ClosedChainSystem {
    pub robots: [RobotModel; 2],
    /// End-effector frame to object frame, one per arm.
    pub grasps: [Pose; 2],
    /// Object collision spheres in the object frame.
    pub object_spheres: Vec<(Vector3<f64>, f64)>,
}

/// Joint configurations of both arms plus the object pose.
#[derive(Debug, Clone)]
pub struct SystemState {
    pub q: [DVector<f64>; 2],
    pub object: Pose,
}

impl SystemState {
    pub fn to_vector(&self) -> DVector<f64> {
        let mut v: Vec<f64> = self.q[0].iter().chain(self.q[1].iter()).copied().collect();
        v.extend_from_slice(&pose_to_array(&self.object));
        DVector::from_vec(v)
    }

    pub fn from_vector(v: &DVector<f64>, n1: usize, n2: usize) -> Result<Self, KinematicsError> {
        let expected = n1 + n2 + POSE_DIM;
        if v.len() != expected {
            return Err(KinematicsError::DimensionMismatch { expected, got: v.len() });
        }
        Ok(SystemState {
            q: [v.rows(0, n1).into_owned(), v.rows(n1, n2).into_owned()],
            object: pose_from_array(v.rows(n1 + n2, POSE_DIM).as_slice()),
        })
    }
}

impl ClosedChainSystem {
    pub fn state_dim(&self) -> usize {
        self.robots[0].joint_count() + self.robots[1].joint_count() + POSE_DIM
    }

    pub fn base_pose(&self, arm: usize) -> Pose {
        self.robots[arm].base
    }

    fn arm(&self, arm: usize) -> Result<&RobotModel, KinematicsError> {
        self.robots.get(arm).ok_or(KinematicsError::InvalidRobotIndex(arm))
    }

    /// Object pose implied by arm `arm` (0 or 1) at configuration `q`.
    pub fn object_pose(&self, arm: usize, q: &DVector<f64>) -> Result<Pose, KinematicsError> {
        let fk = forward_kinematics(self.arm(arm)?, q)?;
        Ok(fk.ee * self.grasps[arm])
    }

    /// `[p1 - p2; log(R1 R2^T)]` of the two implied object poses.
    pub fn chain_residual(
        &self,
        q1: &DVector<f64>,
        q2: &DVector<f64>,
    ) -> Result<Vector6<f64>, KinematicsError> {
        let a = self.object_pose(0, q1)?;
        let b = self.object_pose(1, q2)?;
        let dp = a.translation.vector - b.translation.vector;
        let dr = rotation_error(&a.rotation, &b.rotation);
        Ok(Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z))
    }

    /// Object-frame origin Jacobian (6 x n) for arm `arm`.
    pub fn object_jacobian(&self, arm: usize, fk: &FkResult) -> Matrix6xX<f64> {
        let j = ee_jacobian(fk);
        let r = (fk.ee * self.grasps[arm]).translation.vector - fk.ee.translation.vector;
        let skew = Matrix3::new(0.0, -r.z, r.y, r.z, 0.0, -r.x, -r.y, r.x, 0.0);
        let mut out = j.clone();
        let lin: Matrix3xX<f64> = j.rows(0, 3) - skew * j.rows(3, 3);
        out.rows_mut(0, 3).copy_from(&lin);
        out
    }

    /// Re-solves arm 2 so both arms agree on the object pose held by arm 1.
    pub fn project(&self, q1: &DVector<f64>, q2_seed: &DVector<f64>) -> Result<SystemState, KinematicsError> {
        let object = self.object_pose(0, q1)?;
        let ee_target = object * self.grasps[1].inverse();
        let q2 = solve_ik(&self.robots[1], &ee_target, q2_seed, &IkOptions::tight())
            .or_else(|e| match e {
                KinematicsError::MaxIterations { residual, .. } if residual < 1e-6 => {
                    let loose = IkOptions { position_tol: 1e-6, orientation_tol: 1e-6, ..IkOptions::tight() };
                    solve_ik(&self.robots[1], &ee_target, q2_seed, &loose)
                }
                other => Err(other),
            })?;
        Ok(SystemState { q: [q1.clone(), q2], object })
    }

    /// Solves both arms for the grasp poses of `object`.
    pub fn state_for_object(&self, object: &Pose, seeds: [&DVector<f64>; 2]) -> Result<SystemState, KinematicsError> {
        let mut q = [DVector::zeros(0), DVector::zeros(0)];
        for arm in 0..2 {
            let target = object * self.grasps[arm].inverse();
            q[arm] = solve_ik(&self.robots[arm], &target, seeds[arm], &IkOptions::tight()).or_else(|e| match e {
                KinematicsError::MaxIterations { residual, .. } if residual < 1e-6 => {
                    let loose = IkOptions { position_tol: 1e-6, orientation_tol: 1e-6, ..IkOptions::tight() };
                    solve_ik(&self.robots[arm], &target, seeds[arm], &loose)
                }
                other => Err(other),
            })?;
        }
        let [q1, q2] = q;
        Ok(SystemState { q: [q1, q2], object: *object })
    }

    /// Arm-1 model with the object's spheres and a control point at the
    /// object origin appended to its last link.
    pub fn carrying_model(&self, arm: usize) -> RobotModel {
        let mut m = self.robots[arm].clone();
        let last = m.joint_count();
        let to_link = m.ee_offset * self.grasps[arm];
        for (c, r) in &self.object_spheres {
            let center = to_link.transform_point(&(*c).into()).coords;
            m.collision_spheres.push(CollisionSphere { link: last, center, radius: *r });
        }
        m.fk_control_points.push(ControlPoint { link: last, point: to_link.translation.vector });
        let id = m.fk_control_points.len() - 1;
        if let Some(g) = m.group_of(last) {
            m.groups[g].control_points.push(id);
        }
        m
    }
}
