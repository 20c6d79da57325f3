//! Forward kinematics and Jacobians for serial revolute chains.

use nalgebra::{DVector, Matrix3xX, Matrix6xX, Translation3, UnitQuaternion, Vector3};

use super::model::{CollisionSphere, ControlPoint, RobotModel};
use super::KinematicsError;
use crate::geometry::{pose::Pose, Sphere};

/// World poses of every link frame plus the end effector.
#[derive(Debug, Clone)]
pub struct FkResult {
    /// `links[0]` is the base, `links[i]` the frame after joint `i`.
    pub links: Vec<Pose>,
    /// World joint axes; `axes[i]` belongs to joint `i + 1`.
    pub axes: Vec<Vector3<f64>>,
    /// World joint positions, aligned with `axes`.
    pub joint_origins: Vec<Vector3<f64>>,
    pub ee: Pose,
}

impl FkResult {
    pub fn point(&self, link: usize, local: &Vector3<f64>) -> Vector3<f64> {
        self.links[link].transform_point(&(*local).into()).coords
    }
}

pub fn forward_kinematics(model: &RobotModel, q: &DVector<f64>) -> Result<FkResult, KinematicsError> {
    model.check_dim(q)?;
    let n = model.joint_count();
    let mut links = Vec::with_capacity(n + 1);
    let mut axes = Vec::with_capacity(n);
    let mut joint_origins = Vec::with_capacity(n);
    let mut t = model.base;
    links.push(t);
    for (i, j) in model.joints.iter().enumerate() {
        let frame = t * j.origin;
        axes.push(frame.rotation * j.axis);
        joint_origins.push(frame.translation.vector);
        let rot = UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_unchecked(j.axis), q[i]);
        t = frame * Pose::from_parts(Translation3::identity(), rot);
        links.push(t);
    }
    let ee = t * model.ee_offset;
    Ok(FkResult { links, axes, joint_origins, ee })
}

/// Linear-velocity Jacobian (3 x n) of a world point rigidly attached to `link`.
pub fn point_jacobian(fk: &FkResult, link: usize, world_point: &Vector3<f64>) -> Matrix3xX<f64> {
    let n = fk.axes.len();
    let mut j = Matrix3xX::zeros(n);
    for k in 0..link.min(n) {
        let col = fk.axes[k].cross(&(world_point - fk.joint_origins[k]));
        j.set_column(k, &col);
    }
    j
}

/// Geometric Jacobian (6 x n) of the end effector: linear rows on top.
pub fn ee_jacobian(fk: &FkResult) -> Matrix6xX<f64> {
    let n = fk.axes.len();
    let p = fk.ee.translation.vector;
    let mut j = Matrix6xX::zeros(n);
    for k in 0..n {
        let lin = fk.axes[k].cross(&(p - fk.joint_origins[k]));
        let ang = fk.axes[k];
        for r in 0..3 {
            j[(r, k)] = lin[r];
            j[(r + 3, k)] = ang[r];
        }
    }
    j
}

/// Geometric Jacobian at configuration `q`.
pub fn jacobian(model: &RobotModel, q: &DVector<f64>) -> Result<Matrix6xX<f64>, KinematicsError> {
    Ok(ee_jacobian(&forward_kinematics(model, q)?))
}

pub fn posed_spheres(fk: &FkResult, spheres: &[CollisionSphere]) -> Vec<Sphere> {
    spheres
        .iter()
        .map(|s| Sphere { center: fk.point(s.link, &s.center), radius: s.radius })
        .collect()
}

pub fn control_point_positions(fk: &FkResult, points: &[ControlPoint]) -> Vec<Vector3<f64>> {
    points.iter().map(|c| fk.point(c.link, &c.point)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::presets;

    #[test]
    fn planar_two_link_closed_form() {
        let m = presets::planar_two_link();
        let q = DVector::from_vec(vec![0.3, -1.1]);
        let fk = forward_kinematics(&m, &q).unwrap();
        let x = q[0].cos() + (q[0] + q[1]).cos();
        let y = q[0].sin() + (q[0] + q[1]).sin();
        let p = fk.ee.translation.vector;
        assert!((p.x - x).abs() < 1e-12 && (p.y - y).abs() < 1e-12 && p.z.abs() < 1e-12);
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let m = presets::planar_two_link();
        let r = forward_kinematics(&m, &DVector::zeros(3));
        assert!(matches!(r, Err(KinematicsError::DimensionMismatch { expected: 2, got: 3 })));
    }
}
