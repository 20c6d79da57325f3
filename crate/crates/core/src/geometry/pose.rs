//! Rigid-transform helpers shared by kinematics, perception and the planner.
//!
//! Poses are nalgebra isometries. The flat 7-number layout used in state
//! vectors and text files is `[px, py, pz, qw, qx, qy, qz]`.

use nalgebra::{Isometry3, Quaternion, Translation3, UnitQuaternion, Vector3};

/// World (or parent-frame) pose: position in meters plus unit quaternion.
pub type Pose = Isometry3<f64>;

/// Length of the flat pose layout.
pub const POSE_DIM: usize = 7;

pub fn pose_to_array(pose: &Pose) -> [f64; POSE_DIM] {
    let t = pose.translation.vector;
    let q = pose.rotation.quaternion();
    [t.x, t.y, t.z, q.w, q.i, q.j, q.k]
}

/// Builds a pose from the flat layout; the quaternion block is normalized.
pub fn pose_from_array(values: &[f64]) -> Pose {
    let q = Quaternion::new(values[3], values[4], values[5], values[6]);
    Isometry3::from_parts(
        Translation3::new(values[0], values[1], values[2]),
        UnitQuaternion::from_quaternion(q),
    )
}

pub fn pose_from_xyz_rpy(xyz: [f64; 3], rpy: [f64; 3]) -> Pose {
    Isometry3::from_parts(
        Translation3::new(xyz[0], xyz[1], xyz[2]),
        UnitQuaternion::from_euler_angles(rpy[0], rpy[1], rpy[2]),
    )
}

/// Rotation vector (axis * angle, angle in [0, pi]) of `a * b^-1`.
///
/// `q` and `-q` describe the same rotation; the sign of the relative
/// quaternion is fixed so the shorter arc is reported.
pub fn rotation_error(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> Vector3<f64> {
    let rel = a * b.inverse();
    quaternion_log(rel.quaternion())
}

/// Rotation vector of a (not necessarily normalized) quaternion.
pub fn quaternion_log(q: &Quaternion<f64>) -> Vector3<f64> {
    let (mut w, mut v) = (q.w, q.imag());
    if w < 0.0 {
        w = -w;
        v = -v;
    }
    let s = v.norm();
    if s < 1e-12 {
        // first-order expansion; angle ~ 2 s
        return v * (2.0 / w.max(1e-300));
    }
    let angle = 2.0 * s.atan2(w);
    v * (angle / s)
}

/// Position difference in meters plus rotation error in radians.
pub fn pose_error(a: &Pose, b: &Pose) -> nalgebra::Vector6<f64> {
    let dp = a.translation.vector - b.translation.vector;
    let dr = rotation_error(&a.rotation, &b.rotation);
    nalgebra::Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

/// Rotation whose z axis is `axis`, using `up_hint` to fix the x axis when
/// possible. Used to aim cameras.
pub fn rotation_with_z_axis(axis: &Vector3<f64>, x_hint: &Vector3<f64>) -> UnitQuaternion<f64> {
    let z = axis.normalize();
    let mut x = x_hint - z * z.dot(x_hint);
    if x.norm() < 1e-9 {
        let alt = if z.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        x = alt - z * z.dot(&alt);
    }
    let x = x.normalize();
    let y = z.cross(&x);
    let m = nalgebra::Matrix3::from_columns(&[x, y, z]);
    UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(m))
}
