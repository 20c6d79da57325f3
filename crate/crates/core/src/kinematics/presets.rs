//! Built-in robot models.

use std::f64::consts::PI;

use nalgebra::{DVector, Isometry3, Translation3, UnitQuaternion, Vector3};

use super::closed_chain::ClosedChainSystem;
use super::model::{CollisionGroup, CollisionSphere, ControlPoint, Joint, RobotModel};
use crate::geometry::pose::Pose;

const FE7_TOML: &str = include_str!("../../data/fe7.toml");

/// Planar chain of revolute z joints in the base xy plane.
///
/// Each link carries three spheres at 1/6, 1/2 and 5/6 of its length and two
/// control points (midpoint and distal end). Link `i` forms its own group;
/// the base joins the first group and the last group gets `ee_budget`.
pub fn planar_chain(
    name: &str,
    lengths: &[f64],
    radius: f64,
    q_limit: f64,
    static_budget: usize,
    ee_budget: usize,
) -> RobotModel {
    let n = lengths.len();
    let mut joints = Vec::with_capacity(n);
    let mut spheres = Vec::new();
    let mut points = Vec::new();
    let mut groups = Vec::new();
    for (i, &l) in lengths.iter().enumerate() {
        let prev = if i == 0 { 0.0 } else { lengths[i - 1] };
        joints.push(Joint {
            origin: Isometry3::translation(prev, 0.0, 0.0),
            axis: Vector3::z(),
        });
        let link = i + 1;
        for f in [1.0 / 6.0, 0.5, 5.0 / 6.0] {
            spheres.push(CollisionSphere { link, center: Vector3::new(f * l, 0.0, 0.0), radius });
        }
        points.push(ControlPoint { link, point: Vector3::new(0.5 * l, 0.0, 0.0) });
        points.push(ControlPoint { link, point: Vector3::new(l, 0.0, 0.0) });
        groups.push(CollisionGroup {
            name: format!("link{link}"),
            links: if i == 0 { vec![0, 1] } else { vec![link] },
            control_points: vec![2 * i, 2 * i + 1],
            sv_budget: if link == n { ee_budget } else { static_budget },
        });
    }
    RobotModel {
        name: name.into(),
        base: Pose::identity(),
        joints,
        ee_offset: Isometry3::translation(lengths[n - 1], 0.0, 0.0),
        q_min: DVector::from_element(n, -q_limit),
        q_max: DVector::from_element(n, q_limit),
        v_limit: DVector::from_element(n, 1.5),
        a_limit: DVector::from_element(n, 6.0),
        collision_spheres: spheres,
        fk_control_points: points,
        groups,
    }
}

/// Unit-length two-link arm used by the proxy benchmark.
pub fn planar_two_link() -> RobotModel {
    planar_chain("planar-2link", &[1.0, 1.0], 0.12, PI, 200, 800)
}

/// Control-point ids of the link midpoints of a [`planar_chain`] model.
pub fn planar_midpoints(model: &RobotModel) -> Vec<usize> {
    (0..model.joint_count()).map(|i| 2 * i).collect()
}

pub fn planar_three_link() -> RobotModel {
    planar_chain("planar-3link", &[0.45, 0.4, 0.25], 0.045, 2.8, 200, 800)
}

/// Two planar three-link arms facing each other across the origin,
/// holding a 0.4 m bar between their end effectors.
pub fn planar_dual_arm() -> ClosedChainSystem {
    let mut a = planar_three_link();
    a.name = "arm-a".into();
    a.base = Isometry3::translation(-0.6, 0.0, 0.0);
    let mut b = planar_three_link();
    b.name = "arm-b".into();
    b.base = Isometry3::from_parts(
        Translation3::new(0.6, 0.0, 0.0),
        UnitQuaternion::from_euler_angles(0.0, 0.0, PI),
    );
    let grasp_a = Isometry3::translation(0.2, 0.0, 0.0);
    let grasp_b = Isometry3::from_parts(
        Translation3::new(0.2, 0.0, 0.0),
        UnitQuaternion::from_euler_angles(0.0, 0.0, PI),
    );
    ClosedChainSystem {
        robots: [a, b],
        grasps: [grasp_a, grasp_b],
        object_spheres: vec![
            (Vector3::new(-0.1, 0.0, 0.0), 0.05),
            (Vector3::new(0.0, 0.0, 0.0), 0.05),
            (Vector3::new(0.1, 0.0, 0.0), 0.05),
        ],
    }
}

/// 7-DoF arm loaded from the bundled model file.
pub fn fe7() -> RobotModel {
    RobotModel::from_toml(FE7_TOML).expect("bundled model is valid")
}
