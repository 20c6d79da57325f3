//! Scripted table-top scenes used by the occlusion audits.

use nalgebra::{Isometry3, Translation3, Vector3};

use super::camera::CameraModel;
use crate::geometry::pose::rotation_with_z_axis;
use crate::geometry::{ConvexPolytope, Pose};
use crate::proxy::GeometricWorld;

/// Camera pose at `eye` with its optical axis through `target`; image rows
/// point as close to world `-z` as the aim allows.
pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>) -> Pose {
    let z = target - eye;
    let x = z.cross(&Vector3::z());
    Isometry3::from_parts(Translation3::from(eye), rotation_with_z_axis(&z, &x))
}

pub fn boxed(lo: [f64; 3], hi: [f64; 3]) -> ConvexPolytope {
    ConvexPolytope::cuboid(Vector3::from(lo), Vector3::from(hi))
}

pub struct ScriptedScene {
    pub name: &'static str,
    pub world: GeometricWorld,
    pub camera: CameraModel,
}

fn camera(eye: [f64; 3], target: [f64; 3]) -> CameraModel {
    let pose = look_at(Vector3::from(eye), Vector3::from(target));
    CameraModel::new(0, pose, 1.0, 0.8, 96, 128, 3.0).expect("scene camera is valid")
}

pub fn scripted_scenes() -> Vec<ScriptedScene> {
    vec![
        ScriptedScene {
            name: "single-box",
            world: GeometricWorld::from_polytopes(vec![boxed([1.2, -0.15, -0.15], [1.5, 0.15, 0.15])]),
            camera: camera([0.0, 0.0, 0.0], [1.0, 0.0, 0.0]),
        },
        ScriptedScene {
            name: "two-boxes-staggered",
            world: GeometricWorld::from_polytopes(vec![
                boxed([1.0, -0.4, -0.1], [1.2, -0.1, 0.2]),
                boxed([1.6, 0.1, -0.2], [1.9, 0.4, 0.1]),
            ]),
            camera: camera([0.0, 0.0, 0.1], [1.0, 0.0, 0.0]),
        },
        ScriptedScene {
            name: "oblique-view",
            world: GeometricWorld::from_polytopes(vec![boxed([0.8, 0.3, -0.2], [1.1, 0.6, 0.2])]),
            camera: camera([0.0, -0.3, 0.5], [1.0, 0.4, 0.0]),
        },
        ScriptedScene {
            name: "top-down",
            world: GeometricWorld::from_polytopes(vec![
                boxed([-0.2, -0.2, 0.0], [0.1, 0.1, 0.25]),
                boxed([0.3, 0.2, 0.0], [0.5, 0.4, 0.1]),
            ]),
            camera: camera([0.0, 0.0, 1.5], [0.05, 0.05, 0.0]),
        },
        ScriptedScene {
            name: "box-behind-box",
            world: GeometricWorld::from_polytopes(vec![
                boxed([1.0, -0.3, -0.3], [1.1, 0.3, 0.3]),
                boxed([1.6, -0.1, -0.1], [1.8, 0.1, 0.1]),
                boxed([1.3, 0.5, -0.1], [1.5, 0.7, 0.1]),
            ]),
            camera: camera([0.0, 0.0, 0.0], [1.0, 0.0, 0.0]),
        },
    ]
}
