//! Per-step perception for the scenario runner.
//!
//! Static cameras look at the ground-truth world with the robot in view.
//! Each frame's hulls and their shadows make up the perceived obstacles:
//! space hidden behind a surface counts as occupied. Frames are not fused
//! across steps because obstacles may move between steps; simultaneous
//! cameras of one step are fused.

use c2f_core::geometry::{ConvexPolytope, Sphere};
use c2f_core::kinematics::{forward_kinematics, posed_spheres, ClosedChainSystem, SystemState};
use c2f_core::perception::{capture_with_robot, integrate_occlusions, process_frame, CameraModel, OcclusionModel, PipelineConfig};
use c2f_core::proxy::GeometricWorld;
use nalgebra::Vector3;

use crate::HarnessError;

/// Centroids closer than this identify the same obstacle across steps.
pub const MATCH_RADIUS: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct Perceived {
    /// Hulls and shadows, as seen.
    pub obstacles: Vec<ConvexPolytope>,
    /// The fused frame model of this step.
    pub occlusion: OcclusionModel,
}

impl Perceived {
    pub fn world(&self) -> GeometricWorld {
        GeometricWorld::from_polytopes(self.obstacles.clone())
    }

    /// Model for line-of-sight tests where unseen space blocks sight.
    pub fn blockers(&self) -> OcclusionModel {
        OcclusionModel { hulls: self.obstacles.clone(), ..self.occlusion.clone() }
    }

    /// Same obstacle set up to `tol` on every vertex.
    pub fn same_as(&self, other: &Perceived, tol: f64) -> bool {
        self.obstacles.len() == other.obstacles.len()
            && self.obstacles.iter().zip(&other.obstacles).all(|(a, b)| same_polytope(a, b, tol))
    }
}

fn same_polytope(a: &ConvexPolytope, b: &ConvexPolytope, tol: f64) -> bool {
    a.vertices().len() == b.vertices().len()
        && a.vertices().iter().zip(b.vertices()).all(|(u, v)| (u - v).amax() <= tol)
}

/// Every collision sphere of the system: both arms plus the object once.
pub fn system_spheres(system: &ClosedChainSystem, state: &SystemState) -> Result<Vec<Sphere>, HarnessError> {
    let carrying = system.carrying_model(0);
    let mut out = posed_spheres(&forward_kinematics(&carrying, &state.q[0])?, &carrying.collision_spheres);
    let other = &system.robots[1];
    out.extend(posed_spheres(&forward_kinematics(other, &state.q[1])?, &other.collision_spheres));
    Ok(out)
}

pub fn perceive(
    truth: &GeometricWorld,
    robot: &[Sphere],
    cameras: &[CameraModel],
    pipeline: &PipelineConfig,
    time: f64,
) -> Result<Perceived, HarnessError> {
    let mut fused = OcclusionModel::default();
    for cam in cameras {
        let cloud = capture_with_robot(truth, robot, cam, time);
        let frame = process_frame(&cloud, cam, robot, &OcclusionModel::default(), pipeline)?;
        fused = integrate_occlusions(&frame.model, &fused);
    }
    let mut obstacles = fused.hulls.clone();
    obstacles.extend(fused.occlusions.iter().cloned());
    Ok(Perceived { obstacles, occlusion: fused })
}

/// Perceived obstacles with no counterpart in `baseline`.
pub fn new_obstacles<'a>(current: &'a Perceived, baseline: &Perceived) -> Vec<&'a ConvexPolytope> {
    current
        .obstacles
        .iter()
        .filter(|p| {
            let c = p.centroid();
            !baseline.obstacles.iter().any(|b| (b.centroid() - c).norm() <= MATCH_RADIUS)
        })
        .collect()
}

/// Smallest surface distance between any sphere and any polytope.
pub fn min_distance<'a>(spheres: &[Sphere], polytopes: impl IntoIterator<Item = &'a ConvexPolytope> + Clone) -> f64 {
    spheres
        .iter()
        .flat_map(|s| polytopes.clone().into_iter().map(move |p| p.signed_distance(&s.center) - s.radius))
        .fold(f64::INFINITY, f64::min)
}

/// Marker detection by the eye-in-hand camera: inside the horizontal field
/// of view and range, with a clear ground-truth line of sight.
pub fn marker_detected(
    camera_origin: &Vector3<f64>,
    optical_axis: &Vector3<f64>,
    marker: &Vector3<f64>,
    h_fov: f64,
    max_range: f64,
    truth: &GeometricWorld,
) -> bool {
    let d = marker - camera_origin;
    let dist = d.norm();
    if dist <= 1e-9 || dist > max_range {
        return false;
    }
    let angle = (d.dot(optical_axis) / (dist * optical_axis.norm())).clamp(-1.0, 1.0).acos();
    angle <= 0.5 * h_fov && !truth.obstacles.iter().any(|o| o.polytope.intersects_segment(camera_origin, marker))
}
