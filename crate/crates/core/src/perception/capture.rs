//! Ray-cast depth capture and robot self-filtering.

use nalgebra::Vector3;
use rayon::prelude::*;

use super::camera::CameraModel;
use super::PointCloud;
use crate::geometry::Sphere;
use crate::proxy::GeometricWorld;

/// Distance along a unit ray from `o` to the first hit of a sphere, if any.
fn ray_sphere(o: &Vector3<f64>, d: &Vector3<f64>, s: &Sphere) -> Option<f64> {
    let oc = o - s.center;
    let b = oc.dot(d);
    let c = oc.norm_squared() - s.radius * s.radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = -b - sq;
    let t1 = -b + sq;
    if t0 > 1e-9 {
        Some(t0)
    } else if t1 > 1e-9 {
        Some(t1)
    } else {
        None
    }
}

/// First-hit range along every pixel ray against the obstacles of `world`
/// and the given robot spheres.
pub fn capture_with_robot(world: &GeometricWorld, robot: &[Sphere], camera: &CameraModel, timestamp: f64) -> PointCloud {
    let o = camera.origin();
    let pixels: Vec<(usize, usize)> =
        (0..camera.rows).flat_map(|r| (0..camera.cols).map(move |c| (r, c))).collect();
    let points: Vec<Vector3<f64>> = pixels
        .par_iter()
        .filter_map(|&(r, c)| {
            let d = camera.ray(r, c);
            let end = o + d * camera.max_range;
            let mut best = f64::INFINITY;
            for ob in &world.obstacles {
                if let Some((t0, _)) = ob.polytope.segment_interval(&o, &end) {
                    if t0 > 1e-12 {
                        best = best.min(t0 * camera.max_range);
                    }
                }
            }
            for s in robot {
                if let Some(t) = ray_sphere(&o, &d, s) {
                    best = best.min(t);
                }
            }
            (best <= camera.max_range).then(|| o + d * best)
        })
        .collect();
    PointCloud { points, source: camera.id, timestamp }
}

pub fn synthetic_depth_capture(world: &GeometricWorld, camera: &CameraModel) -> PointCloud {
    capture_with_robot(world, &[], camera, 0.0)
}

pub const DEFAULT_INFLATION: f64 = 1.1;

/// Keeps points farther than `inflation * radius` from every sphere center.
pub fn filter_robot_points(cloud: &PointCloud, spheres: &[Sphere], inflation: f64) -> PointCloud {
    let points = cloud
        .points
        .iter()
        .filter(|p| spheres.iter().all(|s| (*p - s.center).norm() > s.radius * inflation))
        .copied()
        .collect();
    PointCloud { points, source: cloud.source, timestamp: cloud.timestamp }
}
