//! Synthetic depth sensing and the per-frame pipeline
//! filter, cluster, occlusion, integrate, robot cones.

pub mod camera;
pub mod capture;
pub mod cluster;
pub mod io;
pub mod occlusion;
pub mod scenes;

pub use camera::CameraModel;
pub use capture::{capture_with_robot, filter_robot_points, synthetic_depth_capture, DEFAULT_INFLATION};
pub use cluster::{cluster_to_hulls, cluster_to_hulls_with, dbscan, DEGENERATE_PAD};
pub use io::{Scene, SceneCamera, SceneMarker, SceneObstacle};
pub use occlusion::{
    dynamic_occlusion_cones, integrate_occlusions, occlusion_polytope, OcclusionCone, OcclusionModel,
    DEFAULT_EXTEND,
};

use nalgebra::Vector3;
use thiserror::Error;

use crate::geometry::{GeometryError, Sphere};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerceptionError {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("clustering needs eps > 0 and min_pts >= 1")]
    InvalidClustering,
    #[error("camera lies inside a robot sphere (distance {distance}, radius {radius})")]
    CameraInsideSphere { distance: f64, radius: f64 },
    #[error("non-finite point coordinate")]
    NonFinite,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub source: usize,
    pub timestamp: f64,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>, source: usize, timestamp: f64) -> Result<Self, PerceptionError> {
        if points.iter().any(|p| !p.iter().all(|x| x.is_finite())) {
            return Err(PerceptionError::NonFinite);
        }
        Ok(PointCloud { points, source, timestamp })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub inflation: f64,
    pub eps: f64,
    pub min_pts: usize,
    pub extend: f64,
    /// Grow hulls by one pixel footprint around every point.
    pub dilate: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { inflation: DEFAULT_INFLATION, eps: 0.05, min_pts: 8, extend: DEFAULT_EXTEND, dilate: true }
    }
}

/// Output of one camera frame.
#[derive(Debug, Clone)]
pub struct Frame {
    pub model: OcclusionModel,
    pub cones: Vec<OcclusionCone>,
    pub filtered_points: usize,
}

/// Runs one camera through filter, clustering and occlusion, then fuses the
/// result into `history`.
pub fn process_frame(
    cloud: &PointCloud,
    camera: &CameraModel,
    robot: &[Sphere],
    history: &OcclusionModel,
    cfg: &PipelineConfig,
) -> Result<Frame, PerceptionError> {
    let filtered = filter_robot_points(cloud, robot, cfg.inflation);
    let hulls = if cfg.dilate {
        cluster_to_hulls_with(&filtered.points, cfg.eps, cfg.min_pts, |p| camera.pixel_footprint(p).to_vec())?
    } else {
        cluster_to_hulls(&filtered.points, cfg.eps, cfg.min_pts)?
    };
    let current = OcclusionModel::from_frame(hulls, camera, cfg.extend);
    let model = integrate_occlusions(&current, history);
    // A camera carried by the arm sits inside its own wrist spheres.
    let outside: Vec<Sphere> =
        robot.iter().filter(|s| (s.center - camera.origin()).norm() > s.radius).copied().collect();
    let cones = dynamic_occlusion_cones(&outside, camera)?;
    Ok(Frame { model, cones, filtered_points: filtered.len() })
}
