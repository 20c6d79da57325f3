use nalgebra::{Point3, Vector3};

use super::PerceptionError;
use crate::geometry::{Halfspace, Pose};

/// Pinhole depth camera. The optical axis is the camera-frame `+z`, image
/// columns grow along `+x` and rows along `+y`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub id: usize,
    pub pose: Pose,
    pub h_fov: f64,
    pub v_fov: f64,
    pub rows: usize,
    pub cols: usize,
    pub max_range: f64,
}

impl CameraModel {
    pub fn new(
        id: usize,
        pose: Pose,
        h_fov: f64,
        v_fov: f64,
        rows: usize,
        cols: usize,
        max_range: f64,
    ) -> Result<Self, PerceptionError> {
        let cam = CameraModel { id, pose, h_fov, v_fov, rows, cols, max_range };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), PerceptionError> {
        let pi = std::f64::consts::PI;
        let fov_ok = |f: f64| f > 0.0 && f < pi;
        if !fov_ok(self.h_fov) || !fov_ok(self.v_fov) {
            return Err(PerceptionError::InvalidCamera("field of view outside (0, pi)".into()));
        }
        if self.rows == 0 || self.cols == 0 {
            return Err(PerceptionError::InvalidCamera("empty resolution".into()));
        }
        if self.max_range.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(PerceptionError::InvalidCamera("range must be positive".into()));
        }
        Ok(())
    }

    pub fn origin(&self) -> Vector3<f64> {
        self.pose.translation.vector
    }

    pub fn axis(&self) -> Vector3<f64> {
        self.pose.rotation * Vector3::z()
    }

    pub fn with_pose(&self, pose: Pose) -> Self {
        CameraModel { pose, ..self.clone() }
    }

    /// Unit world direction through the center of pixel `(row, col)`.
    pub fn ray(&self, row: usize, col: usize) -> Vector3<f64> {
        let u = ((col as f64 + 0.5) / self.cols as f64) * 2.0 - 1.0;
        let v = ((row as f64 + 0.5) / self.rows as f64) * 2.0 - 1.0;
        let d = Vector3::new(u * (0.5 * self.h_fov).tan(), v * (0.5 * self.v_fov).tan(), 1.0);
        self.pose.rotation * d.normalize()
    }

    pub fn to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.pose.inverse_transform_point(&Point3::from(*p)).coords
    }

    /// Four side planes through the optical center plus the far plane
    /// `z_cam <= max_range`, in world coordinates.
    pub fn frustum(&self) -> Vec<Halfspace> {
        let tx = (0.5 * self.h_fov).tan();
        let ty = (0.5 * self.v_fov).tan();
        let local = [
            Vector3::new(1.0, 0.0, -tx),
            Vector3::new(-1.0, 0.0, -tx),
            Vector3::new(0.0, 1.0, -ty),
            Vector3::new(0.0, -1.0, -ty),
        ];
        let o = self.origin();
        let mut hs: Vec<Halfspace> = local
            .iter()
            .map(|n| {
                let w = self.pose.rotation * n;
                Halfspace::new(w, w.dot(&o))
            })
            .collect();
        let axis = self.axis();
        hs.push(Halfspace::new(axis, axis.dot(&o) + self.max_range));
        hs
    }

    /// Corners of the pixel-sized square around `p`, perpendicular to the
    /// optical axis at the depth of `p`. A surface hit at a pixel center
    /// stands for the whole pixel, so hulls over these corners cover the
    /// true silhouette.
    pub fn pixel_footprint(&self, p: &Vector3<f64>) -> [Vector3<f64>; 4] {
        let z = self.to_camera(p).z.max(0.0);
        let dx = z * 2.0 * (0.5 * self.h_fov).tan() / self.cols as f64;
        let dy = z * 2.0 * (0.5 * self.v_fov).tan() / self.rows as f64;
        let ex = self.pose.rotation * Vector3::x() * dx;
        let ey = self.pose.rotation * Vector3::y() * dy;
        [p + ex + ey, p + ex - ey, p - ex + ey, p - ex - ey]
    }

    pub fn in_frustum(&self, p: &Vector3<f64>, tol: f64) -> bool {
        self.frustum().iter().all(|h| h.signed_distance(p) <= tol)
    }
}
