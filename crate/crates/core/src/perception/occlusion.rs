//! Occlusion polytopes, cross-frame integration and robot self-occlusion cones.

use nalgebra::Vector3;

use super::camera::CameraModel;
use super::PerceptionError;
use crate::geometry::{ConvexPolytope, Halfspace, Sphere};

pub const DEFAULT_EXTEND: f64 = 1.0;
/// Centroid distance under which hulls of two frames are the same obstacle.
pub const REASSOCIATION_RADIUS: f64 = 0.1;
/// Pieces smaller than this (m^3) are dropped during integration.
pub const MIN_PIECE_VOLUME: f64 = 1e-5;
/// Number of most recent frustums remembered as observed views.
pub const VIEW_MEMORY: usize = 8;

/// Shadow of `hull` as seen from `camera`: every point `c + s (x - c)` with
/// `x` in the hull and `1 <= s <= 1 + extend / d`, `d` the distance of the
/// closest hull vertex, clipped to the frustum. Points inside are ray-blocked
/// by construction. `None` when part of the hull is at or behind the image
/// plane, or nothing of the shadow lies in the frustum.
pub fn occlusion_polytope(hull: &ConvexPolytope, camera: &CameraModel, extend: f64) -> Option<ConvexPolytope> {
    let c = camera.origin();
    if hull.vertices().iter().any(|v| camera.to_camera(v).z <= 1e-9) {
        return None;
    }
    let d_close = hull.vertices().iter().map(|v| (v - c).norm()).fold(f64::INFINITY, f64::min);
    let s = 1.0 + extend.max(0.0) / d_close;
    let mut pts: Vec<Vector3<f64>> = hull.vertices().to_vec();
    pts.extend(hull.vertices().iter().map(|v| c + (v - c) * s));
    let shadow = ConvexPolytope::from_points(&pts).ok()?;
    shadow.clip_all(&camera.frustum())
}

/// Perception state of one frame, or the fusion of several.
#[derive(Debug, Clone, Default)]
pub struct OcclusionModel {
    pub hulls: Vec<ConvexPolytope>,
    pub occlusions: Vec<ConvexPolytope>,
    /// Frustums of the views that contributed, most recent last.
    pub views: Vec<Vec<Halfspace>>,
}

impl OcclusionModel {
    /// Model of a single frame from already clustered hulls.
    pub fn from_frame(hulls: Vec<ConvexPolytope>, camera: &CameraModel, extend: f64) -> Self {
        let occlusions = hulls.iter().filter_map(|h| occlusion_polytope(h, camera, extend)).collect();
        OcclusionModel { hulls, occlusions, views: vec![camera.frustum()] }
    }

    pub fn is_empty(&self) -> bool {
        self.hulls.is_empty() && self.occlusions.is_empty() && self.views.is_empty()
    }

    pub fn observed(&self, p: &Vector3<f64>, tol: f64) -> bool {
        self.views.iter().any(|f| f.iter().all(|h| h.signed_distance(p) <= tol))
    }

    /// Inside a hull or an occlusion polytope.
    pub fn occluded(&self, p: &Vector3<f64>, tol: f64) -> bool {
        self.hulls.iter().chain(&self.occlusions).any(|h| h.contains(p, tol))
    }

    /// Observed by some view and not hidden.
    pub fn known_free(&self, p: &Vector3<f64>) -> bool {
        self.observed(p, 0.0) && !self.occluded(p, 1e-9)
    }

    /// Line of sight test against the obstacle hulls.
    pub fn segment_blocked(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> bool {
        self.hulls.iter().any(|h| h.intersects_segment(a, b))
    }
}

fn subtract_views(piece: &ConvexPolytope, views: &[Vec<Halfspace>]) -> Vec<ConvexPolytope> {
    let mut parts = vec![piece.clone()];
    for f in views {
        parts = parts.iter().flat_map(|p| p.difference(f)).collect();
        if parts.is_empty() {
            break;
        }
    }
    parts
}

fn prune_pieces(pieces: Vec<ConvexPolytope>) -> Vec<ConvexPolytope> {
    let pieces: Vec<ConvexPolytope> = pieces.into_iter().filter(|p| p.volume() >= MIN_PIECE_VOLUME).collect();
    let mut keep: Vec<ConvexPolytope> = Vec::new();
    for (i, p) in pieces.iter().enumerate() {
        let covered = pieces.iter().enumerate().any(|(j, q)| {
            j != i && p.is_inside(q, 1e-9) && (!q.is_inside(p, 1e-9) || j < i)
        });
        if !covered {
            keep.push(p.clone());
        }
    }
    keep
}

/// Fuses two models. A point stays occluded unless one of the models saw it
/// free; only points seen by at least one model are kept. The operation is
/// symmetric up to piece ordering, so it also merges simultaneous cameras.
pub fn integrate_occlusions(current: &OcclusionModel, history: &OcclusionModel) -> OcclusionModel {
    if history.is_empty() {
        return current.clone();
    }
    let mut pieces = Vec::new();
    for p in &current.occlusions {
        for s in &history.occlusions {
            if let Some(x) = p.intersection(s) {
                pieces.push(x);
            }
        }
    }
    for p in &current.occlusions {
        pieces.extend(subtract_views(p, &history.views));
    }
    for s in &history.occlusions {
        pieces.extend(subtract_views(s, &current.views));
    }
    let occlusions = prune_pieces(pieces);

    let mut hulls = current.hulls.clone();
    for h in &history.hulls {
        let c = h.centroid();
        let matched = current.hulls.iter().any(|k| (k.centroid() - c).norm() <= REASSOCIATION_RADIUS);
        if !matched && !current.known_free(&c) {
            hulls.push(h.clone());
        }
    }

    let mut views: Vec<Vec<Halfspace>> = history.views.clone();
    for v in &current.views {
        views.retain(|w| w != v);
        views.push(v.clone());
    }
    if views.len() > VIEW_MEMORY {
        views.drain(..views.len() - VIEW_MEMORY);
    }
    OcclusionModel { hulls, occlusions, views }
}

/// Region hidden behind one robot sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcclusionCone {
    pub apex: Vector3<f64>,
    pub axis: Vector3<f64>,
    pub half_angle: f64,
    /// Distance from the apex to the sphere center.
    pub depth: f64,
    pub radius: f64,
}

impl OcclusionCone {
    /// Inside the cone and not in front of the sphere center.
    pub fn flags(&self, p: &Vector3<f64>) -> bool {
        let v = p - self.apex;
        let n = v.norm();
        if n < self.depth {
            return false;
        }
        let cos = (v.dot(&self.axis) / n).clamp(-1.0, 1.0);
        cos.acos() <= self.half_angle + 1e-12
    }

    /// Square pyramid circumscribing the cone between the sphere's near side
    /// and `far` along the axis.
    pub fn to_polytope(&self, far: f64) -> Option<ConvexPolytope> {
        let near = (self.depth - self.radius).max(1e-6);
        if far <= near {
            return None;
        }
        let helper = if self.axis.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let u = self.axis.cross(&helper).normalize();
        let w = self.axis.cross(&u);
        let t = self.half_angle.tan();
        let mut pts = Vec::with_capacity(8);
        for dist in [near, far] {
            let h = dist * t;
            for (a, b) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                pts.push(self.apex + self.axis * dist + u * (a * h) + w * (b * h));
            }
        }
        ConvexPolytope::from_points(&pts).ok()
    }
}

pub fn dynamic_occlusion_cones(spheres: &[Sphere], camera: &CameraModel) -> Result<Vec<OcclusionCone>, PerceptionError> {
    let apex = camera.origin();
    spheres
        .iter()
        .map(|s| {
            let v = s.center - apex;
            let d = v.norm();
            if d <= s.radius {
                return Err(PerceptionError::CameraInsideSphere { distance: d, radius: s.radius });
            }
            Ok(OcclusionCone { apex, axis: v / d, half_angle: (s.radius / d).asin(), depth: d, radius: s.radius })
        })
        .collect()
}
