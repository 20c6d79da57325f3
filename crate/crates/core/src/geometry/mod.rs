//! Shared geometric primitives.

pub mod hull;
pub mod polytope;
pub mod pose;

pub use polytope::{ConvexPolytope, Halfspace};
pub use pose::{pose_error, pose_from_array, pose_to_array, rotation_error, Pose, POSE_DIM};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point set is degenerate (affine rank {rank})")]
    Degenerate { rank: usize },
    #[error("empty point set")]
    Empty,
    #[error("non-finite coordinate")]
    NonFinite,
}

/// Posed collision sphere in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub center: nalgebra::Vector3<f64>,
    pub radius: f64,
}
