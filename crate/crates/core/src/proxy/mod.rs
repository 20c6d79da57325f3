//! Learned collision proxy: one kernel-perceptron support set per collision
//! group, scored with the polyharmonic FK kernel.

pub mod active;
pub mod benchmark;
pub mod dataset;
pub mod detector;
pub mod kernel;
pub mod support;
pub mod world;

pub use active::{active_update, ActiveConfig, ActiveReport, BiasedSampler};
pub use dataset::LabeledDataset;
pub use detector::{CollisionDetector, GroupScores};
pub use kernel::{fk_kernel, fk_similarity_matrix, polyharmonic_kernel};
pub use support::{accuracy, refit, train, GramPruneConfig, SupportSet, TrainConfig, TrainReport};
pub use world::{ground_truth_collision, robot_clearance, GeometricWorld, Obstacle};

use thiserror::Error;

use crate::kinematics::KinematicsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProxyError {
    #[error("kernel order must be at least 1, got {0}")]
    InvalidKernelOrder(u32),
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("labels must be +1 or -1")]
    InvalidLabel,
    #[error("collision group {0} does not exist")]
    InvalidGroup(usize),
    #[error("collision group {0} has no control points")]
    EmptyControlPoints(usize),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("support set is empty")]
    EmptySupport,
    #[error("weight fit is singular")]
    SingularFit,
    #[error("sampler produced no candidates")]
    SamplerExhausted,
    #[error("cannot parse support set: {0}")]
    Parse(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}
