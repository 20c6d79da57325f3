//! Robot models, forward and inverse kinematics, and the dual-arm closed chain.

pub mod chain;
pub mod closed_chain;
pub mod ik;
pub mod model;
pub mod presets;

pub use chain::{
    control_point_positions, ee_jacobian, forward_kinematics, jacobian, point_jacobian,
    posed_spheres, FkResult,
};
pub use closed_chain::{ClosedChainSystem, SystemState};
pub use ik::{random_configuration, solve_ik, solve_ik_with_restarts, IkOptions};
pub use model::{CollisionGroup, CollisionSphere, ControlPoint, Joint, RobotModel};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("robot index {0} is not 0 or 1")]
    InvalidRobotIndex(usize),
    #[error("IK did not converge in {iterations} iterations (residual {residual:.3e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("target at {distance:.3} m exceeds reach {reach:.3} m")]
    OutOfReach { distance: f64, reach: f64 },
    #[error("invalid robot model: {0}")]
    InvalidModel(String),
    #[error("cannot parse robot model: {0}")]
    Parse(String),
}
