//! Closed-chain trajectory optimization over B-spline control points and the
//! shrinking-horizon loop that re-solves it as perception updates arrive.

pub mod config;
pub mod learning;
pub mod mpc;
pub mod ocp;
pub mod solver;
pub mod table;

pub use config::PlannerConfig;
pub use learning::{path_clearance, refresh_proxies, sample_states, solve_verified, train_arm_proxies, LearningConfig, VerifiedSolve};
pub use mpc::{
    replanning_mode_enter, replanning_mode_exit, shifted_warm_start, shrinking_horizon_step, LogEntry, MotionReference,
    MpcLoopState, MpcMode, PerceptionUpdate, StepOutcome,
};
pub use ocp::{build_ocp, chain_residual_at, ArmProxy, CostTerm, Layout, Ocp, PlannerProblem, PlannerSolution, VisibilityTerm};
pub use solver::{solve, solve_with_duals, Duals, Evaluation, Nlp, SolveStatus, SolverDiagnostics};
pub use table::{group_scores, TrajectoryRow, TrajectoryTable};

use thiserror::Error;

use crate::bspline::BSplineError;
use crate::kinematics::KinematicsError;
use crate::proxy::ProxyError;
use crate::visibility::VisibilityError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("invalid planner config: {0}")]
    InvalidConfig(String),
    #[error("invalid planner problem: {0}")]
    InvalidProblem(String),
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no previous solution to warm start from")]
    NoSolution,
    #[error("cannot parse trajectory table: {0}")]
    Parse(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Proxy(#[from] ProxyError),
    #[error(transparent)]
    Visibility(#[from] VisibilityError),
    #[error(transparent)]
    BSpline(#[from] BSplineError),
}
