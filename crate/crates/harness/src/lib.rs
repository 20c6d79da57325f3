//! Desk-scale scenario runner for the closed-chain planner: scripted
//! worlds, the perceive-learn-plan-step loop, ground-truth replay audits
//! and SVG plots.

pub mod audit;
pub mod config;
pub mod plot;
pub mod report;
pub mod run;
pub mod sense;

pub use audit::{replay_audit, replay_audit_timed, AuditConfig, AuditReport, Violation, ViolationKind};
pub use config::ScenarioConfig;
pub use report::{RunReport, StepRecord, Verdict};
pub use run::{run_scenario, RunOptions, RunOutput, RunSummary};

use c2f_core::kinematics::KinematicsError;
use c2f_core::perception::PerceptionError;
use c2f_core::planner::PlannerError;
use c2f_core::proxy::ProxyError;
use c2f_core::visibility::VisibilityError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("plot error: {0}")]
    Plot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Proxy(#[from] ProxyError),
    #[error(transparent)]
    Visibility(#[from] VisibilityError),
}
