//! Coordinated dual-arm motion planning with learned collision proxies and
//! active perception.

pub mod bspline;
pub mod geometry;
pub mod kinematics;
pub mod perception;
pub mod planner;
pub mod proxy;
pub mod visibility;
