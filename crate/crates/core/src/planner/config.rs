//! Planner settings, read from and written to versioned TOML.
//!
//! ```toml
//! format = "c2f-planner"
//! version = 1
//! [spline]       # degree, control_points, collocation
//! [weights]      # acceleration, dexterity, duration, visibility, slack
//! [bounds]       # t_min, t_max, eps_position, eps_orientation, collision_margin
//! [solver]       # outer/inner iteration caps, tolerances, penalty schedule
//! [mpc]          # dt, replan_distance, d_safe, visibility_threshold, final_approach
//! ```
//!
//! Every field has a default, so an empty table keeps the defaults.

use serde::{Deserialize, Serialize};

use super::PlannerError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplineConfig {
    pub degree: usize,
    pub control_points: usize,
    /// Number of collocation intervals; phases are `k / collocation`.
    pub collocation: usize,
}

impl Default for SplineConfig {
    fn default() -> Self {
        SplineConfig { degree: 3, control_points: 10, collocation: 30 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Weights {
    pub acceleration: f64,
    pub dexterity: f64,
    pub duration: f64,
    pub visibility: f64,
    pub slack: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights { acceleration: 1e-2, dexterity: 1e-3, duration: 0.05, visibility: 0.5, slack: 100.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bounds {
    pub t_min: f64,
    pub t_max: f64,
    /// Goal slack bound on each position component (m).
    pub eps_position: f64,
    /// Goal slack bound on orientation (rad); applied to the quaternion
    /// components as `sin(eps / 2)`.
    pub eps_orientation: f64,
    pub collision_margin: f64,
    /// Half-width of the box bounding the object position block.
    pub workspace: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            t_min: 0.5,
            t_max: 30.0,
            eps_position: 0.05,
            eps_orientation: 0.1,
            collision_margin: 0.01,
            workspace: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_outer: usize,
    pub max_inner: usize,
    pub rho_initial: f64,
    pub rho_growth: f64,
    pub rho_max: f64,
    pub eq_tol: f64,
    pub ineq_tol: f64,
    pub optimality_tol: f64,
    /// Solver-side tightening of inequalities so returned points satisfy
    /// the nominal ones well inside `ineq_tol`.
    pub ineq_backoff: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_outer: 40,
            max_inner: 60,
            rho_initial: 10.0,
            rho_growth: 5.0,
            rho_max: 1e8,
            eq_tol: 1e-4,
            ineq_tol: 1e-6,
            optimality_tol: 1e-5,
            ineq_backoff: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcConfig {
    pub dt: f64,
    /// Replanning starts when an obstacle hull comes this close to a robot sphere.
    pub replan_distance: f64,
    pub d_safe: f64,
    /// Normalized visibility score at which the target counts as seen.
    pub visibility_threshold: f64,
    /// Remaining duration under which the plan is executed without re-solving.
    pub final_approach: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig { dt: 0.1, replan_distance: 0.4, d_safe: 0.05, visibility_threshold: 0.5, final_approach: 0.6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub format: String,
    pub version: u32,
    #[serde(default)]
    pub spline: SplineConfig,
    #[serde(default)]
    pub weights: Weights,
    #[serde(default)]
    pub bounds: Bounds,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub mpc: MpcConfig,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            format: "c2f-planner".into(),
            version: 1,
            spline: SplineConfig::default(),
            weights: Weights::default(),
            bounds: Bounds::default(),
            solver: SolverConfig::default(),
            mpc: MpcConfig::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlannerError> {
        let bad = |m: &str| Err(PlannerError::InvalidConfig(m.into()));
        if self.format != "c2f-planner" || self.version != 1 {
            return bad("not a c2f-planner version 1 document");
        }
        let w = &self.weights;
        if [w.acceleration, w.dexterity, w.duration, w.visibility, w.slack].iter().any(|v| !(*v >= 0.0)) {
            return bad("weights must be nonnegative");
        }
        let b = &self.bounds;
        if !(b.t_min > 0.0) || !(b.t_max >= b.t_min) {
            return bad("duration bounds must satisfy 0 < t_min <= t_max");
        }
        if !(b.eps_position >= 0.0) || !(b.eps_orientation >= 0.0) || !(b.collision_margin >= 0.0) {
            return bad("slack bounds and margin must be nonnegative");
        }
        let s = &self.spline;
        if s.degree == 0 || s.control_points <= s.degree || s.collocation == 0 {
            return bad("spline needs degree >= 1, control_points > degree, collocation >= 1");
        }
        if !(self.mpc.dt > 0.0) {
            return bad("mpc dt must be positive");
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, PlannerError> {
        let cfg: PlannerConfig = toml::from_str(text).map_err(|e| PlannerError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("planner config serializes")
    }
}
