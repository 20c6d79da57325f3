//! Scenario files: world, target, cameras, planner settings and events.
//!
//! See `docs/formats.md` for the schema. Poses are `[x, y, z, roll, pitch,
//! yaw]`; boxes are axis aligned `lo`/`hi` corners.

use c2f_core::geometry::pose::pose_from_xyz_rpy;
use c2f_core::geometry::{ConvexPolytope, Pose};
use c2f_core::kinematics::{presets, ClosedChainSystem, SystemState};
use c2f_core::perception::{scenes::look_at, CameraModel, PipelineConfig};
use c2f_core::planner::{LearningConfig, PlannerConfig};
use c2f_core::proxy::GeometricWorld;
use c2f_core::visibility::SamplingConfig;
use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

pub const SCENARIO_FORMAT: &str = "c2f-scenario";
pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl BoxSpec {
    pub fn polytope(&self) -> ConvexPolytope {
        ConvexPolytope::cuboid(Vector3::from(self.lo), Vector3::from(self.hi))
    }

    fn validate(&self, what: &str) -> Result<(), HarnessError> {
        if (0..3).any(|i| !(self.lo[i] < self.hi[i]) || !self.lo[i].is_finite() || !self.hi[i].is_finite()) {
            return Err(HarnessError::InvalidConfig(format!("{what}: box needs finite lo < hi on every axis")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub id: String,
    #[serde(flatten)]
    pub shape: BoxSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSpec {
    pub preset: String,
    pub start_object: [f64; 6],
    /// IK seeds for the two arms at the start pose.
    pub seeds: [Vec<f64>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    /// Marker position, unknown to the robot until detected.
    pub truth: [f64; 3],
    pub estimate: [f64; 3],
    /// Goal object pose relative to the marker: offset and rpy.
    pub goal_offset: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticCameraSpec {
    pub eye: [f64; 3],
    pub look_at: [f64; 3],
    #[serde(default = "default_h_fov")]
    pub h_fov: f64,
    #[serde(default = "default_v_fov")]
    pub v_fov: f64,
    #[serde(default = "default_rows")]
    pub rows: usize,
    #[serde(default = "default_cols")]
    pub cols: usize,
    #[serde(default = "default_range")]
    pub max_range: f64,
}

fn default_h_fov() -> f64 {
    1.0
}
fn default_v_fov() -> f64 {
    0.8
}
fn default_rows() -> usize {
    96
}
fn default_cols() -> usize {
    128
}
fn default_range() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EyeCameraSpec {
    pub arm: usize,
    /// Full horizontal field of view used for marker detection.
    #[serde(default = "default_h_fov")]
    pub h_fov: f64,
    #[serde(default = "default_range")]
    pub max_range: f64,
    #[serde(default = "default_vis_sigma")]
    pub sigma: f64,
    /// Candidate grid around the estimated target.
    #[serde(default = "default_phases")]
    pub phases: usize,
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    #[serde(default = "default_azimuths")]
    pub azimuths: usize,
}

impl EyeCameraSpec {
    pub fn sampling(&self) -> SamplingConfig {
        SamplingConfig { positions: self.phases, radii: self.radii.clone(), azimuths: self.azimuths, ..SamplingConfig::planar() }
    }
}

fn default_phases() -> usize {
    SamplingConfig::planar().positions
}
fn default_radii() -> Vec<f64> {
    SamplingConfig::planar().radii
}
fn default_azimuths() -> usize {
    SamplingConfig::planar().azimuths
}

fn default_vis_sigma() -> f64 {
    0.15
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerceptionSpec {
    pub cluster_eps: f64,
    pub min_pts: usize,
    /// Shadow length behind each hull.
    pub extend: f64,
    /// Extra inflation of perceived obstacles before proxy training.
    pub margin: f64,
}

impl Default for PerceptionSpec {
    fn default() -> Self {
        PerceptionSpec { cluster_eps: 0.05, min_pts: 8, extend: 1.0, margin: 0.02 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearningSpec {
    pub initial_samples: usize,
    pub explore_samples: usize,
    pub verify_samples: usize,
    pub max_rounds: usize,
}

impl Default for LearningSpec {
    fn default() -> Self {
        let d = LearningConfig::default();
        LearningSpec {
            initial_samples: d.initial_samples,
            explore_samples: d.active.explore_samples,
            verify_samples: d.verify_samples,
            max_rounds: d.max_rounds,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReplanningSpec {
    /// Goal slack while evading: position (m) and orientation (rad).
    pub evade_position: f64,
    pub evade_orientation: f64,
    /// Exit once the intruder is this factor beyond the entry distance.
    pub exit_factor: f64,
}

impl Default for ReplanningSpec {
    fn default() -> Self {
        ReplanningSpec { evade_position: 0.15, evade_orientation: 0.3, exit_factor: 1.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventAction {
    /// Insert or move obstacle `id` to `lo`/`hi`.
    Set,
    Remove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub time: f64,
    pub action: EventAction,
    pub id: String,
    #[serde(default)]
    pub lo: Option<[f64; 3]>,
    #[serde(default)]
    pub hi: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub format: String,
    pub version: u32,
    pub name: String,
    /// Mandatory; drives every sampler of the run.
    pub seed: u64,
    pub max_steps: usize,
    pub robot: RobotSpec,
    pub target: TargetSpec,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    pub cameras: Vec<StaticCameraSpec>,
    #[serde(default)]
    pub eye_camera: Option<EyeCameraSpec>,
    #[serde(default)]
    pub perception: PerceptionSpec,
    #[serde(default)]
    pub learning: LearningSpec,
    #[serde(default)]
    pub replanning: ReplanningSpec,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub events: Vec<EventSpec>,
}

/// Names accepted in `robot.preset`.
pub const ROBOT_PRESETS: &[&str] = &["planar-dual-arm"];

pub fn robot_preset(name: &str) -> Result<ClosedChainSystem, HarnessError> {
    match name {
        "planar-dual-arm" => Ok(presets::planar_dual_arm()),
        other => Err(HarnessError::InvalidConfig(format!("unknown robot preset {other:?}"))),
    }
}

fn pose6(v: &[f64; 6]) -> Pose {
    pose_from_xyz_rpy([v[0], v[1], v[2]], [v[3], v[4], v[5]])
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidConfig(m));
        if self.format != SCENARIO_FORMAT || self.version != SCENARIO_VERSION {
            return bad(format!("expected {SCENARIO_FORMAT} version {SCENARIO_VERSION}"));
        }
        if self.name.is_empty() || self.name.chars().any(char::is_whitespace) {
            return bad("name must be a non-empty word".into());
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        if self.robot.preset != "planar-dual-arm" {
            return bad(format!("unknown robot preset {:?}", self.robot.preset));
        }
        let system = self.system()?;
        for (arm, s) in self.robot.seeds.iter().enumerate() {
            if s.len() != system.robots[arm].joint_count() {
                return bad(format!("seed {arm} has {} joints", s.len()));
            }
        }
        for o in &self.obstacles {
            o.shape.validate(&o.id)?;
        }
        if self.cameras.is_empty() {
            return bad("at least one static camera is required".into());
        }
        for c in &self.cameras {
            self.static_camera(c, 0)?;
        }
        if let Some(e) = &self.eye_camera {
            if e.arm > 1 {
                return bad("eye camera arm must be 0 or 1".into());
            }
            if !(e.h_fov > 0.0 && e.h_fov < std::f64::consts::PI) || !(e.max_range > 0.0) || !(e.sigma > 0.0) {
                return bad("eye camera needs fov in (0, pi), positive range and sigma".into());
            }
            if e.phases == 0 || e.azimuths == 0 || e.radii.is_empty() || e.radii.iter().any(|r| !(*r > 0.0)) {
                return bad("eye camera sampling needs phases, azimuths and positive radii".into());
            }
        }
        let p = &self.perception;
        if !(p.cluster_eps > 0.0) || p.min_pts == 0 || !(p.extend > 0.0) || !(p.margin >= 0.0) {
            return bad("perception needs eps > 0, min_pts >= 1, extend > 0, margin >= 0".into());
        }
        if self.learning.initial_samples == 0 || self.learning.verify_samples == 0 {
            return bad("learning sample counts must be positive".into());
        }
        let r = &self.replanning;
        if !(r.evade_position >= 0.0) || !(r.evade_orientation >= 0.0) || !(r.exit_factor >= 1.0) {
            return bad("replanning needs non-negative slack and exit_factor >= 1".into());
        }
        self.planner.validate().map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        let mut last = f64::NEG_INFINITY;
        for e in &self.events {
            if !(e.time >= last) || !e.time.is_finite() {
                return bad("events must have finite, non-decreasing times".into());
            }
            last = e.time;
            if e.action == EventAction::Set {
                let (Some(lo), Some(hi)) = (e.lo, e.hi) else {
                    return bad(format!("set event for {:?} needs lo and hi", e.id));
                };
                BoxSpec { lo, hi }.validate(&e.id)?;
            }
        }
        Ok(())
    }

    pub fn system(&self) -> Result<ClosedChainSystem, HarnessError> {
        robot_preset(&self.robot.preset)
    }

    pub fn start_state(&self) -> Result<SystemState, HarnessError> {
        let sys = self.system()?;
        let seeds = [DVector::from_column_slice(&self.robot.seeds[0]), DVector::from_column_slice(&self.robot.seeds[1])];
        Ok(sys.state_for_object(&pose6(&self.robot.start_object), [&seeds[0], &seeds[1]])?)
    }

    /// Goal object pose for a marker at `marker`.
    pub fn goal_for(&self, marker: &Vector3<f64>) -> Pose {
        let mut g = pose6(&self.target.goal_offset);
        g.translation.vector += marker;
        g
    }

    pub fn true_goal(&self) -> Pose {
        self.goal_for(&Vector3::from(self.target.truth))
    }

    pub fn estimated_goal(&self) -> Pose {
        self.goal_for(&Vector3::from(self.target.estimate))
    }

    fn static_camera(&self, c: &StaticCameraSpec, id: usize) -> Result<CameraModel, HarnessError> {
        let pose = look_at(Vector3::from(c.eye), Vector3::from(c.look_at));
        CameraModel::new(id, pose, c.h_fov, c.v_fov, c.rows, c.cols, c.max_range)
            .map_err(|e| HarnessError::InvalidConfig(e.to_string()))
    }

    pub fn static_cameras(&self) -> Result<Vec<CameraModel>, HarnessError> {
        self.cameras.iter().enumerate().map(|(i, c)| self.static_camera(c, i)).collect()
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            eps: self.perception.cluster_eps,
            min_pts: self.perception.min_pts,
            extend: self.perception.extend,
            ..PipelineConfig::default()
        }
    }

    pub fn learning_config(&self) -> LearningConfig {
        let mut l = LearningConfig {
            initial_samples: self.learning.initial_samples,
            verify_samples: self.learning.verify_samples,
            max_rounds: self.learning.max_rounds,
            ..LearningConfig::default()
        };
        l.active.explore_samples = self.learning.explore_samples;
        l
    }

    /// Ground-truth obstacles with their ids at simulated time `t`.
    pub fn world_at(&self, t: f64) -> Vec<(String, ConvexPolytope)> {
        let mut items: Vec<(String, ConvexPolytope)> =
            self.obstacles.iter().map(|o| (o.id.clone(), o.shape.polytope())).collect();
        for e in self.events.iter().take_while(|e| e.time <= t + 1e-9) {
            items.retain(|(id, _)| id != &e.id);
            if let (EventAction::Set, Some(lo), Some(hi)) = (&e.action, e.lo, e.hi) {
                items.push((e.id.clone(), BoxSpec { lo, hi }.polytope()));
            }
        }
        items
    }

    pub fn geometric_world_at(&self, t: f64) -> GeometricWorld {
        GeometricWorld::from_polytopes(self.world_at(t).into_iter().map(|(_, p)| p).collect())
    }

    /// True when an event script moves obstacles around.
    pub fn has_events(&self) -> bool {
        !self.events.is_empty()
    }
}
