//! Serial-chain robot description and its text file format.
//!
//! The on-disk format is TOML with a `format = "c2f-robot"` tag and an
//! integer `version`; see `docs/formats.md` for the full schema.

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::KinematicsError;
use crate::geometry::pose::{pose_from_xyz_rpy, Pose};

pub const ROBOT_FORMAT_TAG: &str = "c2f-robot";
pub const ROBOT_FORMAT_VERSION: u32 = 1;

/// Revolute joint: fixed transform from the parent link frame followed by a
/// rotation about `axis` (unit, joint frame).
#[derive(Debug, Clone)]
pub struct Joint {
    pub origin: Pose,
    pub axis: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionSphere {
    /// Link index; 0 is the base link, `i` is the link moved by joint `i`.
    pub link: usize,
    pub center: Vector3<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlPoint {
    pub link: usize,
    pub point: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionGroup {
    pub name: String,
    pub links: Vec<usize>,
    /// Indices into `RobotModel::fk_control_points`.
    pub control_points: Vec<usize>,
    pub sv_budget: usize,
}

#[derive(Debug, Clone)]
pub struct RobotModel {
    pub name: String,
    /// World pose of the base link.
    pub base: Pose,
    pub joints: Vec<Joint>,
    /// Last link frame to end-effector frame.
    pub ee_offset: Pose,
    pub q_min: DVector<f64>,
    pub q_max: DVector<f64>,
    pub v_limit: DVector<f64>,
    pub a_limit: DVector<f64>,
    pub collision_spheres: Vec<CollisionSphere>,
    pub fk_control_points: Vec<ControlPoint>,
    pub groups: Vec<CollisionGroup>,
}

impl RobotModel {
    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    pub fn link_count(&self) -> usize {
        self.joints.len() + 1
    }

    /// Group id that owns `link`.
    pub fn group_of(&self, link: usize) -> Option<usize> {
        self.groups.iter().position(|g| g.links.contains(&link))
    }

    pub fn group_spheres(&self, group: usize) -> Vec<CollisionSphere> {
        let links = &self.groups[group].links;
        self.collision_spheres
            .iter()
            .filter(|s| links.contains(&s.link))
            .copied()
            .collect()
    }

    pub fn group_control_points(&self, group: usize) -> Vec<ControlPoint> {
        self.groups[group]
            .control_points
            .iter()
            .map(|&i| self.fk_control_points[i])
            .collect()
    }

    /// Joint-range center, used by the dexterity cost.
    pub fn q_mid(&self) -> DVector<f64> {
        (&self.q_min + &self.q_max) * 0.5
    }

    pub fn clamp(&self, q: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            q.len(),
            q.iter().enumerate().map(|(i, v)| v.clamp(self.q_min[i], self.q_max[i])),
        )
    }

    pub fn within_limits(&self, q: &DVector<f64>, tol: f64) -> bool {
        q.iter()
            .enumerate()
            .all(|(i, v)| *v >= self.q_min[i] - tol && *v <= self.q_max[i] + tol)
    }

    pub fn check_dim(&self, q: &DVector<f64>) -> Result<(), KinematicsError> {
        if q.len() != self.joint_count() {
            return Err(KinematicsError::DimensionMismatch {
                expected: self.joint_count(),
                got: q.len(),
            });
        }
        Ok(())
    }

    /// Single group covering every link, using the given control points.
    /// This is the whole-robot kernel baseline.
    pub fn unified(&self, control_points: Vec<usize>, sv_budget: usize) -> RobotModel {
        let mut m = self.clone();
        m.groups = vec![CollisionGroup {
            name: "whole-robot".into(),
            links: (0..self.link_count()).collect(),
            control_points,
            sv_budget,
        }];
        m
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        let n = self.joint_count();
        let bad = |msg: String| Err(KinematicsError::InvalidModel(msg));
        if n == 0 {
            return bad("no joints".into());
        }
        for v in [&self.q_min, &self.q_max, &self.v_limit, &self.a_limit] {
            if v.len() != n {
                return bad(format!("limit vector of length {} for {} joints", v.len(), n));
            }
        }
        for i in 0..n {
            if self.q_min[i] >= self.q_max[i] {
                return bad(format!("joint {}: q_min >= q_max", i + 1));
            }
            if self.v_limit[i] <= 0.0 || self.a_limit[i] <= 0.0 {
                return bad(format!("joint {}: non-positive rate limit", i + 1));
            }
            if (self.joints[i].axis.norm() - 1.0).abs() > 1e-9 {
                return bad(format!("joint {}: axis not unit length", i + 1));
            }
        }
        for s in &self.collision_spheres {
            if s.radius <= 0.0 {
                return bad(format!("sphere on link {} has radius {}", s.link, s.radius));
            }
            if s.link > n {
                return bad(format!("sphere on unknown link {}", s.link));
            }
        }
        for c in &self.fk_control_points {
            if c.link > n {
                return bad(format!("control point on unknown link {}", c.link));
            }
        }
        for link in 0..=n {
            let owners = self.groups.iter().filter(|g| g.links.contains(&link)).count();
            if owners != 1 {
                return bad(format!("link {} belongs to {} groups", link, owners));
            }
        }
        for g in &self.groups {
            if g.control_points.is_empty() {
                return bad(format!("group {} has no control points", g.name));
            }
            if g.control_points.iter().any(|&i| i >= self.fk_control_points.len()) {
                return bad(format!("group {} references a missing control point", g.name));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, KinematicsError> {
        let file: RobotFile =
            toml::from_str(text).map_err(|e| KinematicsError::Parse(e.to_string()))?;
        file.into_model()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&RobotFile::from_model(self)).expect("robot model serializes")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FrameEntry {
    xyz: [f64; 3],
    #[serde(default)]
    rpy: [f64; 3],
}

impl FrameEntry {
    fn pose(&self) -> Pose {
        pose_from_xyz_rpy(self.xyz, self.rpy)
    }

    fn from_pose(p: &Pose) -> Self {
        let (r, pi, y) = p.rotation.euler_angles();
        let t = p.translation.vector;
        FrameEntry { xyz: [t.x, t.y, t.z], rpy: [r, pi, y] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct JointEntry {
    xyz: [f64; 3],
    #[serde(default)]
    rpy: [f64; 3],
    axis: [f64; 3],
    q_min: f64,
    q_max: f64,
    v_limit: f64,
    a_limit: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SphereEntry {
    link: usize,
    center: [f64; 3],
    radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PointEntry {
    link: usize,
    point: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GroupEntry {
    name: String,
    links: Vec<usize>,
    control_points: Vec<usize>,
    sv_budget: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RobotFile {
    format: String,
    version: u32,
    name: String,
    base: Option<FrameEntry>,
    joints: Vec<JointEntry>,
    ee: FrameEntry,
    #[serde(default)]
    spheres: Vec<SphereEntry>,
    #[serde(default)]
    control_points: Vec<PointEntry>,
    #[serde(default)]
    groups: Vec<GroupEntry>,
}

impl RobotFile {
    fn into_model(self) -> Result<RobotModel, KinematicsError> {
        if self.format != ROBOT_FORMAT_TAG {
            return Err(KinematicsError::Parse(format!("unexpected format tag {:?}", self.format)));
        }
        if self.version != ROBOT_FORMAT_VERSION {
            return Err(KinematicsError::Parse(format!("unsupported version {}", self.version)));
        }
        let n = self.joints.len();
        let v = |f: fn(&JointEntry) -> f64| DVector::from_iterator(n, self.joints.iter().map(f));
        let model = RobotModel {
            name: self.name.clone(),
            base: self.base.as_ref().map(FrameEntry::pose).unwrap_or_else(Pose::identity),
            joints: self
                .joints
                .iter()
                .map(|j| {
                    let axis = Vector3::from(j.axis);
                    Joint { origin: pose_from_xyz_rpy(j.xyz, j.rpy), axis: axis / axis.norm() }
                })
                .collect(),
            ee_offset: self.ee.pose(),
            q_min: v(|j| j.q_min),
            q_max: v(|j| j.q_max),
            v_limit: v(|j| j.v_limit),
            a_limit: v(|j| j.a_limit),
            collision_spheres: self
                .spheres
                .iter()
                .map(|s| CollisionSphere { link: s.link, center: s.center.into(), radius: s.radius })
                .collect(),
            fk_control_points: self
                .control_points
                .iter()
                .map(|c| ControlPoint { link: c.link, point: c.point.into() })
                .collect(),
            groups: self
                .groups
                .iter()
                .map(|g| CollisionGroup {
                    name: g.name.clone(),
                    links: g.links.clone(),
                    control_points: g.control_points.clone(),
                    sv_budget: g.sv_budget,
                })
                .collect(),
        };
        model.validate()?;
        Ok(model)
    }

    fn from_model(m: &RobotModel) -> Self {
        RobotFile {
            format: ROBOT_FORMAT_TAG.into(),
            version: ROBOT_FORMAT_VERSION,
            name: m.name.clone(),
            base: Some(FrameEntry::from_pose(&m.base)),
            joints: m
                .joints
                .iter()
                .enumerate()
                .map(|(i, j)| {
                    let f = FrameEntry::from_pose(&j.origin);
                    JointEntry {
                        xyz: f.xyz,
                        rpy: f.rpy,
                        axis: j.axis.into(),
                        q_min: m.q_min[i],
                        q_max: m.q_max[i],
                        v_limit: m.v_limit[i],
                        a_limit: m.a_limit[i],
                    }
                })
                .collect(),
            ee: FrameEntry::from_pose(&m.ee_offset),
            spheres: m
                .collision_spheres
                .iter()
                .map(|s| SphereEntry { link: s.link, center: s.center.into(), radius: s.radius })
                .collect(),
            control_points: m
                .fk_control_points
                .iter()
                .map(|c| PointEntry { link: c.link, point: c.point.into() })
                .collect(),
            groups: m
                .groups
                .iter()
                .map(|g| GroupEntry {
                    name: g.name.clone(),
                    links: g.links.clone(),
                    control_points: g.control_points.clone(),
                    sv_budget: g.sv_budget,
                })
                .collect(),
        }
    }
}
