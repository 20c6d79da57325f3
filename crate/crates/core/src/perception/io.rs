//! Versioned text formats for point clouds and scripted scenes.
//!
//! A cloud file is line oriented:
//!
//! ```text
//! c2f-cloud 1
//! camera <id>
//! timestamp <seconds>
//! pose <px> <py> <pz> <qw> <qx> <qy> <qz>
//! points <n>
//! <x> <y> <z>        (n lines)
//! ```
//!
//! Numbers are written with nine decimals so files are byte-stable.
//! Scenes are TOML documents with `format = "c2f-scene"` and `version = 1`.

use std::fmt::Write as _;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::camera::CameraModel;
use super::{PerceptionError, PointCloud};
use crate::geometry::{pose_from_array, pose_to_array, ConvexPolytope, Pose};
use crate::proxy::GeometricWorld;

const CLOUD_MAGIC: &str = "c2f-cloud 1";

fn parse_err(msg: impl Into<String>) -> PerceptionError {
    PerceptionError::Parse(msg.into())
}

pub fn cloud_to_text(cloud: &PointCloud, camera_pose: &Pose) -> String {
    let mut s = String::new();
    writeln!(s, "{CLOUD_MAGIC}").unwrap();
    writeln!(s, "camera {}", cloud.source).unwrap();
    writeln!(s, "timestamp {:.9}", cloud.timestamp).unwrap();
    let p = pose_to_array(camera_pose);
    writeln!(s, "pose {}", p.iter().map(|x| format!("{x:.9}")).collect::<Vec<_>>().join(" ")).unwrap();
    writeln!(s, "points {}", cloud.points.len()).unwrap();
    for q in &cloud.points {
        writeln!(s, "{:.9} {:.9} {:.9}", q.x, q.y, q.z).unwrap();
    }
    s
}

fn floats(line: &str, key: &str, n: usize) -> Result<Vec<f64>, PerceptionError> {
    let rest = line.strip_prefix(key).ok_or_else(|| parse_err(format!("expected `{key}`")))?;
    let v: Vec<f64> = rest
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| parse_err(format!("bad number `{t}`"))))
        .collect::<Result<_, _>>()?;
    if v.len() != n {
        return Err(parse_err(format!("`{}` expects {n} values", key.trim())));
    }
    Ok(v)
}

pub fn cloud_from_text(text: &str) -> Result<(PointCloud, Pose), PerceptionError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let mut next = |what: &str| lines.next().ok_or_else(|| parse_err(format!("missing {what}")));
    if next("header")?.trim() != CLOUD_MAGIC {
        return Err(parse_err("not a c2f-cloud version 1 file"));
    }
    let source = next("camera")?
        .strip_prefix("camera ")
        .and_then(|t| t.trim().parse::<usize>().ok())
        .ok_or_else(|| parse_err("bad camera line"))?;
    let timestamp = floats(next("timestamp")?, "timestamp ", 1)?[0];
    let pose = pose_from_array(&floats(next("pose")?, "pose ", 7)?);
    let n = next("points")?
        .strip_prefix("points ")
        .and_then(|t| t.trim().parse::<usize>().ok())
        .ok_or_else(|| parse_err("bad points line"))?;
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let v = floats(next("point")?, "", 3)?;
        points.push(Vector3::new(v[0], v[1], v[2]));
    }
    if lines.next().is_some() {
        return Err(parse_err("trailing data after points"));
    }
    Ok((PointCloud::new(points, source, timestamp)?, pose))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObstacle {
    #[serde(default)]
    pub category: usize,
    pub vertices: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneCamera {
    pub id: usize,
    /// `[px, py, pz, qw, qx, qy, qz]`.
    pub pose: [f64; 7],
    pub h_fov: f64,
    pub v_fov: f64,
    pub rows: usize,
    pub cols: usize,
    pub max_range: f64,
}

/// Arrow for plotting, e.g. a candidate camera pose and its validity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMarker {
    pub position: [f64; 3],
    pub direction: [f64; 3],
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub format: String,
    pub version: u32,
    #[serde(default)]
    pub obstacles: Vec<SceneObstacle>,
    #[serde(default)]
    pub cameras: Vec<SceneCamera>,
    #[serde(default)]
    pub markers: Vec<SceneMarker>,
}

impl Default for Scene {
    fn default() -> Self {
        Scene { format: "c2f-scene".into(), version: 1, obstacles: vec![], cameras: vec![], markers: vec![] }
    }
}

impl SceneCamera {
    pub fn from_camera(c: &CameraModel) -> Self {
        SceneCamera {
            id: c.id,
            pose: pose_to_array(&c.pose),
            h_fov: c.h_fov,
            v_fov: c.v_fov,
            rows: c.rows,
            cols: c.cols,
            max_range: c.max_range,
        }
    }

    pub fn to_camera(&self) -> Result<CameraModel, PerceptionError> {
        CameraModel::new(self.id, pose_from_array(&self.pose), self.h_fov, self.v_fov, self.rows, self.cols, self.max_range)
    }
}

impl Scene {
    pub fn from_world(world: &GeometricWorld, cameras: &[CameraModel]) -> Self {
        let obstacles = world
            .obstacles
            .iter()
            .map(|o| SceneObstacle {
                category: o.category,
                vertices: o.polytope.vertices().iter().map(|v| [v.x, v.y, v.z]).collect(),
            })
            .collect();
        Scene { obstacles, cameras: cameras.iter().map(SceneCamera::from_camera).collect(), ..Scene::default() }
    }

    pub fn world(&self) -> Result<GeometricWorld, PerceptionError> {
        let mut w = GeometricWorld::new(self.obstacles.iter().map(|o| o.category + 1).max().unwrap_or(1));
        for o in &self.obstacles {
            let pts: Vec<Vector3<f64>> = o.vertices.iter().map(|v| Vector3::from(*v)).collect();
            w.push(ConvexPolytope::from_points(&pts)?, o.category);
        }
        Ok(w)
    }

    pub fn cameras(&self) -> Result<Vec<CameraModel>, PerceptionError> {
        self.cameras.iter().map(SceneCamera::to_camera).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, PerceptionError> {
        let s: Scene = toml::from_str(text).map_err(|e| parse_err(e.to_string()))?;
        if s.format != "c2f-scene" || s.version != 1 {
            return Err(parse_err("not a c2f-scene version 1 document"));
        }
        Ok(s)
    }
}
