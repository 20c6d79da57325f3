//! Trajectory tables: sampled states, derivatives and proxy scores as text.
//!
//! ```text
//! c2f-trajectory 1
//! joints <n_a> <n_b>
//! scores <k>
//! rows <r>
//! <t> <s> <z * dim> <zd * dim> <zdd * dim> <score * k>
//! ```
//!
//! Numbers use a fixed `{:.9e}` format so equal runs give equal bytes.

use nalgebra::DVector;

use super::ocp::{ArmProxy, PlannerSolution};
use super::PlannerError;
use crate::geometry::pose::POSE_DIM;

pub const TABLE_TAG: &str = "c2f-trajectory";
pub const TABLE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub time: f64,
    pub phase: f64,
    pub z: DVector<f64>,
    pub zd: DVector<f64>,
    pub zdd: DVector<f64>,
    /// Per arm and group: the largest category score.
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub joints: [usize; 2],
    pub score_columns: usize,
    pub rows: Vec<TrajectoryRow>,
}

/// Largest category score of every group of every proxy at state `z`.
pub fn group_scores(proxies: &[ArmProxy], joints: [usize; 2], z: &DVector<f64>) -> Result<Vec<f64>, PlannerError> {
    let mut out = Vec::new();
    for (arm, p) in proxies.iter().enumerate() {
        let off = if arm == 0 { 0 } else { joints[0] };
        let q = z.rows(off, joints[arm]).into_owned();
        for s in p.detector.scores(&p.model, &q)? {
            out.push(s.max());
        }
    }
    Ok(out)
}

impl TrajectoryTable {
    pub fn new(joints: [usize; 2], score_columns: usize) -> Self {
        TrajectoryTable { joints, score_columns, rows: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.joints[0] + self.joints[1] + POSE_DIM
    }

    /// `samples + 1` rows over the whole solution, times offset by `t0`.
    pub fn from_solution(
        solution: &PlannerSolution,
        samples: usize,
        proxies: &[ArmProxy],
        t0: f64,
    ) -> Result<Self, PlannerError> {
        let traj = solution.trajectory();
        let cols: usize = proxies.iter().map(|p| p.detector.sets.len()).sum();
        let mut table = TrajectoryTable::new(solution.joints, cols);
        for i in 0..=samples {
            let s = i as f64 / samples.max(1) as f64;
            let ts = traj.time_scaled_samples(s)?;
            let scores = group_scores(proxies, solution.joints, &ts.z)?;
            table.rows.push(TrajectoryRow { time: t0 + s * traj.duration(), phase: s, z: ts.z, zd: ts.zd, zdd: ts.zdd, scores });
        }
        Ok(table)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{TABLE_TAG} {TABLE_VERSION}\njoints {} {}\nscores {}\nrows {}\n",
            self.joints[0],
            self.joints[1],
            self.score_columns,
            self.rows.len()
        );
        for r in &self.rows {
            let mut fields = vec![format!("{:.9e}", r.time), format!("{:.9e}", r.phase)];
            for v in r.z.iter().chain(r.zd.iter()).chain(r.zdd.iter()).chain(r.scores.iter()) {
                fields.push(format!("{v:.9e}"));
            }
            out.push_str(&fields.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, PlannerError> {
        let bad = |m: String| PlannerError::Parse(m);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut header = |key: &str| -> Result<Vec<String>, PlannerError> {
            let line = lines.next().ok_or_else(|| bad(format!("missing {key} line")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(bad(format!("expected {key} line, got {line:?}")));
            }
            Ok(parts.map(str::to_string).collect())
        };
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad count {s:?}")));
        let tag = header(TABLE_TAG)?;
        if tag.len() != 1 || tag[0] != TABLE_VERSION.to_string() {
            return Err(bad(format!("unsupported version {tag:?}")));
        }
        let j = header("joints")?;
        if j.len() != 2 {
            return Err(bad("joints needs two counts".into()));
        }
        let joints = [num(&j[0])?, num(&j[1])?];
        let k = header("scores")?;
        let score_columns = num(k.first().ok_or_else(|| bad("scores needs a count".into()))?)?;
        let r = header("rows")?;
        let n_rows = num(r.first().ok_or_else(|| bad("rows needs a count".into()))?)?;
        let mut table = TrajectoryTable::new(joints, score_columns);
        let dim = table.dim();
        let width = 2 + 3 * dim + score_columns;
        for line in lines {
            let vals = line
                .split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|_| bad(format!("bad number {v:?}"))))
                .collect::<Result<Vec<f64>, _>>()?;
            if vals.len() != width {
                return Err(bad(format!("row has {} fields, expected {width}", vals.len())));
            }
            let seg = |a: usize| DVector::from_column_slice(&vals[a..a + dim]);
            table.rows.push(TrajectoryRow {
                time: vals[0],
                phase: vals[1],
                z: seg(2),
                zd: seg(2 + dim),
                zdd: seg(2 + 2 * dim),
                scores: vals[2 + 3 * dim..].to_vec(),
            });
        }
        if table.rows.len() != n_rows {
            return Err(bad(format!("expected {n_rows} rows, found {}", table.rows.len())));
        }
        Ok(table)
    }
}
