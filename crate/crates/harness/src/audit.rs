//! Ground-truth replay of a trajectory table.
//!
//! Joint motion between consecutive rows is rebuilt by cubic Hermite
//! interpolation of the stored positions and velocities and checked at
//! `oversample` points per interval: sphere clearance to the world, the
//! closed-chain residual and the joint limits. Velocity and acceleration
//! limits are checked on the stored rows. The world may change with time;
//! each sample is checked against the world at its own time.

use c2f_core::kinematics::ClosedChainSystem;
use c2f_core::planner::TrajectoryTable;
use c2f_core::proxy::GeometricWorld;
use nalgebra::DVector;

use crate::sense::system_spheres;
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditConfig {
    pub oversample: usize,
    pub chain_tolerance: f64,
    pub limit_tolerance: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig { oversample: 10, chain_tolerance: 1e-3, limit_tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Collision,
    ChainResidual,
    PositionLimit,
    VelocityLimit,
    AccelerationLimit,
}

impl ViolationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ViolationKind::Collision => "collision",
            ViolationKind::ChainResidual => "chain-residual",
            ViolationKind::PositionLimit => "position-limit",
            ViolationKind::VelocityLimit => "velocity-limit",
            ViolationKind::AccelerationLimit => "acceleration-limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub time: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub samples: usize,
    /// Smallest sphere clearance at each stored row.
    pub row_clearance: Vec<f64>,
    pub min_clearance: f64,
    pub max_chain_residual: f64,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "c2f-audit 1\nsamples {}\nmin_clearance {:.9e}\nmax_chain_residual {:.9e}\nviolations {}\n",
            self.samples,
            self.min_clearance,
            self.max_chain_residual,
            self.violations.len()
        );
        for v in &self.violations {
            out.push_str(&format!("{} {:.9e} {:.9e}\n", v.kind.as_str(), v.time, v.value));
        }
        out
    }
}

fn hermite(a: &DVector<f64>, va: &DVector<f64>, b: &DVector<f64>, vb: &DVector<f64>, h: f64, s: f64) -> DVector<f64> {
    let s2 = s * s;
    let s3 = s2 * s;
    a * (2.0 * s3 - 3.0 * s2 + 1.0) + va * (h * (s3 - 2.0 * s2 + s)) + b * (-2.0 * s3 + 3.0 * s2) + vb * (h * (s3 - s2))
}

/// Smallest clearance of every system sphere to `world` at joint vector `q`.
pub fn state_clearance(system: &ClosedChainSystem, world: &GeometricWorld, q: &[DVector<f64>; 2]) -> Result<f64, HarnessError> {
    let object = system.object_pose(0, &q[0])?;
    let state = c2f_core::kinematics::SystemState { q: q.clone(), object };
    let spheres = system_spheres(system, &state)?;
    Ok(spheres.iter().map(|s| world.sphere_clearance(s, None)).fold(f64::INFINITY, f64::min))
}

pub fn replay_audit(
    table: &TrajectoryTable,
    world: &GeometricWorld,
    system: &ClosedChainSystem,
    cfg: &AuditConfig,
) -> Result<AuditReport, HarnessError> {
    replay_audit_timed(table, &|_| world.clone(), system, cfg)
}

pub fn replay_audit_timed(
    table: &TrajectoryTable,
    world_at: &dyn Fn(f64) -> GeometricWorld,
    system: &ClosedChainSystem,
    cfg: &AuditConfig,
) -> Result<AuditReport, HarnessError> {
    if cfg.oversample == 0 {
        return Err(HarnessError::InvalidConfig("oversample must be positive".into()));
    }
    let n = [system.robots[0].joint_count(), system.robots[1].joint_count()];
    if table.joints != n {
        return Err(HarnessError::InvalidConfig(format!("table joints {:?} do not match the robot {:?}", table.joints, n)));
    }
    let nj = n[0] + n[1];
    let split = |v: &DVector<f64>| [v.rows(0, n[0]).into_owned(), v.rows(n[0], n[1]).into_owned()];
    let mut report = AuditReport {
        samples: 0,
        row_clearance: Vec::with_capacity(table.rows.len()),
        min_clearance: f64::INFINITY,
        max_chain_residual: 0.0,
        violations: Vec::new(),
    };
    let tol = cfg.limit_tolerance;
    let check = |t: f64, joints: &DVector<f64>, report: &mut AuditReport| -> Result<f64, HarnessError> {
        let q = split(joints);
        let clearance = state_clearance(system, &world_at(t), &q)?;
        let chain = system.chain_residual(&q[0], &q[1])?.amax();
        report.samples += 1;
        report.min_clearance = report.min_clearance.min(clearance);
        report.max_chain_residual = report.max_chain_residual.max(chain);
        if clearance < 0.0 {
            report.violations.push(Violation { kind: ViolationKind::Collision, time: t, value: clearance });
        }
        if chain > cfg.chain_tolerance {
            report.violations.push(Violation { kind: ViolationKind::ChainResidual, time: t, value: chain });
        }
        for (arm, qa) in q.iter().enumerate() {
            let r = &system.robots[arm];
            for i in 0..qa.len() {
                let over = (qa[i] - r.q_max[i]).max(r.q_min[i] - qa[i]);
                if over > tol {
                    report.violations.push(Violation { kind: ViolationKind::PositionLimit, time: t, value: over });
                }
            }
        }
        Ok(clearance)
    };

    for (i, row) in table.rows.iter().enumerate() {
        let joints = row.z.rows(0, nj).into_owned();
        let c = check(row.time, &joints, &mut report)?;
        report.row_clearance.push(c);
        for (arm, off) in [(0, 0), (1, n[0])] {
            let r = &system.robots[arm];
            for j in 0..n[arm] {
                let v = row.zd[off + j].abs() - r.v_limit[j];
                if v > tol {
                    report.violations.push(Violation { kind: ViolationKind::VelocityLimit, time: row.time, value: v });
                }
                let a = row.zdd[off + j].abs() - r.a_limit[j];
                if a > tol {
                    report.violations.push(Violation { kind: ViolationKind::AccelerationLimit, time: row.time, value: a });
                }
            }
        }
        let Some(next) = table.rows.get(i + 1) else { continue };
        let h = next.time - row.time;
        if h <= 0.0 {
            continue;
        }
        let (a, va) = (joints, row.zd.rows(0, nj).into_owned());
        let (b, vb) = (next.z.rows(0, nj).into_owned(), next.zd.rows(0, nj).into_owned());
        for k in 1..cfg.oversample {
            let s = k as f64 / cfg.oversample as f64;
            check(row.time + s * h, &hermite(&a, &va, &b, &vb, h, s), &mut report)?;
        }
    }
    Ok(report)
}
