//! Shrinking-horizon execution of the planner.
//!
//! Each step pins the first control point to the measured state, warm
//! starts from the previous plan advanced by `dt`, solves, and executes `dt`
//! of the result. In task mode the duration bound drops by `dt` per step so
//! the remaining window never grows; once it falls under the final-approach
//! threshold the last plan is executed to its end without re-solving.
//! Replanning mode pins start and goal to the object pose at entry and lets
//! the goal slack absorb the evasive motion; it keeps a fresh horizon.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::learning::{refresh_proxies, sample_states, solve_verified, LearningConfig};
use super::ocp::{build_ocp, PlannerProblem, PlannerSolution};
use super::solver::{Duals, SolveStatus};
use super::PlannerError;
use crate::bspline::{fit_least_squares, uniform_phases};
use crate::geometry::pose::Pose;
use crate::kinematics::SystemState;
use crate::perception::OcclusionModel;
use crate::proxy::GeometricWorld;

/// Sub-samples per step in the emitted motion references.
pub const REFERENCE_SUBSTEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpcMode {
    Task,
    Replanning,
}

impl MpcMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            MpcMode::Task => "task",
            MpcMode::Replanning => "replanning",
        }
    }
}

/// Desired state, velocity and acceleration at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionReference {
    pub time: f64,
    pub z: DVector<f64>,
    pub zd: DVector<f64>,
    pub zdd: DVector<f64>,
}

/// Perception results read once per step.
#[derive(Debug, Clone, Default)]
pub struct PerceptionUpdate {
    pub occlusion: Option<OcclusionModel>,
    /// New obstacle geometry for the proxies, already inflated.
    pub world: Option<GeometricWorld>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub step: usize,
    pub time: f64,
    pub mode: MpcMode,
    /// Duration bound used for this step's solve; `None` for a fresh horizon.
    pub remaining: Option<f64>,
    pub status: Option<SolveStatus>,
    pub verify_rounds: usize,
    pub clearance: f64,
    pub failure: Option<String>,
    pub state: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct MpcLoopState {
    pub current: SystemState,
    pub time: f64,
    pub step: usize,
    /// Duration left on the accepted plan after the last executed step.
    pub remaining: Option<f64>,
    pub mode: MpcMode,
    pub occlusion: OcclusionModel,
    /// Geometry the proxies were trained on.
    pub world: GeometricWorld,
    pub solution: Option<PlannerSolution>,
    pub duals: Option<Duals>,
    pub log: Vec<LogEntry>,
    pub executed: Vec<MotionReference>,
    /// Goal and slack bounds of the task, restored after replanning.
    pub task_goal: Pose,
    pub task_eps: (f64, f64),
    pub done: bool,
    pub rng: ChaCha8Rng,
}

impl MpcLoopState {
    pub fn new(problem: &PlannerProblem, current: SystemState, world: GeometricWorld, seed: u64) -> Self {
        MpcLoopState {
            current,
            time: 0.0,
            step: 0,
            remaining: None,
            mode: MpcMode::Task,
            occlusion: OcclusionModel::default(),
            world,
            solution: None,
            duals: None,
            log: Vec::new(),
            executed: Vec::new(),
            task_goal: problem.x_obj_final,
            task_eps: (problem.eps_position, problem.eps_orientation),
            done: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn current_vector(&self) -> DVector<f64> {
        self.current.to_vector()
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// The plan executed during this step.
    pub solution: Option<PlannerSolution>,
    /// True when this step produced a new accepted plan.
    pub replanned: bool,
    pub references: Vec<MotionReference>,
    pub done: bool,
}

/// Previous plan advanced by `dt`, refit on the same spline, with its first
/// control point replaced by `current`.
pub fn shifted_warm_start(prev: &PlannerSolution, dt: f64, current: &DVector<f64>) -> Result<DVector<f64>, PlannerError> {
    let t = prev.duration;
    let rest = (t - dt).max(1e-6);
    let m = prev.control_points.nrows();
    let dim = prev.control_points.ncols();
    let curve = prev.curve();
    let phases = uniform_phases(4 * m);
    let mut values = DMatrix::zeros(phases.len(), dim);
    for (i, &s) in phases.iter().enumerate() {
        let old = ((dt.min(t) + s * rest) / t).clamp(0.0, 1.0);
        values.row_mut(i).copy_from(&curve.evaluate(old)?.transpose());
    }
    let fit = fit_least_squares(prev.degree, m, &phases, &values)?;
    let mut x = prev.x.clone();
    for i in 0..m {
        for d in 0..dim {
            x[i * dim + d] = if i == 0 { current[d] } else { fit.control_points()[(i, d)] };
        }
    }
    x[m * dim] = rest;
    Ok(x)
}

/// Plans shorter than this many steps are executed whole in one step.
const TAIL_FOLD: f64 = 1.5;

/// The retained plan advanced by `dt`, so execution continues along it.
fn advanced(prev: &PlannerSolution, dt: f64, current: &DVector<f64>) -> Result<PlannerSolution, PlannerError> {
    let x = shifted_warm_start(prev, dt, current)?;
    let mut kept = prev.clone();
    let m = kept.control_points.nrows();
    let dim = kept.control_points.ncols();
    kept.control_points = DMatrix::from_fn(m, dim, |i, d| x[i * dim + d]);
    kept.duration = x[m * dim];
    kept.x = x;
    Ok(kept)
}

/// Flips the quaternion block of `z` into the hemisphere of `reference`.
fn align_quaternion(z: &mut DVector<f64>, reference: &DVector<f64>, offset: usize) {
    let dot: f64 = (0..4).map(|j| z[offset + 3 + j] * reference[offset + 3 + j]).sum();
    if dot < 0.0 {
        for j in 0..4 {
            z[offset + 3 + j] = -z[offset + 3 + j];
        }
    }
}

/// Executes `duration` of `plan` from its start, returning sub-sampled
/// references and the chain-projected end state.
fn execute(
    problem: &PlannerProblem,
    plan: &PlannerSolution,
    duration: f64,
    t0: f64,
) -> Result<(Vec<MotionReference>, SystemState), PlannerError> {
    let traj = plan.trajectory();
    let t = traj.duration();
    let mut refs = Vec::with_capacity(REFERENCE_SUBSTEPS + 1);
    for k in 1..=REFERENCE_SUBSTEPS {
        let tau = duration * k as f64 / REFERENCE_SUBSTEPS as f64;
        let s = traj.time_scaled_samples((tau / t).clamp(0.0, 1.0))?;
        refs.push(MotionReference { time: t0 + tau, z: s.z, zd: s.zd, zdd: s.zdd });
    }
    let end = &refs.last().expect("at least one substep").z;
    let l = problem.layout();
    let q1 = end.rows(0, l.joints[0]).into_owned();
    let q2 = end.rows(l.joints[0], l.joints[1]).into_owned();
    let state = problem.system.project(&q1, &q2)?;
    Ok((refs, state))
}

/// Advances the loop by one step; see the module docs for the policy.
/// Solver failures keep the previous plan and are recorded in the log.
pub fn shrinking_horizon_step(
    state: &mut MpcLoopState,
    problem: &mut PlannerProblem,
    update: PerceptionUpdate,
    learning: &LearningConfig,
) -> Result<StepOutcome, PlannerError> {
    if state.done {
        return Ok(StepOutcome { solution: state.solution.clone(), replanned: false, references: Vec::new(), done: true });
    }
    let dt = problem.config.mpc.dt;
    let t_min = problem.config.bounds.t_min;
    if let Some(o) = update.occlusion {
        state.occlusion = o;
    }
    if let Some(w) = update.world {
        if !problem.proxies.is_empty() {
            let path = match &state.solution {
                Some(s) => sample_states(s, 60),
                None => vec![state.current_vector()],
            };
            let seed: u64 = rand::Rng::random(&mut state.rng);
            problem.proxies = refresh_proxies(&problem.proxies, &problem.system, &w, &path, learning, seed)?;
        }
        state.world = w;
    }

    let mut current = state.current_vector();
    let po = problem.layout().pose_offset();
    if let Some(prev) = &state.solution {
        let reference = prev.control_points.row(0).transpose();
        align_quaternion(&mut current, &reference, po);
    }
    problem.start = current.clone();

    let final_approach = state.mode == MpcMode::Task
        && state.remaining.is_some_and(|r| r < problem.config.mpc.final_approach.max(t_min));
    let mut entry = LogEntry {
        step: state.step,
        time: state.time,
        mode: state.mode,
        remaining: state.remaining,
        status: None,
        verify_rounds: 0,
        clearance: f64::INFINITY,
        failure: None,
        state: current.clone(),
    };

    let mut replanned = false;
    if !final_approach {
        problem.t_max = match (state.mode, state.remaining) {
            (MpcMode::Task, Some(r)) => r.max(t_min),
            _ => problem.config.bounds.t_max,
        };
        let warm = match &state.solution {
            Some(prev) if state.step > 0 => Some(shifted_warm_start(prev, dt, &current)?),
            _ => None,
        };
        let warm = warm.map(|w| build_ocp(problem).map(|o| o.project(&w))).transpose()?;
        match solve_verified(problem, &state.world, warm.as_ref(), state.duals.as_ref(), learning, &mut state.rng) {
            Ok(v) => {
                entry.status = Some(v.solution.status);
                entry.verify_rounds = v.rounds;
                entry.clearance = v.clearance;
                if v.solution.is_usable() && v.verified {
                    state.duals = Some(Duals {
                        eq: v.solution.diagnostics.eq_multipliers.clone(),
                        ineq: v.solution.diagnostics.ineq_multipliers.clone(),
                        penalty: v.solution.diagnostics.penalty,
                    });
                    state.solution = Some(v.solution);
                    replanned = true;
                } else {
                    entry.failure = Some(format!(
                        "solve {} (verified {}, clearance {:.4}); keeping previous plan",
                        v.solution.status.as_str(),
                        v.verified,
                        v.clearance
                    ));
                    state.duals = None;
                }
            }
            Err(e) => entry.failure = Some(format!("solver error: {e}; keeping previous plan")),
        }
        if !replanned {
            if let Some(prev) = &state.solution {
                if state.step > 0 {
                    state.solution = Some(advanced(prev, dt, &current)?);
                }
            }
        }
    } else if let Some(prev) = &state.solution {
        state.solution = Some(advanced(prev, dt, &current)?);
    }

    let Some(plan) = state.solution.clone() else {
        entry.failure.get_or_insert_with(|| "no plan available; holding".into());
        state.log.push(entry);
        state.step += 1;
        state.time += dt;
        return Ok(StepOutcome { solution: None, replanned: false, references: Vec::new(), done: false });
    };
    // A tail shorter than half a step is folded into this one; re-anchoring
    // the next plan over a tiny duration scales any offset by 1/T^2.
    let run = if plan.duration < TAIL_FOLD * dt { plan.duration } else { dt };
    let (refs, next) = execute(problem, &plan, run, state.time)?;
    state.executed.extend(refs.iter().cloned());
    state.current = next;
    state.time += run;
    state.step += 1;
    let left = plan.duration - run;
    state.remaining = match state.mode {
        MpcMode::Task => Some(left),
        MpcMode::Replanning => None,
    };
    if state.mode == MpcMode::Task && left <= 1e-9 {
        state.done = true;
    }
    state.log.push(entry);
    Ok(StepOutcome { solution: Some(plan), replanned, references: refs, done: state.done })
}

/// Switches to replanning: start and goal both become the current object
/// pose, the goal slack opens to `evade` (position, orientation) and the
/// horizon restarts.
pub fn replanning_mode_enter(state: &mut MpcLoopState, problem: &mut PlannerProblem, evade: (f64, f64)) {
    if state.mode == MpcMode::Replanning {
        return;
    }
    state.mode = MpcMode::Replanning;
    state.remaining = None;
    state.duals = None;
    let pose = state.current.object;
    problem.start = state.current_vector();
    problem.x_obj_final = pose;
    problem.eps_position = evade.0;
    problem.eps_orientation = evade.1;
    problem.t_max = problem.config.bounds.t_max;
}

/// Restores the task goal and slack with a fresh horizon.
pub fn replanning_mode_exit(state: &mut MpcLoopState, problem: &mut PlannerProblem) {
    if state.mode == MpcMode::Task {
        return;
    }
    state.mode = MpcMode::Task;
    state.remaining = None;
    state.duals = None;
    problem.x_obj_final = state.task_goal;
    problem.eps_position = state.task_eps.0;
    problem.eps_orientation = state.task_eps.1;
    problem.t_max = problem.config.bounds.t_max;
}
