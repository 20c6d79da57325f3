//! The capture, perceive, learn, plan, step loop of one scenario.

use std::collections::HashSet;
use std::time::Instant;

use c2f_core::geometry::pose::pose_from_array;
use c2f_core::geometry::Pose;
use c2f_core::kinematics::SystemState;
use c2f_core::planner::{
    group_scores, replanning_mode_enter, replanning_mode_exit, shrinking_horizon_step, train_arm_proxies,
    MotionReference, MpcLoopState, MpcMode, PerceptionUpdate, PlannerProblem, TrajectoryRow, TrajectoryTable,
    VisibilityTerm,
};
use c2f_core::visibility::{build_visibility_model, sample_camera_poses, validate_all, EyeInHand, VisibilityModel};
use nalgebra::{DVector, Vector3};

use crate::config::{EyeCameraSpec, ScenarioConfig};
use crate::report::{RunReport, StepRecord, Verdict};
use crate::sense::{marker_detected, min_distance, new_obstacles, perceive, system_spheres, Perceived};
use crate::HarnessError;

/// Chain residual above which a run fails.
pub const CHAIN_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub max_steps: Option<usize>,
}

/// Events of the run that the per-step records do not show directly.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub completed: bool,
    /// Visibility score at the first step, when a visibility term exists.
    pub initial_visibility: Option<f64>,
    pub reveal_step: Option<usize>,
    pub replanning_entries: Vec<usize>,
    pub replanning_exits: Vec<usize>,
    /// At every entry, start and goal both equaled the measured object pose.
    pub reset_verified: bool,
    pub final_object: Pose,
    pub true_goal: Pose,
    pub final_goal: Pose,
    /// Position part of the last plan's goal slack.
    pub final_slack: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub table: TrajectoryTable,
    pub summary: RunSummary,
}

fn visibility_model(
    rig: &EyeInHand,
    perceived: &Perceived,
    place: &Vector3<f64>,
    eye: &EyeCameraSpec,
) -> Result<Option<VisibilityModel>, HarnessError> {
    let candidates = sample_camera_poses(place, &eye.sampling())?;
    let validated = validate_all(&candidates, rig, &perceived.blockers(), place);
    Ok(build_visibility_model(&validated, rig, eye.sigma).ok())
}

fn state_of(z: &DVector<f64>, joints: [usize; 2]) -> Result<SystemState, HarnessError> {
    Ok(SystemState::from_vector(z, joints[0], joints[1])?)
}

fn position_distance(a: &Pose, b: &Pose) -> f64 {
    (a.translation.vector - b.translation.vector).norm()
}

pub fn run_scenario(cfg: &ScenarioConfig, opts: RunOptions) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let max_steps = opts.max_steps.unwrap_or(cfg.max_steps);
    let system = cfg.system()?;
    let start = cfg.start_state()?;
    let cameras = cfg.static_cameras()?;
    let pipeline = cfg.pipeline();
    let learning = cfg.learning_config();
    let mpc = cfg.planner.mpc;
    let inflate = mpc.d_safe + cfg.perception.margin;
    let dynamic_ids: HashSet<&str> = cfg.events.iter().map(|e| e.id.as_str()).collect();

    let baseline = perceive(&cfg.geometric_world_at(0.0), &system_spheres(&system, &start)?, &cameras, &pipeline, 0.0)?;
    let mut perceived = baseline.clone();
    let planning_world = baseline.world().inflated(inflate);

    let eye = cfg.eye_camera.clone();
    let rig = eye.as_ref().map(|e| EyeInHand::new(system.clone(), e.arm));
    let mut target_known = eye.is_none();
    let goal = if target_known { cfg.true_goal() } else { cfg.estimated_goal() };
    let mut problem = PlannerProblem::new(system.clone(), &start, goal, cfg.planner.clone())?;
    if target_known {
        problem.eps_position = 0.0;
        problem.eps_orientation = 0.0;
    }
    if !planning_world.obstacles.is_empty() {
        problem.proxies = train_arm_proxies(&system, &planning_world, &[], &learning, seed)?;
    }
    let estimate = Vector3::from(cfg.target.estimate);
    let marker = Vector3::from(cfg.target.truth);
    let mut vis_model = None;
    if let (Some(rig), Some(e)) = (&rig, &eye) {
        vis_model = visibility_model(rig, &perceived, &estimate, e)?;
        problem.visibility = vis_model.clone().map(|model| VisibilityTerm { model, rig: rig.clone() });
    }
    let joints = problem.layout().joints;
    let score_columns: usize = (0..2).map(|a| system.carrying_model(a).groups.len()).sum();
    let mut state = MpcLoopState::new(&problem, start, planning_world, seed);

    let mut records = Vec::new();
    let mut executed: Vec<(MotionReference, Vec<f64>)> = Vec::new();
    let mut summary = RunSummary {
        completed: false,
        initial_visibility: None,
        reveal_step: None,
        replanning_entries: Vec::new(),
        replanning_exits: Vec::new(),
        reset_verified: true,
        final_object: state.current.object,
        true_goal: cfg.true_goal(),
        final_goal: problem.x_obj_final,
        final_slack: 0.0,
    };

    for _ in 0..max_steps {
        if state.done {
            break;
        }
        let step = state.step;
        let spheres = system_spheres(&system, &state.current)?;
        let mut update = PerceptionUpdate::default();
        if cfg.has_events() && step > 0 {
            let now = perceive(&cfg.geometric_world_at(state.time), &spheres, &cameras, &pipeline, state.time)?;
            if !now.same_as(&perceived, 1e-9) {
                update.world = Some(now.world().inflated(inflate));
                perceived = now;
                if let (false, Some(rig), Some(e)) = (target_known, &rig, &eye) {
                    vis_model = visibility_model(rig, &perceived, &estimate, e)?;
                    problem.visibility = vis_model.clone().map(|model| VisibilityTerm { model, rig: rig.clone() });
                }
            }
        }

        let intruder = min_distance(&spheres, new_obstacles(&perceived, &baseline));
        if state.mode == MpcMode::Task && intruder < mpc.replan_distance {
            replanning_mode_enter(&mut state, &mut problem, (cfg.replanning.evade_position, cfg.replanning.evade_orientation));
            let here = state.current.object;
            let pinned = problem.x_obj_initial();
            summary.reset_verified &= problem.x_obj_final == here
                && position_distance(&pinned, &here) < 1e-12
                && pinned.rotation.angle_to(&here.rotation) < 1e-9;
            summary.replanning_entries.push(step);
        } else if state.mode == MpcMode::Replanning && intruder > cfg.replanning.exit_factor * mpc.replan_distance {
            replanning_mode_exit(&mut state, &mut problem);
            summary.replanning_exits.push(step);
        }

        let mut visibility = None;
        if let (Some(model), Some(rig)) = (&vis_model, &rig) {
            let q = &state.current.q[rig.arm];
            let score = model.normalized_score(rig, q)?;
            visibility = Some(score);
            if step == 0 {
                summary.initial_visibility = Some(score);
            }
            if !target_known && score >= mpc.visibility_threshold {
                let e = eye.as_ref().expect("eye camera accompanies the rig");
                let cam = rig.camera_pose(q)?;
                let axis = cam.rotation * Vector3::z();
                let truth = cfg.geometric_world_at(state.time);
                if marker_detected(&cam.translation.vector, &axis, &marker, e.h_fov, e.max_range, &truth) {
                    target_known = true;
                    summary.reveal_step = Some(step);
                    let g = cfg.true_goal();
                    state.task_goal = g;
                    state.task_eps = (0.0, 0.0);
                    if state.mode == MpcMode::Task {
                        problem.x_obj_final = g;
                        problem.eps_position = 0.0;
                        problem.eps_orientation = 0.0;
                        state.remaining = None;
                        state.duals = None;
                    }
                    problem.visibility = None;
                }
            }
        }

        let clock = Instant::now();
        let out = shrinking_horizon_step(&mut state, &mut problem, update, &learning)?;
        let solve_ms = clock.elapsed().as_secs_f64() * 1e3;
        let entry = state.log.last().expect("step logs an entry").clone();

        let mut min_static = f64::INFINITY;
        let mut min_dynamic = f64::INFINITY;
        let mut chain: f64 = 0.0;
        for r in &out.references {
            let s = state_of(&r.z, joints)?;
            let spheres = system_spheres(&system, &s)?;
            for (id, poly) in cfg.world_at(r.time) {
                let d = min_distance(&spheres, [&poly]);
                if dynamic_ids.contains(id.as_str()) {
                    min_dynamic = min_dynamic.min(d);
                } else {
                    min_static = min_static.min(d);
                }
            }
            chain = chain.max(system.chain_residual(&s.q[0], &s.q[1])?.amax());
            let scores = if problem.proxies.is_empty() {
                vec![0.0; score_columns]
            } else {
                group_scores(&problem.proxies, joints, &r.z)?
            };
            executed.push((r.clone(), scores));
        }
        let tracking = out.references.last().map_or(0.0, |r| {
            let reference = pose_from_array(r.z.rows(joints[0] + joints[1], 7).as_slice());
            position_distance(&state.current.object, &reference)
        });
        records.push(StepRecord {
            step,
            time: entry.time,
            mode: entry.mode.as_str().into(),
            visibility,
            target_known,
            eps_position: problem.eps_position,
            eps_orientation: problem.eps_orientation,
            remaining: entry.remaining,
            min_static,
            min_dynamic,
            chain_residual: chain,
            tracking_error: tracking,
            goal_error: position_distance(&state.current.object, &problem.x_obj_final),
            status: entry.status.map(|s| s.as_str().to_string()),
            verify_rounds: entry.verify_rounds,
            solve_ms,
            failed: entry.failure.is_some(),
        });
    }

    summary.completed = state.done;
    summary.final_object = state.current.object;
    summary.final_goal = state.task_goal;
    summary.final_slack = state.solution.as_ref().map_or(0.0, |s| (0..3).map(|i| s.slack[i] * s.slack[i]).sum::<f64>().sqrt());

    let final_time = executed.last().map_or(0.0, |(r, _)| r.time);
    let mut table = TrajectoryTable::new(joints, score_columns);
    for (r, scores) in executed {
        let phase = if final_time > 0.0 { r.time / final_time } else { 0.0 };
        table.rows.push(TrajectoryRow { time: r.time, phase, z: r.z, zd: r.zd, zdd: r.zdd, scores });
    }

    let mut report = RunReport { scenario: cfg.name.clone(), seed, records, verdict: Verdict { passed: true, reasons: vec![] } };
    report.verdict = verdict(cfg, &report, &summary);
    Ok(RunOutput { report, table, summary })
}

fn verdict(cfg: &ScenarioConfig, report: &RunReport, summary: &RunSummary) -> Verdict {
    let mut reasons = Vec::new();
    if !summary.completed {
        reasons.push(format!("timeout: task not finished after {} steps", report.records.len()));
    }
    if report.min_static() < 0.0 {
        reasons.push(format!("ground-truth collision: clearance {:.4} m", report.min_static()));
    }
    if cfg.has_events() && report.min_dynamic() < cfg.planner.mpc.d_safe {
        reasons.push(format!("intruder distance {:.4} m below d_safe", report.min_dynamic()));
    }
    if report.max_chain_residual() > CHAIN_TOLERANCE {
        reasons.push(format!("chain residual {:.2e} above {CHAIN_TOLERANCE:e}", report.max_chain_residual()));
    }
    if cfg.eye_camera.is_some() && summary.reveal_step.is_none() {
        reasons.push("target never detected".into());
    }
    let err = position_distance(&summary.final_object, &summary.final_goal);
    if summary.completed && err > summary.final_slack + 1e-4 {
        reasons.push(format!("endpoint error {err:.2e} exceeds slack {:.2e}", summary.final_slack));
    }
    Verdict { passed: reasons.is_empty(), reasons }
}
