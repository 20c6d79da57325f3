//! Acceptance suite: one PASS/FAIL line per criterion with its runtime and
//! the measured quantities. Exits nonzero when any criterion fails.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use c2f_core::bspline::BSplineCurve;
use c2f_core::geometry::pose::pose_from_xyz_rpy;
use c2f_core::geometry::{ConvexPolytope, Sphere};
use c2f_core::kinematics::{presets, random_configuration, RobotModel};
use c2f_core::perception::scenes::scripted_scenes;
use c2f_core::perception::*;
use c2f_core::planner::{build_ocp, train_arm_proxies, LearningConfig, Nlp, PlannerConfig, PlannerProblem, VisibilityTerm};
use c2f_core::proxy::{
    accuracy, active_update, benchmark, fk_similarity_matrix, ground_truth_collision, train, ActiveConfig,
    BiasedSampler, CollisionDetector, GeometricWorld, GramPruneConfig, LabeledDataset, SupportSet, TrainConfig,
};
use c2f_core::visibility::{build_visibility_model, sample_camera_poses, validate_all, EyeInHand, SamplingConfig, DEFAULT_SIGMA};
use c2f_harness::{replay_audit, replay_audit_timed, run_scenario, AuditConfig, RunOptions, RunOutput, ScenarioConfig};
use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn scenario(name: &str) -> Result<ScenarioConfig, String> {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "scenarios", name].iter().collect();
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    ScenarioConfig::from_toml(&text).map_err(|e| e.to_string())
}

fn run(cfg: &ScenarioConfig) -> Result<RunOutput, String> {
    run_scenario(cfg, RunOptions::default()).map_err(|e| e.to_string())
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------- 1

/// Cox-de Boor recursion with the 0/0 = 0 convention, closed at s = 1.
fn cox_de_boor(t: &[f64], i: usize, p: usize, s: f64) -> f64 {
    if p == 0 {
        let last = t[t.len() - 1];
        let in_span = t[i] <= s && s < t[i + 1];
        let closes = s == last && t[i] < t[i + 1] && t[i + 1] == last;
        return if in_span || closes { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    let d1 = t[i + p] - t[i];
    if d1 > 0.0 {
        v += (s - t[i]) / d1 * cox_de_boor(t, i, p - 1, s);
    }
    let d2 = t[i + p + 1] - t[i + 1];
    if d2 > 0.0 {
        v += (t[i + p + 1] - s) / d2 * cox_de_boor(t, i + 1, p - 1, s);
    }
    v
}

/// Polynomial piece of `span` evaluated at `s`, which may be a span end.
fn piece(curve: &BSplineCurve, span: usize, s: f64) -> DVector<f64> {
    let b = curve.knots().basis(span, s);
    let n = curve.degree();
    let mut out = DVector::zeros(curve.dim());
    for (k, w) in b.iter().enumerate() {
        out += curve.control_points().row(span - n + k).transpose() * *w;
    }
    out
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut eval_err, mut deriv_err, mut cont_err) = (0.0f64, 0.0f64, 0.0f64);
    for degree in 1..=5 {
        for _ in 0..4 {
            let m = rng.random_range(degree + 2..degree + 12);
            let c = DMatrix::from_fn(m, 3, |_, _| rng.random_range(-2.0..2.0));
            let curve = BSplineCurve::clamped_uniform(degree, c).map_err(err)?;
            let t = curve.knots().knots().to_vec();
            for k in 0..60 {
                let s = if k == 0 { 0.0 } else if k == 1 { 1.0 } else { rng.random::<f64>() };
                let mut oracle = DVector::zeros(3);
                for i in 0..m {
                    oracle += curve.control_points().row(i).transpose() * cox_de_boor(&t, i, degree, s);
                }
                eval_err = eval_err.max((curve.evaluate(s).map_err(err)? - oracle).amax());
            }
            let d1 = curve.derivative_curve().map_err(err)?;
            let h = 1e-6;
            for _ in 0..60 {
                let s = rng.random_range(h..1.0 - h);
                let fd = (curve.evaluate(s + h).map_err(err)? - curve.evaluate(s - h).map_err(err)?) / (2.0 * h);
                deriv_err = deriv_err.max((d1.evaluate(s).map_err(err)? - fd).amax());
            }
            if degree >= 2 {
                let mut derivs = vec![curve.clone()];
                for _ in 1..degree {
                    let next = derivs.last().expect("nonempty").derivative_curve().map_err(err)?;
                    derivs.push(next);
                }
                for idx in degree + 1..t.len() - degree - 1 {
                    for (r, c) in derivs.iter().enumerate() {
                        let gap = (piece(c, idx - r - 1, t[idx]) - piece(c, idx - r, t[idx])).amax();
                        cont_err = cont_err.max(gap);
                    }
                }
            }
        }
    }
    let ok = eval_err <= 1e-12 && deriv_err <= 1e-5 && cont_err <= 1e-9;
    Ok((ok, format!("eval {eval_err:.2e} (<=1e-12) deriv {deriv_err:.2e} (<=1e-5) continuity {cont_err:.2e} (<=1e-9)")))
}

// ---------------------------------------------------------------- 2, 3

/// Whole-robot collision accuracy of `det` on the rows `rows` of `x`.
fn detector_accuracy(det: &CollisionDetector, model: &RobotModel, world: &GeometricWorld, x: &DMatrix<f64>, rows: &[usize]) -> Result<f64, String> {
    let mut correct = 0;
    for &i in rows {
        let q = x.row(i).transpose();
        let truth = ground_truth_collision(world, model, &q).map_err(err)?.iter().flatten().any(|h| *h);
        correct += (det.predicts_collision(model, &q).map_err(err)? == truth) as usize;
    }
    Ok(correct as f64 / rows.len() as f64)
}

fn rows_of(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)])
}

struct Benchmark {
    model: RobotModel,
    world: GeometricWorld,
    grid: DMatrix<f64>,
    train_rows: Vec<usize>,
    test_rows: Vec<usize>,
}

fn benchmark() -> Benchmark {
    let grid = benchmark::planar_grid(64);
    let (train_rows, test_rows) = benchmark::split(grid.nrows(), 0.8, 5);
    Benchmark { model: presets::planar_two_link(), world: benchmark::planar_world(), grid, train_rows, test_rows }
}

fn criterion_2() -> Outcome {
    let b = benchmark();
    let x = rows_of(&b.grid, &b.train_rows);
    let cfg = TrainConfig::default();
    let (full, _) = CollisionDetector::train(&b.model, &b.world, &x, &cfg, None).map_err(err)?;
    let (pruned, _) = CollisionDetector::train(&b.model, &b.world, &x, &cfg, Some(&GramPruneConfig::default())).map_err(err)?;
    let acc = detector_accuracy(&full, &b.model, &b.world, &b.grid, &b.test_rows)?;
    let acc_p = detector_accuracy(&pruned, &b.model, &b.world, &b.grid, &b.test_rows)?;
    let (n, n_p) = (full.total_support(), pruned.total_support());
    let ok = acc >= 0.95 && acc - acc_p <= 0.02 && n_p < n;
    Ok((ok, format!("held-out {acc:.4} (>=0.95) pruned {acc_p:.4} drop {:.4} (<=0.02) SVs {n} -> {n_p}", acc - acc_p)))
}

fn criterion_3() -> Outcome {
    let b = benchmark();
    let x = rows_of(&b.grid, &b.train_rows);
    let cfg = TrainConfig::default();
    let (seg, _) = CollisionDetector::train(&b.model, &b.world, &x, &cfg, Some(&GramPruneConfig::default())).map_err(err)?;
    let (seg_raw, _) = CollisionDetector::train(&b.model, &b.world, &x, &cfg, None).map_err(err)?;
    let unified = b.model.unified(presets::planar_midpoints(&b.model), 1000);
    let data = LabeledDataset::label(&b.world, &unified, 0, x).map_err(err)?;
    let (whole, _) = train(&data, &unified, 0, &cfg).map_err(err)?;
    let per_group: Vec<String> = seg.sets.iter().map(|s| s.len().to_string()).collect();
    let ok = seg.total_support() < whole.len();
    Ok((
        ok,
        format!(
            "segmented+pruned {} [{}] < unified {}; unpruned segmented {}",
            seg.total_support(),
            per_group.join("+"),
            whole.len(),
            seg_raw.total_support()
        ),
    ))
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let model = presets::planar_two_link();
    let unified = model.unified(presets::planar_midpoints(&model), 1000);
    let qs = [dv(&[PI / 2.0, 0.0]), dv(&[PI / 2.0 - 0.6, 0.9]), dv(&[PI / 2.0 + 0.6, -0.9])];
    let k = fk_similarity_matrix(&unified, 0, &qs, 1.0).map_err(err)?;
    let (k12, k13, k23) = (k[(0, 1)], k[(0, 2)], k[(1, 2)]);
    let ok = (k12 - k13).abs() <= 1e-9 && k12 > k23 && k13 > k23;
    Ok((ok, format!("K12 {k12:.4} K13 {k13:.4} (|diff| {:.1e} <=1e-9) K23 {k23:.4}", (k12 - k13).abs())))
}

// ---------------------------------------------------------------- 5

fn group_test_set(world: &GeometricWorld, model: &RobotModel, group: usize, seed: u64) -> Result<LabeledDataset, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<DVector<f64>> = (0..1500).map(|_| random_configuration(model, &mut rng)).collect();
    let x = DMatrix::from_fn(rows.len(), model.joint_count(), |i, j| rows[i][j]);
    LabeledDataset::label(world, model, group, x).map_err(err)
}

fn criterion_5() -> Outcome {
    let model = presets::planar_two_link();
    let world = benchmark::planar_world();
    let cfg = ActiveConfig { explore_samples: 1200, ..ActiveConfig::default() };
    let sampler = BiasedSampler::uniform(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut notes = Vec::new();
    let mut ok = true;
    for group in 0..model.groups.len() {
        let test = group_test_set(&world, &model, group, 500 + group as u64)?;
        let data = LabeledDataset::label(&world, &model, group, benchmark::planar_grid(40)).map_err(err)?;
        let (mut s, _) = train(&data, &model, group, &TrainConfig::default()).map_err(err)?;
        let initial = accuracy(&s, &model, &test).map_err(err)?;
        let (mut worst_drift, mut max_w) = (0.0f64, s.max_abs_weight());
        for _ in 0..50 {
            s = active_update(&s, &model, &world, &cfg, &sampler, &mut rng).map_err(err)?.0;
            worst_drift = worst_drift.max((accuracy(&s, &model, &test).map_err(err)? - initial).abs());
            max_w = max_w.max(s.max_abs_weight());
        }
        let mut moved = world.clone();
        moved.push(benchmark::intruding_box(), 0);
        let moved_test = group_test_set(&moved, &model, group, 900 + group as u64)?;
        let before = accuracy(&s, &model, &moved_test).map_err(err)?;
        let mut recovered = None;
        for cycle in 1..=3 {
            s = active_update(&s, &model, &moved, &cfg, &sampler, &mut rng).map_err(err)?.0;
            let a = accuracy(&s, &model, &moved_test).map_err(err)?;
            if a >= 0.90 {
                recovered = Some((cycle, a));
                break;
            }
        }
        ok &= max_w < 1e6 && worst_drift <= 0.02 && recovered.is_some();
        notes.push(format!(
            "group {group}: max|W| {max_w:.2e} (<1e6) drift {worst_drift:.4} (<=0.02) insert {before:.3} -> {}",
            recovered.map_or("not recovered".into(), |(c, a)| format!("{a:.3} at cycle {c}"))
        ));
    }
    Ok((ok, notes.join("; ")))
}

// ---------------------------------------------------------------- 6

fn ray_blocked(world: &GeometricWorld, c: &Vector3<f64>, p: &Vector3<f64>) -> bool {
    world.obstacles.iter().any(|o| match o.polytope.segment_interval(c, p) {
        Some((t0, _)) => t0 < 1.0 - 1e-9,
        None => false,
    })
}

fn criterion_6() -> Outcome {
    let mut worst = 1.0f64;
    let mut notes = Vec::new();
    for scene in scripted_scenes() {
        let cam = &scene.camera;
        let cloud = synthetic_depth_capture(&scene.world, cam);
        let cfg = PipelineConfig { extend: 2.0 * cam.max_range, ..PipelineConfig::default() };
        let model = process_frame(&cloud, cam, &[], &OcclusionModel::default(), &cfg).map_err(err)?.model;
        let mut rng = ChaCha8Rng::seed_from_u64(606);
        let (tx, ty) = ((0.5 * cam.h_fov).tan(), (0.5 * cam.v_fov).tan());
        let (mut blocked, mut covered) = (0usize, 0usize);
        while blocked < 500 {
            let z = rng.random_range(0.05..cam.max_range);
            let local = nalgebra::Point3::new(rng.random_range(-tx..tx) * z, rng.random_range(-ty..ty) * z, z);
            let p = cam.pose.transform_point(&local).coords;
            if !ray_blocked(&scene.world, &cam.origin(), &p) {
                continue;
            }
            blocked += 1;
            covered += model.occluded(&p, 1e-9) as usize;
        }
        let frac = covered as f64 / blocked as f64;
        worst = worst.min(frac);
        notes.push(format!("{} {frac:.3}", scene.name));
    }
    let scenes = scripted_scenes();
    let cam = &scenes[0].camera;
    let mut rng = ChaCha8Rng::seed_from_u64(607);
    let o = cam.origin();
    let spheres: Vec<Sphere> = (0..200)
        .map(|_| {
            let center = o + Vector3::new(rng.random_range(0.5..2.5), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            Sphere { center, radius: rng.random_range(0.01..0.4) }
        })
        .collect();
    let cones = dynamic_occlusion_cones(&spheres, cam).map_err(err)?;
    let mut exact = true;
    let mut angle_gap = 0.0f64;
    for (s, c) in spheres.iter().zip(&cones) {
        let v = s.center - o;
        let d = (v.x * v.x + v.y * v.y + v.z * v.z).sqrt();
        exact &= c.half_angle == (s.radius / d).asin();
        // tangent-line construction as a second route
        let tangent = s.radius.atan2((d * d - s.radius * s.radius).sqrt());
        angle_gap = angle_gap.max((c.half_angle - tangent).abs());
    }
    let ok = worst >= 0.98 && exact && angle_gap < 1e-12;
    Ok((ok, format!("coverage min {worst:.3} (>=0.98) [{}]; cone asin exact {exact}, tangent gap {angle_gap:.1e}", notes.join(", "))))
}

// ---------------------------------------------------------------- 7, 8, 9, 11

fn criterion_7(out: &RunOutput, cfg: &ScenarioConfig) -> Outcome {
    let audit = replay_audit(&out.table, &cfg.geometric_world_at(0.0), &cfg.system().map_err(err)?, &AuditConfig::default())
        .map_err(err)?;
    let s = &out.summary;
    let endpoint = (s.final_object.translation.vector - s.final_goal.translation.vector).norm();
    let ok = s.completed && audit.is_clean() && audit.max_chain_residual <= 1e-3 && endpoint <= s.final_slack + 1e-4;
    Ok((
        ok,
        format!(
            "completed {} audit samples {} violations {} min clearance {:.4} chain {:.2e} (<=1e-3) endpoint {endpoint:.2e} (<= {:.2e}+1e-4)",
            s.completed,
            audit.samples,
            audit.violations.len(),
            audit.min_clearance,
            audit.max_chain_residual,
            s.final_slack
        ),
    ))
}

fn criterion_8(out: &RunOutput, cfg: &ScenarioConfig) -> Outcome {
    let s = &out.summary;
    let threshold = cfg.planner.mpc.visibility_threshold;
    let initial = s.initial_visibility.unwrap_or(f64::NAN);
    let Some(k) = s.reveal_step else {
        return Ok((false, format!("initial visibility {initial:.3}; target never revealed")));
    };
    let rec = &out.report.records;
    let crossing = rec[k].visibility.unwrap_or(f64::NAN);
    // the step before the reveal must not have entered the final approach
    let before_final = k == 0 || rec[k - 1].remaining.is_none_or(|r| r >= cfg.planner.mpc.final_approach);
    let loose_before = rec[..k].iter().all(|r| r.eps_position > 0.0);
    let tight_after = rec[k..].iter().all(|r| r.eps_position == 0.0 && r.eps_orientation == 0.0);
    let goal = cfg.true_goal();
    let err_goal = (s.final_object.translation.vector - goal.translation.vector).norm();
    let ok = initial < threshold && crossing >= threshold && before_final && loose_before && tight_after && s.completed && err_goal <= 1e-3;
    Ok((
        ok,
        format!(
            "visibility {initial:.3} -> {crossing:.3} at step {k} (threshold {threshold}); before final approach {before_final}; \
             slack loose before {loose_before}, zero after {tight_after}; final error {err_goal:.2e} m (<=1e-3)"
        ),
    ))
}

fn criterion_9(out: &RunOutput, cfg: &ScenarioConfig) -> Outcome {
    let s = &out.summary;
    let rep = &out.report;
    let audit = replay_audit_timed(&out.table, &|t| cfg.geometric_world_at(t), &cfg.system().map_err(err)?, &AuditConfig::default())
        .map_err(err)?;
    let entered = !s.replanning_entries.is_empty();
    let exit_ok = match (s.replanning_entries.last(), s.replanning_exits.last()) {
        (Some(a), Some(b)) => b > a,
        _ => false,
    };
    let d_safe = cfg.planner.mpc.d_safe;
    let ok = entered
        && s.reset_verified
        && exit_ok
        && rep.min_dynamic() >= d_safe
        && s.completed
        && rep.max_chain_residual() <= 1e-3
        && audit.is_clean();
    Ok((
        ok,
        format!(
            "entries {:?} exits {:?} reset verified {} min intruder distance {:.4} (>= d_safe {d_safe}) completed {} chain {:.2e} (<=1e-3) timed audit violations {}",
            s.replanning_entries,
            s.replanning_exits,
            s.reset_verified,
            rep.min_dynamic(),
            s.completed,
            rep.max_chain_residual(),
            audit.violations.len()
        ),
    ))
}

fn criterion_11(runs: &[(&str, &RunOutput, &ScenarioConfig)]) -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, first, cfg) in runs {
        let again = run(cfg)?;
        let (a, b) = (first.table.to_text(), again.table.to_text());
        let same = a == b;
        ok &= same;
        notes.push(format!("{name}: {} rows, {} bytes, identical {same}", first.table.rows.len(), a.len()));
    }
    Ok((ok, notes.join("; ")))
}

// ---------------------------------------------------------------- 10

fn rel_err(fd: f64, analytic: f64) -> f64 {
    (fd - analytic).abs() / analytic.abs().max(1.0)
}

fn criterion_10() -> Outcome {
    let h = 1e-6;
    // collision score
    let model = presets::planar_two_link();
    let data = LabeledDataset::label(&benchmark::planar_world(), &model, 1, benchmark::planar_grid(32)).map_err(err)?;
    let (s, _): (SupportSet, _) = train(&data, &model, 1, &TrainConfig::default()).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut score_err = 0.0f64;
    for _ in 0..100 {
        let q = random_configuration(&model, &mut rng);
        let (_, g) = s.score_with_gradient(&model, &q).map_err(err)?;
        for k in 0..q.len() {
            let (mut a, mut b) = (q.clone(), q.clone());
            a[k] += h;
            b[k] -= h;
            let fd = (s.score(&model, &a).map_err(err)?[0] - s.score(&model, &b).map_err(err)?[0]) / (2.0 * h);
            score_err = score_err.max(rel_err(fd, g[(0, k)]));
        }
    }

    // visibility cost
    let sys = presets::planar_dual_arm();
    let rig = EyeInHand::new(sys.clone(), 0);
    let place = Vector3::new(-0.1, 1.05, 0.0);
    let blocker = ConvexPolytope::cuboid(Vector3::new(-0.32, 0.82, -0.5), Vector3::new(-0.22, 0.9, 0.5));
    let occ = OcclusionModel { hulls: vec![blocker.clone()], ..OcclusionModel::default() };
    let cands = validate_all(&sample_camera_poses(&place, &SamplingConfig::planar()).map_err(err)?, &rig, &occ, &place);
    let vis = build_visibility_model(&cands, &rig, DEFAULT_SIGMA).map_err(err)?;
    let robot = rig.robot().clone();
    let mut vis_err = 0.0f64;
    for _ in 0..100 {
        let q = DVector::from_iterator(3, (0..3).map(|i| rng.random_range(robot.q_min[i]..robot.q_max[i])));
        let (_, g) = vis.cost_with_gradient(&rig, &q).map_err(err)?;
        for k in 0..3 {
            let (mut a, mut b) = (q.clone(), q.clone());
            a[k] += h;
            b[k] -= h;
            let fd = (vis.cost_with_gradient(&rig, &a).map_err(err)?.0 - vis.cost_with_gradient(&rig, &b).map_err(err)?.0) / (2.0 * h);
            vis_err = vis_err.max(rel_err(fd, g[k]));
        }
    }

    // OCP cost gradient and constraint Jacobians with proxies and visibility active
    let seeds = [dv(&[1.2, -0.5, -0.9]), dv(&[-1.2, 0.5, 0.9])];
    let start = sys.state_for_object(&pose_from_xyz_rpy([0.0, 0.45, 0.0], [0.0; 3]), [&seeds[0], &seeds[1]]).map_err(err)?;
    let mut p = PlannerProblem::new(sys.clone(), &start, pose_from_xyz_rpy([-0.1, 0.72, 0.0], [0.0, 0.0, 0.1]), PlannerConfig::default())
        .map_err(err)?;
    let world = GeometricWorld::from_polytopes(vec![blocker]);
    let learning = LearningConfig { initial_samples: 800, ..LearningConfig::default() };
    p.proxies = train_arm_proxies(&sys, &world, &[], &learning, 3).map_err(err)?;
    p.visibility = Some(VisibilityTerm { model: vis, rig });
    let ocp = build_ocp(&p).map_err(err)?;
    let x0 = ocp.initial_guess().map_err(err)?;
    let mut ocp_err = 0.0f64;
    for _ in 0..100 {
        let x = DVector::from_iterator(x0.len(), x0.iter().map(|v| v + rng.random_range(-0.05..0.05)));
        let e = ocp.evaluate(&x, true).map_err(err)?;
        let grad = e.cost_gradient();
        let jr = e.residual_jacobian.clone().ok_or("missing residual jacobian")?;
        let je = e.eq_jacobian.clone().ok_or("missing eq jacobian")?;
        let ji = e.ineq_jacobian.clone().ok_or("missing ineq jacobian")?;
        for k in 0..x.len() {
            let (mut a, mut b) = (x.clone(), x.clone());
            a[k] += h;
            b[k] -= h;
            let ea = ocp.evaluate(&a, false).map_err(err)?;
            let eb = ocp.evaluate(&b, false).map_err(err)?;
            ocp_err = ocp_err.max(rel_err((ea.cost() - eb.cost()) / (2.0 * h), grad[k]));
            for (j, va, vb) in [(&jr, &ea.residuals, &eb.residuals), (&je, &ea.eq, &eb.eq), (&ji, &ea.ineq, &eb.ineq)] {
                for r in 0..j.nrows() {
                    ocp_err = ocp_err.max(rel_err((va[r] - vb[r]) / (2.0 * h), j[(r, k)]));
                }
            }
        }
    }
    let ok = score_err <= 1e-4 && vis_err <= 1e-4 && ocp_err <= 1e-4;
    Ok((
        ok,
        format!("max relative error: collision score {score_err:.1e}, C_vis {vis_err:.1e}, OCP {ocp_err:.1e} over {} vars (<=1e-4)", x0.len()),
    ))
}

// ---------------------------------------------------------------- main

struct Line {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
}

fn report(line: Line, elapsed: Duration, outcome: Outcome) -> bool {
    let within = line.limit.is_none_or(|l| elapsed <= l);
    let (passed, detail) = match outcome {
        Ok((ok, d)) => (ok && within, d),
        Err(e) => (false, format!("error: {e}")),
    };
    let limit = line.limit.map_or("none".to_string(), |l| format!("{}s", l.as_secs()));
    println!(
        "criterion {:>2} {} {:<28} {:>8.2}s (limit {limit}) {detail}",
        line.id,
        if passed { "PASS" } else { "FAIL" },
        line.name,
        elapsed.as_secs_f64()
    );
    passed
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn line(id: u32, name: &'static str, secs: Option<u64>) -> Line {
    Line { id, name, limit: secs.map(Duration::from_secs) }
}

fn main() -> ExitCode {
    let mut all = true;
    let (o, t) = timed(criterion_1);
    all &= report(line(1, "bspline correctness", Some(1)), t, o);
    let (o, t) = timed(criterion_2);
    all &= report(line(2, "proxy accuracy", Some(30)), t, o);
    let (o, t) = timed(criterion_3);
    all &= report(line(3, "segmentation economy", Some(60)), t, o);
    let (o, t) = timed(criterion_4);
    all &= report(line(4, "kernel pattern", Some(1)), t, o);
    let (o, t) = timed(criterion_5);
    all &= report(line(5, "active-learning stability", Some(120)), t, o);
    let (o, t) = timed(criterion_6);
    all &= report(line(6, "occlusion soundness", Some(30)), t, o);

    let occluded = scenario("scenario1.toml");
    let intruder = scenario("scenario2.toml");
    let (first, t1) = timed(|| occluded.clone().and_then(|c| run(&c)));
    let (second, t2) = timed(|| intruder.clone().and_then(|c| run(&c)));
    let with = |out: &Result<RunOutput, String>, cfg: &Result<ScenarioConfig, String>, f: fn(&RunOutput, &ScenarioConfig) -> Outcome| {
        match (out, cfg) {
            (Ok(o), Ok(c)) => f(o, c),
            (Err(e), _) | (_, Err(e)) => Err(e.clone()),
        }
    };
    let (o, t) = timed(|| with(&first, &occluded, criterion_7));
    all &= report(line(7, "planner feasibility", Some(300)), t + t1, o);
    let (o, t) = timed(|| with(&first, &occluded, criterion_8));
    all &= report(line(8, "coarse-to-fine behavior", Some(300)), t + t1, o);
    let (o, t) = timed(|| with(&second, &intruder, criterion_9));
    all &= report(line(9, "replanning mode", Some(300)), t + t2, o);
    let (o, t) = timed(criterion_10);
    all &= report(line(10, "gradient hygiene", Some(60)), t, o);
    let (o, t) = timed(|| match (&first, &occluded, &second, &intruder) {
        (Ok(a), Ok(ca), Ok(b), Ok(cb)) => criterion_11(&[("scenario1", a, ca), ("scenario2", b, cb)]),
        _ => Err("scenario runs failed".into()),
    });
    all &= report(line(11, "determinism", None), t, o);

    println!("acceptance {}", if all { "PASS" } else { "FAIL" });
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
