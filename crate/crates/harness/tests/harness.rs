use std::path::PathBuf;
use std::sync::OnceLock;

use c2f_core::kinematics::SystemState;
use c2f_core::planner::TrajectoryTable;
use c2f_core::proxy::GeometricWorld;
use c2f_harness::config::{BoxSpec, EventAction};
use c2f_harness::plot::{clearance_points, path_points, run_figures};
use c2f_harness::sense::system_spheres;
use c2f_harness::*;
use nalgebra::{DVector, Vector3};
use proptest::prelude::*;

fn text(name: &str) -> String {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "scenarios", name].iter().collect();
    std::fs::read_to_string(path).unwrap()
}

fn control() -> ScenarioConfig {
    ScenarioConfig::from_toml(&text("scenario1_unoccluded.toml")).unwrap()
}

fn control_run() -> &'static RunOutput {
    static RUN: OnceLock<RunOutput> = OnceLock::new();
    RUN.get_or_init(|| run_scenario(&control(), RunOptions::default()).unwrap())
}

fn drop_line(src: &str, prefix: &str) -> String {
    src.lines().filter(|l| !l.starts_with(prefix)).collect::<Vec<_>>().join("\n")
}

#[test]
fn scenario_files_parse_and_round_trip() {
    for name in ["scenario1.toml", "scenario1_unoccluded.toml", "scenario2.toml"] {
        let cfg = ScenarioConfig::from_toml(&text(name)).unwrap();
        let back = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg, "{name}");
    }
    let occluded = ScenarioConfig::from_toml(&text("scenario1.toml")).unwrap();
    assert!(occluded.eye_camera.is_some());
    assert!(!occluded.has_events());
    assert!(ScenarioConfig::from_toml(&text("scenario2.toml")).unwrap().has_events());
}

#[test]
fn invalid_scenarios_are_rejected() {
    let src = text("scenario1_unoccluded.toml");
    let rejects = |s: &str| ScenarioConfig::from_toml(s).is_err();
    assert!(rejects(&drop_line(&src, "seed =")), "seed is mandatory");
    assert!(rejects(&src.replace("name = \"scenario-1-unoccluded\"", "name = \"two words\"")));
    assert!(rejects(&src.replace("max_steps = 200", "max_steps = 0")));
    assert!(rejects(&src.replace("c2f-scenario", "c2f-other")));
    assert!(rejects(&src.replace("version = 1\nname", "version = 2\nname")));
    assert!(rejects(&src.replace("preset = \"planar-dual-arm\"", "preset = \"seven-dof\"")));
    assert!(rejects(&src.replace("hi = [0.25, 1.2, 0.1]", "hi = [-0.5, 1.2, 0.1]")));
    assert!(rejects(&format!("unknown_key = 1\n{src}")));
    assert!(rejects(&src.replace("seeds = [[1.2, -0.5, -0.9]", "seeds = [[1.2, -0.5]")));
    let events = "\n[[events]]\ntime = 0.5\naction = \"remove\"\nid = \"a\"\n\n[[events]]\ntime = 0.2\naction = \"remove\"\nid = \"a\"\n";
    assert!(rejects(&format!("{src}{events}")), "event times must not decrease");
    assert!(rejects(&format!("{src}\n[[events]]\ntime = 0.1\naction = \"set\"\nid = \"a\"\n")), "set needs a box");
    let eye = text("scenario1.toml");
    assert!(ScenarioConfig::from_toml(&eye).is_ok());
    assert!(rejects(&eye.replace("azimuths = 24", "azimuths = 0")));
    assert!(rejects(&eye.replace("arm = 0", "arm = 2")));
}

#[test]
fn events_script_the_world() {
    let cfg = ScenarioConfig::from_toml(&text("scenario2.toml")).unwrap();
    let ids = |t: f64| cfg.world_at(t).into_iter().map(|(id, _)| id).collect::<Vec<_>>();
    assert_eq!(ids(0.0), ["shelf"]);
    assert_eq!(ids(0.25), ["shelf", "intruder"]);
    assert_eq!(ids(0.9), ["shelf"]);
    let moved = cfg.world_at(0.5).into_iter().find(|(id, _)| id == "intruder").unwrap().1;
    let c = moved.centroid();
    assert!((c - Vector3::new(0.0, 0.77, 0.0)).norm() < 1e-9);
    assert_eq!(cfg.events[2].action, EventAction::Remove);
    assert_eq!(cfg.geometric_world_at(0.5).obstacles.len(), 2);
}

#[test]
fn control_run_passes_and_files_round_trip() {
    let out = control_run();
    assert!(out.report.verdict.passed, "{:?}", out.report.verdict.reasons);
    assert!(out.summary.completed);
    assert!(out.summary.replanning_entries.is_empty());
    let back = RunReport::from_text(&out.report.to_text()).unwrap();
    assert_eq!(back.to_text(), out.report.to_text());
    assert_eq!(back.records.len(), out.report.records.len());
    let table = TrajectoryTable::from_text(&out.table.to_text()).unwrap();
    assert_eq!(table.to_text(), out.table.to_text());
    assert!(out.table.rows.windows(2).all(|w| w[1].time > w[0].time));
    let last = out.table.rows.last().unwrap();
    assert!((last.phase - 1.0).abs() < 1e-12);
    assert!(RunReport::from_text("c2f-report 9\n").is_err());
}

#[test]
fn runs_are_deterministic() {
    let again = run_scenario(&control(), RunOptions::default()).unwrap();
    assert_eq!(again.table.to_text(), control_run().table.to_text());
    let other = run_scenario(&control(), RunOptions { seed: Some(8), ..RunOptions::default() }).unwrap();
    assert_eq!(other.report.seed, 8);
}

/// Signed distance from `p` to the axis-aligned box `b` by clamping.
fn box_distance(b: &BoxSpec, p: &Vector3<f64>) -> f64 {
    let lo = Vector3::from(b.lo);
    let hi = Vector3::from(b.hi);
    let q = Vector3::from_fn(|i, _| p[i].clamp(lo[i], hi[i]));
    let outside = (p - q).norm();
    if outside > 0.0 {
        return outside;
    }
    -(0..3).map(|i| (p[i] - lo[i]).min(hi[i] - p[i])).fold(f64::INFINITY, f64::min)
}

fn joints_of(table: &TrajectoryTable, z: &DVector<f64>) -> [DVector<f64>; 2] {
    let n = table.joints;
    [z.rows(0, n[0]).into_owned(), z.rows(n[0], n[1]).into_owned()]
}

#[test]
fn audit_is_clean_and_matches_clamp_oracle() {
    let cfg = control();
    let out = control_run();
    let system = cfg.system().unwrap();
    let audit = replay_audit(&out.table, &cfg.geometric_world_at(0.0), &system, &AuditConfig::default()).unwrap();
    assert!(audit.is_clean(), "{}", audit.to_text());
    assert_eq!(audit.samples, out.table.rows.len() + (out.table.rows.len() - 1) * 9);
    assert!(audit.max_chain_residual <= 1e-3);
    for (row, got) in out.table.rows.iter().zip(&audit.row_clearance) {
        let q = joints_of(&out.table, &row.z);
        let object = system.object_pose(0, &q[0]).unwrap();
        let spheres = system_spheres(&system, &SystemState { q: q.clone(), object }).unwrap();
        let oracle = spheres
            .iter()
            .flat_map(|s| cfg.obstacles.iter().map(move |o| box_distance(&o.shape, &s.center) - s.radius))
            .fold(f64::INFINITY, f64::min);
        assert!((oracle - got).abs() < 1e-9, "row {}: {oracle} vs {got}", row.time);
    }
    let plotted = clearance_points(&out.table, &cfg).unwrap();
    for ((_, c), a) in plotted.iter().zip(&audit.row_clearance) {
        assert_eq!(c, a);
    }
}

#[test]
fn audit_flags_corrupted_tables() {
    let cfg = control();
    let system = cfg.system().unwrap();
    let world = cfg.geometric_world_at(0.0);
    let base = control_run().table.clone();
    let k = base.rows.len() / 2;
    let audit = |t: &TrajectoryTable, w: &GeometricWorld| replay_audit(t, w, &system, &AuditConfig::default()).unwrap();
    let kinds = |r: &AuditReport| r.violations.iter().map(|v| v.kind).collect::<Vec<_>>();

    // an obstacle dropped on the object mid-run
    let o = base.joints[0] + base.joints[1];
    let c = Vector3::new(base.rows[k].z[o], base.rows[k].z[o + 1], base.rows[k].z[o + 2]);
    let mut crowded = world.clone();
    crowded.push(BoxSpec { lo: (c - Vector3::repeat(0.05)).into(), hi: (c + Vector3::repeat(0.05)).into() }.polytope(), 0);
    let r = audit(&base, &crowded);
    assert!(kinds(&r).contains(&ViolationKind::Collision));
    assert!(r.min_clearance < 0.0);

    // one arm twisted away from the grasp
    let mut twisted = base.clone();
    twisted.rows[k].z[base.joints[0]] += 0.3;
    assert!(kinds(&audit(&twisted, &world)).contains(&ViolationKind::ChainResidual));

    let mut fast = base.clone();
    fast.rows[k].zd[0] = 1e3;
    fast.rows[k].zdd[1] = -1e4;
    let r = audit(&fast, &world);
    assert!(kinds(&r).contains(&ViolationKind::VelocityLimit));
    assert!(kinds(&r).contains(&ViolationKind::AccelerationLimit));

    let mut stretched = base.clone();
    stretched.rows[k].z[0] = system.robots[0].q_max[0] + 0.1;
    assert!(kinds(&audit(&stretched, &world)).contains(&ViolationKind::PositionLimit));

    assert!(replay_audit(&base, &world, &system, &AuditConfig { oversample: 0, ..AuditConfig::default() }).is_err());
    let text = audit(&fast, &world).to_text();
    assert!(text.starts_with("c2f-audit 1\n"));
    assert!(text.contains("velocity-limit"));
}

#[test]
fn timed_audit_sees_moving_obstacles() {
    let cfg = control();
    let system = cfg.system().unwrap();
    let table = &control_run().table;
    let static_world = cfg.geometric_world_at(0.0);
    let o = table.joints[0] + table.joints[1];
    let mid = &table.rows[table.rows.len() / 2];
    let c = Vector3::new(mid.z[o], mid.z[o + 1], mid.z[o + 2]);
    let blocker = BoxSpec { lo: (c - Vector3::repeat(0.05)).into(), hi: (c + Vector3::repeat(0.05)).into() }.polytope();
    // the box exists only long after the run ended
    let late = |t: f64| {
        let mut w = static_world.clone();
        if t > 1e3 {
            w.push(blocker.clone(), 0);
        }
        w
    };
    let r = replay_audit_timed(table, &late, &system, &AuditConfig::default()).unwrap();
    assert!(r.is_clean());
    let during = |t: f64| {
        let mut w = static_world.clone();
        if (t - mid.time).abs() < 0.05 {
            w.push(blocker.clone(), 0);
        }
        w
    };
    let r = replay_audit_timed(table, &during, &system, &AuditConfig::default()).unwrap();
    assert!(r.violations.iter().all(|v| (v.time - mid.time).abs() < 0.05 + 1e-9));
    assert!(!r.is_clean());
}

#[test]
fn figures_come_from_the_table() {
    let cfg = control();
    let out = control_run();
    let xy = path_points(&out.table, (0, 1));
    let o = out.table.joints[0] + out.table.joints[1];
    for (p, row) in xy.iter().zip(&out.table.rows) {
        assert_eq!(*p, (row.z[o], row.z[o + 1]));
    }
    let figs = run_figures(&out.report, &out.table, &cfg).unwrap();
    let names: Vec<&str> = figs.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(names, ["visibility.svg", "distance.svg", "path_xy.svg", "path_yz.svg"]);
    for (name, svg) in &figs {
        assert!(svg.trim_start().starts_with("<svg"), "{name}");
        assert!(svg.trim_end().ends_with("</svg>"), "{name}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn box_validation_follows_corner_order(lo in prop::array::uniform3(-1.0f64..1.0), size in prop::array::uniform3(-0.5f64..0.5)) {
        let hi = [lo[0] + size[0], lo[1] + size[1], lo[2] + size[2]];
        let src = text("scenario1_unoccluded.toml")
            .replace("lo = [-0.45, 1.14, -0.1]", &format!("lo = [{:?}, {:?}, {:?}]", lo[0], lo[1], lo[2]))
            .replace("hi = [0.25, 1.2, 0.1]", &format!("hi = [{:?}, {:?}, {:?}]", hi[0], hi[1], hi[2]));
        let ordered = size.iter().all(|s| *s > 0.0);
        prop_assert_eq!(ScenarioConfig::from_toml(&src).is_ok(), ordered);
    }

    #[test]
    fn hermite_replay_passes_through_rows(oversample in 1usize..12) {
        // interpolation never reports less clearance than its own rows
        let cfg = control();
        let out = control_run();
        let r = replay_audit(&out.table, &cfg.geometric_world_at(0.0), &cfg.system().unwrap(), &AuditConfig { oversample, ..AuditConfig::default() }).unwrap();
        prop_assert_eq!(r.samples, out.table.rows.len() + (out.table.rows.len() - 1) * (oversample - 1));
        let row_min = r.row_clearance.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(r.min_clearance <= row_min);
    }
}
