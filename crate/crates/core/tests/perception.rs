use c2f_core::geometry::polytope::vertices_from_halfspaces;
use c2f_core::geometry::{ConvexPolytope, Sphere};
use c2f_core::kinematics::{forward_kinematics, posed_spheres, presets};
use c2f_core::perception::io::{cloud_from_text, cloud_to_text};
use c2f_core::perception::scenes::{boxed, look_at, scripted_scenes};
use c2f_core::perception::*;
use c2f_core::proxy::GeometricWorld;
use nalgebra::{DVector, Isometry3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn forward_camera(rows: usize, cols: usize) -> CameraModel {
    CameraModel::new(0, Isometry3::identity(), 1.0, 0.8, rows, cols, 3.0).unwrap()
}

/// Ground truth: the open segment from the camera to `p` crosses an obstacle
/// before reaching `p`.
fn ray_blocked(world: &GeometricWorld, c: &Vector3<f64>, p: &Vector3<f64>) -> bool {
    world.obstacles.iter().any(|o| match o.polytope.segment_interval(c, p) {
        Some((t0, _)) => t0 < 1.0 - 1e-9,
        None => false,
    })
}

/// Camera-frame point drawn inside the frustum.
fn random_frustum_point(cam: &CameraModel, rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let tx = (0.5 * cam.h_fov).tan();
    let ty = (0.5 * cam.v_fov).tan();
    let z = rng.random_range(0.05..cam.max_range);
    Vector3::new(rng.random_range(-tx..tx) * z, rng.random_range(-ty..ty) * z, z)
}

fn to_world(cam: &CameraModel, local: Vector3<f64>) -> Vector3<f64> {
    cam.pose.transform_point(&nalgebra::Point3::from(local)).coords
}

fn frame_for(scene_world: &GeometricWorld, cam: &CameraModel, extend: f64) -> OcclusionModel {
    let cloud = synthetic_depth_capture(scene_world, cam);
    let cfg = PipelineConfig { extend, ..PipelineConfig::default() };
    process_frame(&cloud, cam, &[], &OcclusionModel::default(), &cfg).unwrap().model
}

#[test]
fn capture_examples() {
    let cam = forward_camera(24, 32);
    assert!(synthetic_depth_capture(&GeometricWorld::new(1), &cam).is_empty());

    let plane = GeometricWorld::from_polytopes(vec![boxed([-5.0, -5.0, 2.0], [5.0, 5.0, 2.1])]);
    let cloud = synthetic_depth_capture(&plane, &cam);
    assert_eq!(cloud.len(), 24 * 32);
    assert!(cloud.points.iter().all(|p| (p.z - 2.0).abs() < 1e-9));

    let hidden = GeometricWorld::from_polytopes(vec![
        boxed([-1.0, -1.0, 1.0], [1.0, 1.0, 1.2]),
        boxed([-0.2, -0.2, 2.0], [0.2, 0.2, 2.4]),
    ]);
    let cloud = synthetic_depth_capture(&hidden, &forward_camera(48, 64));
    let small = &hidden.obstacles[1].polytope;
    assert!(!cloud.is_empty());
    assert_eq!(cloud.points.iter().filter(|p| small.contains(p, 1e-6)).count(), 0);
}

#[test]
fn camera_validation_and_rays() {
    assert!(CameraModel::new(0, Isometry3::identity(), 0.0, 0.8, 4, 4, 1.0).is_err());
    assert!(CameraModel::new(0, Isometry3::identity(), 1.0, std::f64::consts::PI, 4, 4, 1.0).is_err());
    assert!(CameraModel::new(0, Isometry3::identity(), 1.0, 0.8, 0, 4, 1.0).is_err());
    assert!(CameraModel::new(0, Isometry3::identity(), 1.0, 0.8, 4, 4, -1.0).is_err());
    let cam = CameraModel::new(0, look_at(Vector3::new(0.3, 0.2, 0.1), Vector3::new(1.0, 1.0, 0.0)), 1.0, 0.8, 9, 13, 2.0)
        .unwrap();
    for r in 0..9 {
        for c in 0..13 {
            let d = cam.ray(r, c);
            assert!((d.norm() - 1.0).abs() < 1e-12);
            assert!(cam.in_frustum(&(cam.origin() + d * 1.5), 1e-9));
        }
    }
    assert!(!cam.in_frustum(&(cam.origin() + cam.axis() * 2.1), 0.0));
    let aim = (Vector3::new(1.0, 1.0, 0.0) - cam.origin()).normalize();
    assert!((cam.axis().dot(&aim) - 1.0).abs() < 1e-12);
}

#[test]
fn filter_examples() {
    let s = Sphere { center: Vector3::new(0.0, 0.0, 1.0), radius: 0.1 };
    let cloud = PointCloud::new(
        vec![s.center, s.center + Vector3::new(0.15, 0.0, 0.0), s.center + Vector3::new(0.0, 0.105, 0.0)],
        0,
        0.0,
    )
    .unwrap();
    let out = filter_robot_points(&cloud, &[s], DEFAULT_INFLATION);
    assert_eq!(out.points, vec![s.center + Vector3::new(0.15, 0.0, 0.0)]);
}

#[test]
fn robot_surface_is_filtered_out() {
    let model = presets::fe7();
    let q = model.q_mid();
    let fk = forward_kinematics(&model, &q).unwrap();
    let spheres = posed_spheres(&fk, &model.collision_spheres);
    let centroid = spheres.iter().fold(Vector3::zeros(), |a, s| a + s.center) / spheres.len() as f64;
    let eye = centroid + Vector3::new(0.9, 0.6, 0.4);
    let cam = CameraModel::new(1, look_at(eye, centroid), 1.2, 1.0, 90, 120, 4.0).unwrap();
    let cloud = capture_with_robot(&GeometricWorld::new(1), &spheres, &cam, 0.0);
    assert!(cloud.len() > 500);
    let kept = filter_robot_points(&cloud, &spheres, DEFAULT_INFLATION);
    assert!((kept.len() as f64) <= 0.01 * cloud.len() as f64, "{} of {}", kept.len(), cloud.len());
}

fn blob(center: Vector3<f64>, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|_| center + Vector3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)))
        .collect()
}

#[test]
fn clustering_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut pts = blob(Vector3::zeros(), 600, &mut rng);
    pts.extend(blob(Vector3::new(2.0, 0.0, 0.0), 600, &mut rng));
    let hulls = cluster_to_hulls(&pts, 0.2, 8).unwrap();
    assert_eq!(hulls.len(), 2);
    for h in &hulls {
        for hs in h.halfspaces() {
            for v in h.vertices() {
                assert!(hs.signed_distance(v) <= 1e-9);
            }
        }
    }
    let labels = dbscan(&pts, 0.2, 8).unwrap();
    for (p, l) in pts.iter().zip(&labels) {
        if let Some(c) = l {
            let h = &hulls[*c];
            assert!(h.halfspaces().iter().all(|hs| hs.signed_distance(p) <= 1e-9));
        }
    }
    assert!(cluster_to_hulls(&pts[..5], 0.2, 8).unwrap().is_empty());
    assert!(dbscan(&pts, 0.0, 8).is_err());
    assert!(dbscan(&pts, 0.1, 0).is_err());
}

/// Brute-force DBSCAN over all pairs.
fn dbscan_oracle(points: &[Vector3<f64>], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let nb: Vec<Vec<usize>> =
        (0..n).map(|i| (0..n).filter(|&j| (points[i] - points[j]).norm() <= eps).collect()).collect();
    let core: Vec<bool> = nb.iter().map(|v| v.len() >= min_pts).collect();
    let mut label = vec![None; n];
    let mut next = 0;
    for i in 0..n {
        if !core[i] || label[i].is_some() {
            continue;
        }
        let mut stack = vec![i];
        label[i] = Some(next);
        while let Some(j) = stack.pop() {
            if !core[j] {
                continue;
            }
            for &k in &nb[j] {
                if label[k].is_none() {
                    label[k] = Some(next);
                    stack.push(k);
                }
            }
        }
        next += 1;
    }
    label
}

#[test]
fn dbscan_core_partition_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pts: Vec<Vector3<f64>> = (0..400)
        .map(|_| Vector3::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..0.2)))
        .collect();
    let (eps, min_pts) = (0.08, 5);
    let a = dbscan(&pts, eps, min_pts).unwrap();
    let b = dbscan_oracle(&pts, eps, min_pts);
    // Noise sets agree, and core points are grouped identically; border
    // points may legitimately go to either adjacent cluster.
    let core: Vec<bool> = pts
        .iter()
        .map(|p| pts.iter().filter(|q| (*p - *q).norm() <= eps).count() >= min_pts)
        .collect();
    for i in 0..pts.len() {
        assert_eq!(a[i].is_none(), b[i].is_none());
        for j in 0..pts.len() {
            if core[i] && core[j] {
                assert_eq!(a[i] == a[j], b[i] == b[j]);
            }
        }
    }
}

#[test]
fn degenerate_clusters_are_padded() {
    let flat: Vec<Vector3<f64>> =
        (0..30).map(|i| Vector3::new(0.01 * (i % 6) as f64, 0.01 * (i / 6) as f64, 0.5)).collect();
    let hulls = cluster_to_hulls(&flat, 0.05, 8).unwrap();
    assert_eq!(hulls.len(), 1);
    assert!(hulls[0].volume() > 0.0);
    assert!(flat.iter().all(|p| hulls[0].contains(p, 1e-9)));
}

#[test]
fn polytope_representations_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let pts = blob(Vector3::new(0.3, -0.2, 1.0), 40, &mut rng);
        let h = ConvexPolytope::from_points(&pts).unwrap();
        let back = vertices_from_halfspaces(h.halfspaces(), 1e-9);
        for v in h.vertices() {
            assert!(back.iter().any(|b| (b - v).norm() < 1e-7));
        }
        for b in &back {
            assert!(h.vertices().iter().any(|v| (b - v).norm() < 1e-7));
        }
    }
}

#[test]
fn occlusion_examples() {
    let cam = forward_camera(48, 64);
    let hull = boxed([-0.1, -0.1, 1.0], [0.1, 0.1, 1.2]);
    let occ = occlusion_polytope(&hull, &cam, DEFAULT_EXTEND).unwrap();
    let c = hull.centroid();
    assert!(occ.contains(&(c * 1.5), 1e-9));
    assert!(!occ.contains(&Vector3::new(0.5, 0.0, 1.5), 1e-9));
    assert!(cam.frustum().iter().all(|h| occ.vertices().iter().all(|v| h.signed_distance(v) <= 1e-9)));

    let behind = boxed([-0.1, -0.1, -1.2], [0.1, 0.1, -1.0]);
    assert!(occlusion_polytope(&behind, &cam, DEFAULT_EXTEND).is_none());
}

#[test]
fn occlusion_agrees_with_ray_oracle() {
    let cam = forward_camera(64, 80);
    let hull = boxed([-0.2, -0.1, 1.0], [0.15, 0.2, 1.3]);
    let occ = occlusion_polytope(&hull, &cam, 2.0 * cam.max_range).unwrap();
    let world = GeometricWorld::from_polytopes(vec![hull.clone()]);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut agree, mut n, mut blocked) = (0, 0, 0);
    let mut i = 0;
    while n < 1000 {
        i += 1;
        // Half the samples are aimed at the shadow so both sides are covered.
        let p = if i % 2 == 0 {
            let x = hull.vertices()[rng.random_range(0..8)] * rng.random_range(0.3..0.7)
                + hull.centroid() * 0.5;
            x * rng.random_range(1.0..2.5)
        } else {
            to_world(&cam, random_frustum_point(&cam, &mut rng))
        };
        if !cam.in_frustum(&p, 0.0) {
            continue;
        }
        n += 1;
        let truth = ray_blocked(&world, &cam.origin(), &p) || hull.contains(&p, 0.0);
        blocked += truth as usize;
        agree += (truth == occ.contains(&p, 1e-9)) as usize;
    }
    assert!(blocked > 200);
    assert!(agree as f64 >= 0.98 * n as f64, "agreement {agree}/{n}");
}

#[test]
fn scripted_scenes_are_sound() {
    for scene in scripted_scenes() {
        let model = frame_for(&scene.world, &scene.camera, 2.0 * scene.camera.max_range);
        assert!(!model.hulls.is_empty(), "{}", scene.name);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (mut blocked, mut covered) = (0, 0);
        while blocked < 500 {
            let p = to_world(&scene.camera, random_frustum_point(&scene.camera, &mut rng));
            if !ray_blocked(&scene.world, &scene.camera.origin(), &p) {
                continue;
            }
            blocked += 1;
            covered += model.occluded(&p, 1e-9) as usize;
        }
        assert!(covered as f64 >= 0.98 * blocked as f64, "{}: {covered}/{blocked}", scene.name);
    }
}

#[test]
fn integration_examples() {
    let scene = &scripted_scenes()[0];
    let current = frame_for(&scene.world, &scene.camera, DEFAULT_EXTEND);
    let same = integrate_occlusions(&current, &OcclusionModel::default());
    assert_eq!(same.occlusions.len(), current.occlusions.len());
    assert_eq!(same.hulls.len(), current.hulls.len());

    let twice = integrate_occlusions(&current, &current);
    assert_eq!(twice.occlusions.len(), current.occlusions.len());
    for (a, b) in twice.occlusions.iter().zip(&current.occlusions) {
        assert!((a.volume() - b.volume()).abs() < 1e-9);
    }
    assert_eq!(twice.hulls.len(), current.hulls.len());
    assert_eq!(twice.views.len(), 1);
}

#[test]
fn second_view_shrinks_prior_occlusion() {
    let world = GeometricWorld::from_polytopes(vec![boxed([1.0, -0.15, -0.15], [1.2, 0.15, 0.15])]);
    let first = CameraModel::new(0, look_at(Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0)), 1.0, 0.8, 96, 128, 3.0)
        .unwrap();
    let side_eye = Vector3::new(1.6, -1.4, 0.0);
    let second =
        CameraModel::new(1, look_at(side_eye, Vector3::new(1.7, 0.0, 0.0)), 1.0, 0.8, 96, 128, 3.0).unwrap();
    let cfg = PipelineConfig::default();
    let m1 = process_frame(&synthetic_depth_capture(&world, &first), &first, &[], &OcclusionModel::default(), &cfg)
        .unwrap()
        .model;
    let v1: f64 = m1.occlusions.iter().map(|p| p.volume()).sum();
    let m2 = process_frame(&synthetic_depth_capture(&world, &second), &second, &[], &m1, &cfg).unwrap().model;
    // Only the parts that stay occluded from the first view are comparable.
    let behind = |p: &ConvexPolytope| p.vertices().iter().all(|v| v.x >= 1.0 - 1e-6);
    let v2: f64 = m2.occlusions.iter().filter(|p| behind(p)).map(|p| p.volume()).sum();
    assert!(v1 > 0.0);
    assert!(v2 < v1, "before {v1}, after {v2}");
    let seen = Vector3::new(1.7, 0.0, 0.0);
    assert!(m1.occluded(&seen, 1e-9));
    assert!(!m2.occluded(&seen, 1e-9));
}

#[test]
fn two_camera_fusion_is_intersection_of_unknowns() {
    let world = GeometricWorld::from_polytopes(vec![
        boxed([1.0, -0.2, -0.2], [1.2, 0.1, 0.2]),
        boxed([1.4, 0.3, -0.1], [1.6, 0.5, 0.1]),
    ]);
    let a = CameraModel::new(0, look_at(Vector3::new(0.0, -0.3, 0.2), Vector3::new(1.3, 0.0, 0.0)), 1.0, 0.8, 96, 128, 3.0)
        .unwrap();
    let b = CameraModel::new(1, look_at(Vector3::new(0.2, 0.9, 0.3), Vector3::new(1.3, 0.0, 0.0)), 1.0, 0.8, 96, 128, 3.0)
        .unwrap();
    let ma = frame_for(&world, &a, DEFAULT_EXTEND);
    let mb = frame_for(&world, &b, DEFAULT_EXTEND);
    let merged = integrate_occlusions(&ma, &mb);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (mut n, mut agree) = (0, 0);
    while n < 2000 {
        let p = Vector3::new(rng.random_range(0.5..2.5), rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5));
        let (sa, sb) = (ma.observed(&p, 0.0), mb.observed(&p, 0.0));
        if !(sa || sb) {
            continue;
        }
        n += 1;
        let hidden_a = !sa || ma.occlusions.iter().any(|o| o.contains(&p, 1e-9));
        let hidden_b = !sb || mb.occlusions.iter().any(|o| o.contains(&p, 1e-9));
        let expect = hidden_a && hidden_b;
        let got = merged.occlusions.iter().any(|o| o.contains(&p, 1e-9));
        agree += (expect == got) as usize;
    }
    assert!(agree as f64 >= 0.98 * n as f64, "{agree}/{n}");
}

#[test]
fn cone_examples() {
    let cam = forward_camera(4, 4);
    let s = Sphere { center: Vector3::new(0.0, 0.0, 2.0), radius: 1.0 };
    let cones = dynamic_occlusion_cones(&[s], &cam).unwrap();
    let c = cones[0];
    assert!((c.half_angle - std::f64::consts::FRAC_PI_6).abs() < 1e-15);
    assert_eq!(c.half_angle, 0.5f64.asin());
    assert!(c.flags(&Vector3::new(0.0, 0.0, 4.0)));
    let off = Vector3::new((2.0 * c.half_angle).sin(), 0.0, (2.0 * c.half_angle).cos()) * 4.0;
    assert!(!c.flags(&off));
    let inside = Sphere { center: Vector3::new(0.0, 0.0, 0.5), radius: 1.0 };
    assert!(matches!(dynamic_occlusion_cones(&[inside], &cam), Err(PerceptionError::CameraInsideSphere { .. })));

    let pyramid = c.to_polytope(3.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..500 {
        let p = Vector3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(2.0..3.0));
        if c.flags(&p) {
            assert!(pyramid.contains(&p, 1e-9));
        }
    }
}

#[test]
fn cloud_text_matches_golden_file() {
    let scene = &scripted_scenes()[0];
    let cam = CameraModel { rows: 12, cols: 16, ..scene.camera.clone() };
    let mut cloud = synthetic_depth_capture(&scene.world, &cam);
    cloud.timestamp = 0.5;
    let text = cloud_to_text(&cloud, &cam.pose);
    let golden = include_str!("golden/cloud_single_box.txt");
    assert_eq!(text, golden);
    let (back, pose) = cloud_from_text(golden).unwrap();
    assert_eq!(back.len(), cloud.len());
    assert_eq!(cloud_to_text(&back, &pose), golden);
    assert!(cloud_from_text("c2f-cloud 2\n").is_err());
    let header = format!("points {}\n", cloud.len());
    assert!(cloud_from_text(&golden.replace(&header, &format!("points {}\n", cloud.len() + 1))).is_err());
}

#[test]
fn scene_round_trip() {
    let scene = &scripted_scenes()[1];
    let doc = Scene::from_world(&scene.world, &[scene.camera.clone()]);
    let text = doc.to_toml();
    let back = Scene::from_toml(&text).unwrap();
    assert_eq!(back, doc);
    let world = back.world().unwrap();
    assert_eq!(world.obstacles.len(), scene.world.obstacles.len());
    for (a, b) in world.obstacles.iter().zip(&scene.world.obstacles) {
        assert!((a.polytope.volume() - b.polytope.volume()).abs() < 1e-12);
    }
    assert_eq!(back.cameras().unwrap()[0].rows, scene.camera.rows);
    assert!(Scene::from_toml(&text.replace("c2f-scene", "other")).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn filtering_is_a_subset(
        pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 0..60),
        spheres in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, 0.01f64..0.5), 0..5),
    ) {
        let cloud = PointCloud::new(pts.iter().map(|&(x, y, z)| Vector3::new(x, y, z)).collect(), 0, 0.0).unwrap();
        let s: Vec<Sphere> = spheres.iter().map(|&(x, y, z, r)| Sphere { center: Vector3::new(x, y, z), radius: r }).collect();
        let out = filter_robot_points(&cloud, &s, DEFAULT_INFLATION);
        prop_assert!(out.len() <= cloud.len());
        for p in &out.points {
            prop_assert!(cloud.points.contains(p));
            prop_assert!(s.iter().all(|s| (p - s.center).norm() > s.radius * DEFAULT_INFLATION));
        }
        let removed = cloud.len() - out.len();
        let expected = cloud.points.iter().filter(|p| s.iter().any(|s| (*p - s.center).norm() <= s.radius * DEFAULT_INFLATION)).count();
        prop_assert_eq!(removed, expected);
    }

    #[test]
    fn adding_a_hull_never_shrinks_occlusion(x in -0.3f64..0.3, y in -0.3f64..0.3) {
        let cam = forward_camera(8, 8);
        let a = boxed([-0.1, -0.1, 1.0], [0.1, 0.1, 1.2]);
        let b = boxed([x - 0.05, y - 0.05, 1.5], [x + 0.05, y + 0.05, 1.6]);
        let one = OcclusionModel::from_frame(vec![a.clone()], &cam, DEFAULT_EXTEND);
        let two = OcclusionModel::from_frame(vec![a, b], &cam, DEFAULT_EXTEND);
        let p = Vector3::new(x, y, 1.9);
        prop_assert!(!one.occluded(&p, 1e-9) || two.occluded(&p, 1e-9));
    }
}

#[test]
fn frame_uses_robot_spheres() {
    let model = presets::planar_three_link();
    let q = DVector::from_vec(vec![0.3, 0.5, -0.4]);
    let fk = forward_kinematics(&model, &q).unwrap();
    let spheres = posed_spheres(&fk, &model.collision_spheres);
    let cam = CameraModel::new(0, look_at(Vector3::new(0.3, 0.0, 1.5), Vector3::new(0.4, 0.3, 0.0)), 1.2, 1.0, 48, 64, 3.0)
        .unwrap();
    let cloud = capture_with_robot(&GeometricWorld::new(1), &spheres, &cam, 0.0);
    let frame = process_frame(&cloud, &cam, &spheres, &OcclusionModel::default(), &PipelineConfig::default()).unwrap();
    assert!(frame.model.hulls.is_empty());
    assert_eq!(frame.cones.len(), spheres.len());
}

