//! Camera-pose candidates around a placing spot and the kernel model that
//! rewards configurations near dense sets of valid eye-in-hand views.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Isometry3, Matrix3, Translation3, UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::pose::rotation_with_z_axis;
use crate::geometry::Pose;
use crate::kinematics::{
    forward_kinematics, point_jacobian, solve_ik_with_restarts, ClosedChainSystem, IkOptions, KinematicsError,
    RobotModel,
};
use crate::perception::OcclusionModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VisibilityError {
    #[error("empty sampling range: {0}")]
    EmptyRange(&'static str),
    #[error("no valid camera pose; widen the sampling ranges")]
    NoValidPoses,
    #[error("kernel width must be positive")]
    InvalidSigma,
    #[error("kernel system is singular")]
    Singular,
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingConfig {
    /// Distinct azimuth phases; each shifts the azimuth grid by a fraction
    /// of one azimuth step.
    pub positions: usize,
    pub radii: Vec<f64>,
    pub azimuths: usize,
    /// Elevation angles (rad) above the horizontal plane through the spot.
    pub elevations: Vec<f64>,
    pub rolls: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            positions: 5,
            radii: vec![0.3, 0.45, 0.6],
            azimuths: 8,
            elevations: vec![-0.35, 0.0, 0.35],
            rolls: 2,
        }
    }
}

impl SamplingConfig {
    /// In-plane variant for planar arms: one elevation, one roll.
    pub fn planar() -> Self {
        SamplingConfig { elevations: vec![0.0], rolls: 1, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateCameraPose {
    pub pose: Pose,
    /// Camera-arm configuration.
    pub ik_solution: Option<DVector<f64>>,
    /// Partner-arm configuration closing the chain.
    pub partner_solution: Option<DVector<f64>>,
    pub valid: bool,
}

impl CandidateCameraPose {
    pub fn position(&self) -> Vector3<f64> {
        self.pose.translation.vector
    }

    pub fn optical_axis(&self) -> Vector3<f64> {
        self.pose.rotation * Vector3::z()
    }
}

/// Positions on spheres around `p_place`, each aimed at it, with
/// `rolls` evenly spaced rotations about the optical axis. Roll zero puts
/// the camera `x` axis as close to world `+z` as possible.
pub fn sample_camera_poses(p_place: &Vector3<f64>, cfg: &SamplingConfig) -> Result<Vec<CandidateCameraPose>, VisibilityError> {
    if cfg.positions == 0 {
        return Err(VisibilityError::EmptyRange("positions"));
    }
    if cfg.radii.is_empty() || cfg.radii.iter().any(|&r| r.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)) {
        return Err(VisibilityError::EmptyRange("radii"));
    }
    if cfg.azimuths == 0 {
        return Err(VisibilityError::EmptyRange("azimuths"));
    }
    if cfg.elevations.is_empty() {
        return Err(VisibilityError::EmptyRange("elevations"));
    }
    if cfg.rolls == 0 {
        return Err(VisibilityError::EmptyRange("rolls"));
    }
    let step = 2.0 * PI / cfg.azimuths as f64;
    let mut out = Vec::new();
    for k in 0..cfg.positions {
        let phase = step * k as f64 / cfg.positions as f64;
        for &r in &cfg.radii {
            for a in 0..cfg.azimuths {
                let az = phase + step * a as f64;
                for &el in &cfg.elevations {
                    let dir = Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
                    let eye = p_place + dir * r;
                    let base = rotation_with_z_axis(&(p_place - eye), &Vector3::z());
                    for roll in 0..cfg.rolls {
                        let spin = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 2.0 * PI * roll as f64 / cfg.rolls as f64);
                        out.push(CandidateCameraPose {
                            pose: Isometry3::from_parts(Translation3::from(eye), base * spin),
                            ik_solution: None,
                            partner_solution: None,
                            valid: false,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Camera frame relative to the camera arm's end effector: optical axis
/// along the effector `y` axis, image `x` along the effector `z` axis.
pub fn default_mount() -> Pose {
    let r = Matrix3::from_columns(&[Vector3::z(), Vector3::x(), Vector3::y()]);
    let rot = UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(r));
    Isometry3::from_parts(Translation3::identity(), rot)
}

/// Eye-in-hand setup on one arm of a closed chain.
#[derive(Debug, Clone)]
pub struct EyeInHand {
    pub system: ClosedChainSystem,
    pub arm: usize,
    pub mount: Pose,
    pub ik_restarts: usize,
    pub seed: u64,
}

impl EyeInHand {
    pub fn new(system: ClosedChainSystem, arm: usize) -> Self {
        EyeInHand { system, arm, mount: default_mount(), ik_restarts: 8, seed: 0 }
    }

    pub fn robot(&self) -> &RobotModel {
        &self.system.robots[self.arm]
    }

    pub fn camera_pose(&self, q: &DVector<f64>) -> Result<Pose, KinematicsError> {
        Ok(forward_kinematics(self.robot(), q)?.ee * self.mount)
    }

    /// Camera position and wrist (last joint) position.
    pub fn control_points(&self, q: &DVector<f64>) -> Result<[Vector3<f64>; 2], KinematicsError> {
        let fk = forward_kinematics(self.robot(), q)?;
        let cam = (fk.ee * self.mount).translation.vector;
        Ok([cam, *fk.joint_origins.last().expect("arm has joints")])
    }
}

/// Resolves validity: both arms must admit IK for the camera pose and the
/// chain it implies, and the sight segment to `p_place` must miss every
/// obstacle hull.
pub fn validate_pose(
    candidate: &CandidateCameraPose,
    rig: &EyeInHand,
    occlusion: &OcclusionModel,
    p_place: &Vector3<f64>,
    index: u64,
) -> CandidateCameraPose {
    let mut out = CandidateCameraPose { ik_solution: None, partner_solution: None, valid: false, ..candidate.clone() };
    let sys = &rig.system;
    let other = 1 - rig.arm;
    let ee = candidate.pose * rig.mount.inverse();
    let object = ee * sys.grasps[rig.arm];
    let partner_ee = object * sys.grasps[other].inverse();
    let mut rng = ChaCha8Rng::seed_from_u64(rig.seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let opts = IkOptions::default();
    let a = &sys.robots[rig.arm];
    let b = &sys.robots[other];
    let Ok(qa) = solve_ik_with_restarts(a, &ee, &a.q_mid(), rig.ik_restarts, &opts, &mut rng) else { return out };
    out.ik_solution = Some(qa);
    let Ok(qb) = solve_ik_with_restarts(b, &partner_ee, &b.q_mid(), rig.ik_restarts, &opts, &mut rng) else {
        return out;
    };
    out.partner_solution = Some(qb);
    out.valid = !occlusion.segment_blocked(&candidate.position(), p_place);
    out
}

pub fn validate_all(
    candidates: &[CandidateCameraPose],
    rig: &EyeInHand,
    occlusion: &OcclusionModel,
    p_place: &Vector3<f64>,
) -> Vec<CandidateCameraPose> {
    candidates.par_iter().enumerate().map(|(i, c)| validate_pose(c, rig, occlusion, p_place, i as u64)).collect()
}

/// Mean over the two control points of `exp(-|a_k - b_k| / sigma)`; a sum
/// of Laplacian kernels, hence positive definite on distinct point pairs.
fn kernel(a: &[Vector3<f64>; 2], b: &[Vector3<f64>; 2], sigma: f64) -> f64 {
    0.5 * ((-(a[0] - b[0]).norm() / sigma).exp() + (-(a[1] - b[1]).norm() / sigma).exp())
}

pub const DEFAULT_SIGMA: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct VisibilityModel {
    pub sigma: f64,
    /// Distinct control-point pairs of the valid candidates.
    pub points: Vec<[Vector3<f64>; 2]>,
    pub multiplicity: Vec<usize>,
    /// Kernel density `Y = K m` at each distinct pair.
    pub density: DVector<f64>,
    pub weights: DVector<f64>,
}

/// Interpolates the kernel density of the valid candidates. Candidates with
/// identical control points are merged and counted with multiplicity so the
/// kernel system stays nonsingular.
pub fn build_visibility_model(
    candidates: &[CandidateCameraPose],
    rig: &EyeInHand,
    sigma: f64,
) -> Result<VisibilityModel, VisibilityError> {
    let mut points: Vec<[Vector3<f64>; 2]> = Vec::new();
    let mut multiplicity: Vec<usize> = Vec::new();
    for c in candidates.iter().filter(|c| c.valid) {
        let q = c.ik_solution.as_ref().ok_or(VisibilityError::NoValidPoses)?;
        let p = rig.control_points(q)?;
        match points.iter().position(|o| (o[0] - p[0]).norm() < 1e-9 && (o[1] - p[1]).norm() < 1e-9) {
            Some(i) => multiplicity[i] += 1,
            None => {
                points.push(p);
                multiplicity.push(1);
            }
        }
    }
    VisibilityModel::from_points(points, multiplicity, sigma)
}

impl VisibilityModel {
    /// Model over distinct control-point pairs with their multiplicities.
    pub fn from_points(
        points: Vec<[Vector3<f64>; 2]>,
        multiplicity: Vec<usize>,
        sigma: f64,
    ) -> Result<Self, VisibilityError> {
        if sigma.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(VisibilityError::InvalidSigma);
        }
        if points.is_empty() {
            return Err(VisibilityError::NoValidPoses);
        }
        let n = points.len();
        let k = DMatrix::from_fn(n, n, |i, j| kernel(&points[i], &points[j], sigma));
        let m = DVector::from_iterator(n, multiplicity.iter().map(|&x| x as f64));
        let density = &k * &m;
        let weights = k.cholesky().map(|c| c.solve(&density)).ok_or(VisibilityError::Singular)?;
        Ok(VisibilityModel { sigma, points, multiplicity, density, weights })
    }

    /// `max |K w - Y|` of the interpolation solve.
    pub fn solve_residual(&self) -> f64 {
        let n = self.points.len();
        let k = DMatrix::from_fn(n, n, |i, j| kernel(&self.points[i], &self.points[j], self.sigma));
        (k * &self.weights - &self.density).amax()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_density(&self) -> f64 {
        self.density.max()
    }

    pub fn score_points(&self, p: &[Vector3<f64>; 2]) -> f64 {
        self.points.iter().zip(self.weights.iter()).map(|(s, w)| w * kernel(p, s, self.sigma)).sum()
    }

    pub fn score(&self, rig: &EyeInHand, q: &DVector<f64>) -> Result<f64, VisibilityError> {
        Ok(self.score_points(&rig.control_points(q)?))
    }

    /// Score divided by the largest candidate density; about 1 at the
    /// densest valid pose and 0 far from all of them.
    pub fn normalized_score(&self, rig: &EyeInHand, q: &DVector<f64>) -> Result<f64, VisibilityError> {
        Ok(self.score(rig, q)? / self.max_density())
    }

    /// `C_vis = -score` and its gradient over the camera arm's joints.
    pub fn cost_with_gradient(&self, rig: &EyeInHand, q: &DVector<f64>) -> Result<(f64, DVector<f64>), VisibilityError> {
        let fk = forward_kinematics(rig.robot(), q)?;
        let n = rig.robot().joint_count();
        let cam = (fk.ee * rig.mount).translation.vector;
        let wrist = fk.joint_origins[n - 1];
        let jc = point_jacobian(&fk, n, &cam);
        let jw = point_jacobian(&fk, n - 1, &wrist);
        let mut score = 0.0;
        let mut gc = Vector3::zeros();
        let mut gw = Vector3::zeros();
        for (s, w) in self.points.iter().zip(self.weights.iter()) {
            for (k, (p, g)) in [(cam, &mut gc), (wrist, &mut gw)].into_iter().enumerate() {
                let d = p - s[k];
                let r = d.norm();
                let e = (-r / self.sigma).exp();
                score += 0.5 * w * e;
                if r > 1e-15 {
                    *g += d * (-0.5 * w * e / (self.sigma * r));
                }
            }
        }
        let grad = -(jc.transpose() * gc + jw.transpose() * gw);
        Ok((-score, grad))
    }
}

/// Convenience wrapper matching the cost's name in the planner.
pub fn visibility_cost(model: &VisibilityModel, rig: &EyeInHand, q: &DVector<f64>) -> Result<(f64, DVector<f64>), VisibilityError> {
    model.cost_with_gradient(rig, q)
}

/// True when some hull centroid moved more than `tol` or hulls appeared or
/// vanished; the model is rebuilt only then.
pub fn occlusion_changed(old: &OcclusionModel, new: &OcclusionModel, tol: f64) -> bool {
    if old.hulls.len() != new.hulls.len() {
        return true;
    }
    old.hulls.iter().any(|h| {
        let c = h.centroid();
        !new.hulls.iter().any(|k| (k.centroid() - c).norm() <= tol)
    })
}
