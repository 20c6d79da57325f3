//! Keeping the per-arm collision proxies in step with the perceived world.
//!
//! The proxies learn an inflated copy of the perceived obstacles. A solved
//! plan is replayed against that same geometry; if it clips an obstacle the
//! proxies receive trajectory-biased active updates and the plan is solved
//! again from where it stopped.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ocp::{build_ocp, ArmProxy, PlannerProblem, PlannerSolution};
use super::solver::Duals;
use super::PlannerError;
use crate::kinematics::ClosedChainSystem;
use crate::proxy::{active_update, robot_clearance, ActiveConfig, BiasedSampler, CollisionDetector, GeometricWorld, GramPruneConfig, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningConfig {
    pub initial_samples: usize,
    /// Share of refresh samples drawn around the planned trajectory.
    pub trajectory_weight: f64,
    /// Joint-space spread of trajectory-biased samples, radians.
    pub trajectory_sigma: f64,
    /// Phases checked per verification pass.
    pub verify_samples: usize,
    pub max_rounds: usize,
    pub train: TrainConfig,
    pub prune: Option<GramPruneConfig>,
    pub active: ActiveConfig,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            initial_samples: 4000,
            trajectory_weight: 0.7,
            trajectory_sigma: 0.12,
            verify_samples: 300,
            max_rounds: 4,
            train: TrainConfig::default(),
            prune: Some(GramPruneConfig::default()),
            active: ActiveConfig { explore_samples: 1500, ..ActiveConfig::default() },
        }
    }
}

fn arm_configs(states: &[DVector<f64>], system: &ClosedChainSystem, arm: usize) -> Vec<DVector<f64>> {
    let off = if arm == 0 { 0 } else { system.robots[0].joint_count() };
    let n = system.robots[arm].joint_count();
    states.iter().map(|z| z.rows(off, n).into_owned()).collect()
}

/// Trains one detector per arm on uniform samples plus, when given,
/// samples around a reference path of full states.
pub fn train_arm_proxies(
    system: &ClosedChainSystem,
    world: &GeometricWorld,
    path: &[DVector<f64>],
    cfg: &LearningConfig,
    seed: u64,
) -> Result<Vec<ArmProxy>, PlannerError> {
    (0..2)
        .map(|arm| {
            let model = system.carrying_model(arm);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(arm as u64));
            let uniform = BiasedSampler::uniform(&model);
            let biased = uniform.clone().with_trajectory(arm_configs(path, system, arm), cfg.trajectory_weight, cfg.trajectory_sigma);
            let sampler = if path.is_empty() { &uniform } else { &biased };
            let rows: Vec<DVector<f64>> = (0..cfg.initial_samples).map(|_| sampler.sample(&mut rng)).collect();
            let x = DMatrix::from_fn(rows.len(), model.joint_count(), |i, j| rows[i][j]);
            let (detector, _) = CollisionDetector::train(&model, world, &x, &cfg.train, cfg.prune.as_ref())?;
            Ok(ArmProxy { model, detector })
        })
        .collect()
}

/// One active-learning cycle per support set, biased toward `path`.
pub fn refresh_proxies(
    proxies: &[ArmProxy],
    system: &ClosedChainSystem,
    world: &GeometricWorld,
    path: &[DVector<f64>],
    cfg: &LearningConfig,
    seed: u64,
) -> Result<Vec<ArmProxy>, PlannerError> {
    let mut out = Vec::with_capacity(proxies.len());
    for (arm, proxy) in proxies.iter().enumerate() {
        let sampler = BiasedSampler::uniform(&proxy.model).with_trajectory(
            arm_configs(path, system, arm),
            cfg.trajectory_weight,
            cfg.trajectory_sigma,
        );
        let base = seed.wrapping_mul(31).wrapping_add(arm as u64 * 1009);
        let sets = proxy
            .detector
            .sets
            .par_iter()
            .enumerate()
            .map(|(g, set)| {
                let mut rng = ChaCha8Rng::seed_from_u64(base.wrapping_add(g as u64));
                let active = ActiveConfig { train: cfg.train, prune: cfg.prune, ..cfg.active };
                active_update(set, &proxy.model, world, &active, &sampler, &mut rng).map(|(s, _)| s)
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push(ArmProxy { model: proxy.model.clone(), detector: CollisionDetector { sets } });
    }
    Ok(out)
}

/// Full states of a solution at `samples + 1` uniform phases.
pub fn sample_states(solution: &PlannerSolution, samples: usize) -> Vec<DVector<f64>> {
    let curve = solution.curve();
    (0..=samples)
        .map(|i| curve.evaluate(i as f64 / samples as f64).expect("phase in range"))
        .collect()
}

/// Smallest clearance of either carrying arm to `world` along the states.
pub fn path_clearance(system: &ClosedChainSystem, world: &GeometricWorld, states: &[DVector<f64>]) -> Result<f64, PlannerError> {
    if world.obstacles.is_empty() {
        return Ok(f64::INFINITY);
    }
    let models = [system.carrying_model(0), system.carrying_model(1)];
    let per = states
        .par_iter()
        .map(|z| {
            let mut c = f64::INFINITY;
            for (arm, m) in models.iter().enumerate() {
                let q = arm_configs(std::slice::from_ref(z), system, arm).remove(0);
                c = c.min(robot_clearance(world, m, &q)?);
            }
            Ok(c)
        })
        .collect::<Result<Vec<f64>, crate::proxy::ProxyError>>()?;
    Ok(per.into_iter().fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone)]
pub struct VerifiedSolve {
    pub solution: PlannerSolution,
    /// Clearance of the final plan to the learned (inflated) world.
    pub clearance: f64,
    pub rounds: usize,
    pub verified: bool,
}

/// Solves, replays the plan against `world`, and refreshes the proxies
/// around the plan until it is clear or the round budget is spent.
pub fn solve_verified(
    problem: &mut PlannerProblem,
    world: &GeometricWorld,
    warm_start: Option<&DVector<f64>>,
    duals: Option<&Duals>,
    cfg: &LearningConfig,
    rng: &mut ChaCha8Rng,
) -> Result<VerifiedSolve, PlannerError> {
    let mut warm = warm_start.cloned();
    let mut duals = duals.cloned();
    let mut rounds = 0;
    loop {
        let ocp = build_ocp(problem)?;
        let solution = ocp.solve_with(warm.as_ref(), duals.as_ref())?;
        let states = sample_states(&solution, cfg.verify_samples);
        let clearance = path_clearance(&problem.system, world, &states)?;
        let verified = clearance >= 0.0;
        if verified || rounds >= cfg.max_rounds || problem.proxies.is_empty() {
            return Ok(VerifiedSolve { solution, clearance, rounds, verified });
        }
        rounds += 1;
        let seed: u64 = rng.random();
        problem.proxies = refresh_proxies(&problem.proxies, &problem.system, world, &states, cfg, seed)?;
        warm = Some(solution.x.clone());
        duals = None;
    }
}
