//! Reset-based active learning with exploitation and biased exploration.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::dataset::LabeledDataset;
use super::support::{accuracy, train, GramPruneConfig, SupportSet, TrainConfig, TrainReport};
use super::world::GeometricWorld;
use super::ProxyError;
use crate::kinematics::RobotModel;

/// Mixture of neighborhoods of past trajectory configurations and uniform
/// joint-space samples.
#[derive(Debug, Clone)]
pub struct BiasedSampler {
    pub trajectory: Vec<DVector<f64>>,
    /// Probability of drawing near a past trajectory configuration.
    pub trajectory_weight: f64,
    pub trajectory_sigma: f64,
    pub q_min: DVector<f64>,
    pub q_max: DVector<f64>,
}

impl BiasedSampler {
    pub fn uniform(model: &RobotModel) -> Self {
        BiasedSampler {
            trajectory: Vec::new(),
            trajectory_weight: 0.0,
            trajectory_sigma: 0.2,
            q_min: model.q_min.clone(),
            q_max: model.q_max.clone(),
        }
    }

    pub fn with_trajectory(mut self, trajectory: Vec<DVector<f64>>, weight: f64, sigma: f64) -> Self {
        self.trajectory = trajectory;
        self.trajectory_weight = weight;
        self.trajectory_sigma = sigma;
        self
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        let n = self.q_min.len();
        if !self.trajectory.is_empty() && rng.random::<f64>() < self.trajectory_weight {
            let center = &self.trajectory[rng.random_range(0..self.trajectory.len())];
            return gaussian_around(center, self.trajectory_sigma, &self.q_min, &self.q_max, rng);
        }
        DVector::from_iterator(n, (0..n).map(|i| rng.random_range(self.q_min[i]..self.q_max[i])))
    }
}

fn gaussian_around<R: Rng>(
    center: &DVector<f64>,
    sigma: f64,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    rng: &mut R,
) -> DVector<f64> {
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    DVector::from_iterator(
        center.len(),
        (0..center.len()).map(|i| (center[i] + normal.sample(rng)).clamp(lo[i], hi[i])),
    )
}

/// Largest exploration-accuracy loss a cycle accepts from Gram pruning.
const PRUNE_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveConfig {
    /// Standard deviation of exploitation samples around each SV, radians.
    pub exploit_sigma: f64,
    pub exploit_per_sv: usize,
    pub explore_samples: usize,
    pub train: TrainConfig,
    pub prune: Option<GramPruneConfig>,
}

impl Default for ActiveConfig {
    fn default() -> Self {
        ActiveConfig {
            exploit_sigma: 0.15,
            exploit_per_sv: 4,
            explore_samples: 2500,
            train: TrainConfig::default(),
            prune: Some(GramPruneConfig::default()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveReport {
    pub exploit_samples: usize,
    pub explore_samples: usize,
    pub train: TrainReport,
    pub pruned: usize,
}

/// One refinement cycle against the current world.
///
/// Weights and hypotheses restart from zero; the candidate pool is the old
/// support configurations, then Gaussian exploitation samples around them,
/// then exploration samples, all labeled by the geometric oracle.
pub fn active_update<R: Rng>(
    support: &SupportSet,
    model: &RobotModel,
    world: &GeometricWorld,
    cfg: &ActiveConfig,
    sampler: &BiasedSampler,
    rng: &mut R,
) -> Result<(SupportSet, ActiveReport), ProxyError> {
    let d = support.configs.ncols();
    let mut rows: Vec<DVector<f64>> = (0..support.len()).map(|i| support.configs.row(i).transpose()).collect();
    for i in 0..support.len() {
        let center = support.configs.row(i).transpose();
        for _ in 0..cfg.exploit_per_sv {
            rows.push(gaussian_around(&center, cfg.exploit_sigma, &model.q_min, &model.q_max, rng));
        }
    }
    let exploit = rows.len() - support.len();
    for _ in 0..cfg.explore_samples {
        rows.push(sampler.sample(rng));
    }
    if rows.len() < 2 {
        return Err(ProxyError::SamplerExhausted);
    }
    let x = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
    let data = LabeledDataset::label(world, model, support.group, x)?;
    let train_cfg = TrainConfig { order: support.order, sigma: support.sigma, sv_budget: Some(support.sv_budget), ..cfg.train };
    let (fresh, report) = train(&data, model, support.group, &train_cfg)?;
    let before = fresh.len();
    let out = match &cfg.prune {
        Some(p) => {
            let pruned = fresh.gram_prune(model, p, Some(&data))?;
            // judged on the uniform exploration rows; the exploitation rows
            // crowd the boundary and overstate any loss
            let explore: Vec<usize> = (support.len() + exploit..data.len()).collect();
            let judge = if explore.is_empty() { data.clone() } else { data.subset(&explore) };
            if accuracy(&pruned, model, &judge)? + PRUNE_TOLERANCE >= accuracy(&fresh, model, &judge)? {
                pruned
            } else {
                fresh
            }
        }
        None => fresh,
    };
    Ok((
        out.drop_zero_rows(),
        ActiveReport {
            exploit_samples: exploit,
            explore_samples: cfg.explore_samples,
            train: report,
            pruned: before - out.len(),
        },
    ))
}
