//! Per-group detectors bundled for one robot.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::dataset::LabeledDataset;
use super::support::{train, GramPruneConfig, SupportSet, TrainConfig, TrainReport};
use super::world::GeometricWorld;
use super::ProxyError;
use crate::kinematics::RobotModel;

/// `scores[group][category]`.
pub type GroupScores = Vec<DVector<f64>>;

#[derive(Debug, Clone)]
pub struct CollisionDetector {
    pub sets: Vec<SupportSet>,
}

impl CollisionDetector {
    /// Trains every group of `model` independently on oracle labels of `x`.
    pub fn train(
        model: &RobotModel,
        world: &GeometricWorld,
        x: &DMatrix<f64>,
        cfg: &TrainConfig,
        prune: Option<&GramPruneConfig>,
    ) -> Result<(Self, Vec<TrainReport>), ProxyError> {
        let results = (0..model.groups.len())
            .into_par_iter()
            .map(|g| {
                let data = LabeledDataset::label(world, model, g, x.clone())?;
                let (s, r) = train(&data, model, g, cfg)?;
                let s = match prune {
                    Some(p) => s.gram_prune(model, p, Some(&data))?,
                    None => s,
                };
                Ok((s, r))
            })
            .collect::<Result<Vec<_>, ProxyError>>()?;
        let (sets, reports) = results.into_iter().unzip();
        Ok((CollisionDetector { sets }, reports))
    }

    pub fn total_support(&self) -> usize {
        self.sets.iter().map(|s| s.len()).sum()
    }

    pub fn scores(&self, model: &RobotModel, q: &DVector<f64>) -> Result<GroupScores, ProxyError> {
        self.sets.iter().map(|s| s.score(model, q)).collect()
    }

    /// Collision predicted by any group for any category.
    pub fn predicts_collision(&self, model: &RobotModel, q: &DVector<f64>) -> Result<bool, ProxyError> {
        Ok(self.scores(model, q)?.iter().any(|s| s.iter().any(|v| *v > 0.0)))
    }

    pub fn to_text(&self) -> String {
        self.sets.iter().map(|s| s.to_text()).collect::<Vec<_>>().join("\n")
    }

    pub fn from_text(text: &str, model: &RobotModel) -> Result<Self, ProxyError> {
        let mut sets = Vec::new();
        let mut chunk = String::new();
        for line in text.lines() {
            if line.starts_with(super::support::SUPPORT_FORMAT_TAG) && !chunk.is_empty() {
                sets.push(SupportSet::from_text(&chunk, model)?);
                chunk.clear();
            }
            chunk.push_str(line);
            chunk.push('\n');
        }
        if !chunk.trim().is_empty() {
            sets.push(SupportSet::from_text(&chunk, model)?);
        }
        Ok(CollisionDetector { sets })
    }
}
