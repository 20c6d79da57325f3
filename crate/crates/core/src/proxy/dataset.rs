use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::world::{ground_truth_collision, GeometricWorld};
use super::ProxyError;
use crate::kinematics::RobotModel;

/// Configurations (rows of `x`) with per-category labels in `{+1, -1}`.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
}

impl LabeledDataset {
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self, ProxyError> {
        if x.nrows() != y.nrows() {
            return Err(ProxyError::DimensionMismatch { expected: x.nrows(), got: y.nrows() });
        }
        if y.iter().any(|v| *v != 1.0 && *v != -1.0) {
            return Err(ProxyError::InvalidLabel);
        }
        Ok(LabeledDataset { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn config(&self, i: usize) -> DVector<f64> {
        self.x.row(i).transpose()
    }

    pub fn subset(&self, rows: &[usize]) -> LabeledDataset {
        LabeledDataset { x: self.x.select_rows(rows), y: self.y.select_rows(rows) }
    }

    /// Labels each configuration of `x` for one group with the geometric oracle.
    pub fn label(world: &GeometricWorld, model: &RobotModel, group: usize, x: DMatrix<f64>) -> Result<Self, ProxyError> {
        let cats = world.categories.max(1);
        let rows: Vec<Vec<f64>> = (0..x.nrows())
            .into_par_iter()
            .map(|i| {
                let hits = ground_truth_collision(world, model, &x.row(i).transpose())?;
                Ok(hits[group].iter().map(|&h| if h { 1.0 } else { -1.0 }).collect())
            })
            .collect::<Result<_, ProxyError>>()?;
        let y = DMatrix::from_fn(x.nrows(), cats, |i, j| rows[i][j]);
        Ok(LabeledDataset { x, y })
    }
}

/// Row-major `n x n` grid over the box `[lo, hi]` of a 2-D configuration space.
pub fn grid_2d(n: usize, lo: [f64; 2], hi: [f64; 2]) -> DMatrix<f64> {
    let step = |k: usize, d: usize| lo[d] + (hi[d] - lo[d]) * k as f64 / (n - 1) as f64;
    DMatrix::from_fn(n * n, 2, |r, c| if c == 0 { step(r / n, 0) } else { step(r % n, 1) })
}
