//! Planar two-link benchmark: world, grid and train/test split.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Vector3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::grid_2d;
use super::world::GeometricWorld;
use crate::geometry::ConvexPolytope;

/// Axis-aligned box in the plane, extruded over `z` in `[-0.5, 0.5]`.
pub fn planar_box(lo: [f64; 2], hi: [f64; 2]) -> ConvexPolytope {
    ConvexPolytope::cuboid(Vector3::new(lo[0], lo[1], -0.5), Vector3::new(hi[0], hi[1], 0.5))
}

pub fn planar_world() -> GeometricWorld {
    GeometricWorld::from_polytopes(vec![
        planar_box([0.75, 0.45], [1.15, 0.85]),
        planar_box([-1.6, -0.6], [-1.1, 0.2]),
        planar_box([0.2, -1.6], [0.6, -1.2]),
    ])
}

/// Obstacle added mid-run by the active-learning benchmark.
pub fn intruding_box() -> ConvexPolytope {
    planar_box([-0.4, 1.1], [0.1, 1.6])
}

pub fn planar_grid(n: usize) -> DMatrix<f64> {
    grid_2d(n, [-PI, -PI], [PI, PI])
}

/// Seeded 80/20 row split.
pub fn split(rows: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..rows).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = (rows as f64 * train_fraction).round() as usize;
    let test = idx.split_off(cut);
    (idx, test)
}
