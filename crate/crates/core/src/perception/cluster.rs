//! Density-based clustering of point clouds into convex hulls.

use std::collections::HashMap;

use nalgebra::Vector3;

use super::PerceptionError;
use crate::geometry::ConvexPolytope;

/// Side of the box used to pad clusters that span less than a solid.
pub const DEGENERATE_PAD: f64 = 0.01;

type Cell = (i64, i64, i64);

struct Grid {
    cell: f64,
    buckets: HashMap<Cell, Vec<usize>>,
}

impl Grid {
    fn new(points: &[Vector3<f64>], cell: f64) -> Self {
        let mut buckets: HashMap<Cell, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(Self::key(p, cell)).or_default().push(i);
        }
        Grid { cell, buckets }
    }

    fn key(p: &Vector3<f64>, cell: f64) -> Cell {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64, (p.z / cell).floor() as i64)
    }

    fn neighbors(&self, points: &[Vector3<f64>], i: usize, eps: f64) -> Vec<usize> {
        let (cx, cy, cz) = Self::key(&points[i], self.cell);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(b) = self.buckets.get(&(cx + dx, cy + dy, cz + dz)) {
                        out.extend(b.iter().copied().filter(|&j| (points[j] - points[i]).norm() <= eps));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// DBSCAN labels: `Some(cluster)` or `None` for noise. Neighborhoods include
/// the point itself; clusters are numbered in order of their first core point.
pub fn dbscan(points: &[Vector3<f64>], eps: f64, min_pts: usize) -> Result<Vec<Option<usize>>, PerceptionError> {
    if eps.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || min_pts < 1 {
        return Err(PerceptionError::InvalidClustering);
    }
    let grid = Grid::new(points, eps);
    let mut labels: Vec<Option<usize>> = vec![None; points.len()];
    let mut visited = vec![false; points.len()];
    let mut next = 0;
    for i in 0..points.len() {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        let nb = grid.neighbors(points, i, eps);
        if nb.len() < min_pts {
            continue;
        }
        let id = next;
        next += 1;
        labels[i] = Some(id);
        let mut queue = nb;
        let mut k = 0;
        while k < queue.len() {
            let j = queue[k];
            k += 1;
            if labels[j].is_none() {
                labels[j] = Some(id);
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            let nj = grid.neighbors(points, j, eps);
            if nj.len() >= min_pts {
                queue.extend(nj);
            }
        }
    }
    Ok(labels)
}

/// One hull per density cluster; noise is dropped.
pub fn cluster_to_hulls(points: &[Vector3<f64>], eps: f64, min_pts: usize) -> Result<Vec<ConvexPolytope>, PerceptionError> {
    cluster_to_hulls_with(points, eps, min_pts, |p| vec![*p])
}

/// As [`cluster_to_hulls`], but each hull is built from `expand(p)` for the
/// cluster's points, e.g. the footprint of the pixel that produced `p`.
pub fn cluster_to_hulls_with<F>(
    points: &[Vector3<f64>],
    eps: f64,
    min_pts: usize,
    expand: F,
) -> Result<Vec<ConvexPolytope>, PerceptionError>
where
    F: Fn(&Vector3<f64>) -> Vec<Vector3<f64>>,
{
    let labels = dbscan(points, eps, min_pts)?;
    let count = labels.iter().flatten().max().map_or(0, |m| m + 1);
    let mut clusters: Vec<Vec<Vector3<f64>>> = vec![Vec::new(); count];
    for (p, l) in points.iter().zip(&labels) {
        if let Some(c) = l {
            clusters[*c].extend(expand(p));
        }
    }
    clusters
        .iter()
        .map(|c| ConvexPolytope::from_points_padded(c, DEGENERATE_PAD).map_err(PerceptionError::from))
        .collect()
}
