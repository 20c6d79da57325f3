//! Incremental 3D convex hull.
//!
//! Points are inserted one at a time; the faces visible from the new point
//! are removed and the horizon is re-triangulated to the new apex. Face
//! winding is counter-clockwise seen from outside.

use std::collections::{HashMap, HashSet};

use nalgebra::Vector3;

use super::GeometryError;

#[derive(Debug, Clone)]
pub struct Hull {
    pub points: Vec<Vector3<f64>>,
    /// Triangles indexing into `points`, outward winding.
    pub triangles: Vec<[usize; 3]>,
}

#[derive(Debug, Clone, Copy)]
struct Face {
    v: [usize; 3],
    normal: Vector3<f64>,
    offset: f64,
}

impl Face {
    fn new(points: &[Vector3<f64>], v: [usize; 3]) -> Self {
        let n = (points[v[1]] - points[v[0]]).cross(&(points[v[2]] - points[v[0]]));
        let len = n.norm();
        let normal = if len > 0.0 { n / len } else { n };
        Face { v, normal, offset: normal.dot(&points[v[0]]) }
    }

    fn distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// Axis-aligned extent of a point set; used to scale tolerances.
pub fn extent(points: &[Vector3<f64>]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (hi - lo).norm()
}

/// Affine rank (0..=3) of a point set at relative tolerance `rel_tol`.
pub fn affine_rank(points: &[Vector3<f64>], rel_tol: f64) -> usize {
    if points.is_empty() {
        return 0;
    }
    let scale = extent(points).max(1e-300);
    let tol = rel_tol * scale;
    let p0 = points[0];
    let Some(i1) = farthest(points, |p| (p - p0).norm()) else { return 0 };
    if (points[i1] - p0).norm() <= tol {
        return 0;
    }
    let dir = (points[i1] - p0).normalize();
    let line_dist = |p: &Vector3<f64>| {
        let d = p - p0;
        (d - dir * d.dot(&dir)).norm()
    };
    let Some(i2) = farthest(points, line_dist) else { return 1 };
    if line_dist(&points[i2]) <= tol {
        return 1;
    }
    let n = dir.cross(&(points[i2] - p0)).normalize();
    let plane_dist = |p: &Vector3<f64>| n.dot(&(p - p0)).abs();
    let Some(i3) = farthest(points, plane_dist) else { return 2 };
    if plane_dist(&points[i3]) <= tol {
        return 2;
    }
    3
}

fn farthest<F: Fn(&Vector3<f64>) -> f64>(points: &[Vector3<f64>], f: F) -> Option<usize> {
    let mut best = None;
    let mut best_d = f64::NEG_INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = f(p);
        if d > best_d {
            best_d = d;
            best = Some(i);
        }
    }
    best
}

/// Convex hull of `input`. Fails for sets of affine rank < 3.
pub fn convex_hull(input: &[Vector3<f64>]) -> Result<Hull, GeometryError> {
    if input.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(GeometryError::NonFinite);
    }
    let rank = affine_rank(input, 1e-9);
    if rank < 3 {
        return Err(GeometryError::Degenerate { rank });
    }
    let points: Vec<Vector3<f64>> = input.to_vec();
    let scale = extent(&points);
    let eps = 1e-11 * scale.max(1e-300);

    // initial tetrahedron from extreme points
    let p0 = farthest(&points, |p| -p.x).unwrap();
    let i1 = farthest(&points, |p| (p - points[p0]).norm()).unwrap();
    let dir = (points[i1] - points[p0]).normalize();
    let i2 = farthest(&points, |p| {
        let d = p - points[p0];
        (d - dir * d.dot(&dir)).norm()
    })
    .unwrap();
    let n = dir.cross(&(points[i2] - points[p0])).normalize();
    let i3 = farthest(&points, |p| n.dot(&(p - points[p0])).abs()).unwrap();

    let mut simplex = [p0, i1, i2, i3];
    if n.dot(&(points[i3] - points[p0])) > 0.0 {
        simplex.swap(1, 2);
    }
    let [a, b, c, d] = simplex;
    let mut faces: Vec<Face> = vec![
        Face::new(&points, [a, b, c]),
        Face::new(&points, [a, d, b]),
        Face::new(&points, [b, d, c]),
        Face::new(&points, [c, d, a]),
    ];

    // Far points first: the hull grows quickly and most later points are
    // rejected by the cheap all-faces test.
    let center = simplex.iter().fold(Vector3::zeros(), |a, &i| a + points[i]) / 4.0;
    let used: HashSet<usize> = simplex.iter().copied().collect();
    let mut order: Vec<usize> = (0..points.len()).filter(|i| !used.contains(i)).collect();
    order.sort_by(|&a, &b| (points[b] - center).norm_squared().total_cmp(&(points[a] - center).norm_squared()));

    for idx in order {
        let p = &points[idx];
        let dist: Vec<f64> = faces.iter().map(|f| f.distance(p)).collect();
        let Some(seed) = (0..faces.len()).filter(|&i| dist[i] > eps).max_by(|&a, &b| dist[a].total_cmp(&dist[b]))
        else {
            continue;
        };
        // Visible region as the edge-connected component around the most
        // visible face, so the horizon is always a single simple loop.
        let edge_face: HashMap<(usize, usize), usize> = faces
            .iter()
            .enumerate()
            .flat_map(|(i, f)| (0..3).map(move |k| ((f.v[k], f.v[(k + 1) % 3]), i)))
            .collect();
        let mut visible = vec![false; faces.len()];
        visible[seed] = true;
        let mut stack = vec![seed];
        while let Some(fi) = stack.pop() {
            let f = faces[fi];
            for k in 0..3 {
                if let Some(&g) = edge_face.get(&(f.v[(k + 1) % 3], f.v[k])) {
                    if !visible[g] && dist[g] > eps {
                        visible[g] = true;
                        stack.push(g);
                    }
                }
            }
        }
        let mut horizon = Vec::new();
        for (_, f) in faces.iter().enumerate().filter(|(i, _)| visible[*i]) {
            for k in 0..3 {
                let e = (f.v[k], f.v[(k + 1) % 3]);
                match edge_face.get(&(e.1, e.0)) {
                    Some(&g) if visible[g] => {}
                    _ => horizon.push(e),
                }
            }
        }
        let mut next: Vec<Face> =
            faces.iter().zip(&visible).filter(|(_, &v)| !v).map(|(f, _)| *f).collect();
        for (u, v) in horizon {
            next.push(Face::new(&points, [u, v, idx]));
        }
        faces = next;
    }

    Ok(Hull { triangles: faces.iter().map(|f| f.v).collect(), points })
}
