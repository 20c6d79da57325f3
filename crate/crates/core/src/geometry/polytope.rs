//! Bounded convex polytopes held in both vertex and halfspace form.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::hull::{affine_rank, convex_hull, extent};
use super::GeometryError;

/// `normal . x <= offset`, with a unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn new(normal: Vector3<f64>, offset: f64) -> Self {
        let n = normal.norm();
        Halfspace { normal: normal / n, offset: offset / n }
    }

    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) - self.offset
    }

    pub fn flipped(&self) -> Self {
        Halfspace { normal: -self.normal, offset: -self.offset }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvexPolytope {
    vertices: Vec<Vector3<f64>>,
    halfspaces: Vec<Halfspace>,
    /// Boundary triangulation over `vertices`, outward winding.
    triangles: Vec<[usize; 3]>,
}

impl ConvexPolytope {
    /// Hull of a point set with affine rank 3.
    pub fn from_points(points: &[Vector3<f64>]) -> Result<Self, GeometryError> {
        let hull = convex_hull(points)?;
        let poly = Self::from_hull(hull.points, hull.triangles);
        // Points on face interiors or edges survive the incremental hull when
        // they are coplanar within tolerance; keep only true corners.
        let corners = poly.corners();
        if corners.len() < poly.vertices.len() && affine_rank(&corners, 1e-9) == 3 {
            let hull = convex_hull(&corners)?;
            return Ok(Self::from_hull(hull.points, hull.triangles));
        }
        Ok(poly)
    }

    /// Vertices incident to three planes with independent normals.
    fn corners(&self) -> Vec<Vector3<f64>> {
        let tol = 1e-9 * extent(&self.vertices).max(1e-12);
        self.vertices
            .iter()
            .filter(|v| {
                let on: Vec<&Vector3<f64>> = self
                    .halfspaces
                    .iter()
                    .filter(|h| (h.signed_distance(v)).abs() <= tol)
                    .map(|h| &h.normal)
                    .collect();
                (0..on.len()).any(|i| {
                    (i + 1..on.len()).any(|j| {
                        let c = on[i].cross(on[j]);
                        (j + 1..on.len()).any(|k| c.dot(on[k]).abs() > 1e-6)
                    })
                })
            })
            .copied()
            .collect()
    }

    /// Hull of a point set, inflating degenerate (flat, line or point) sets
    /// by `pad` along each missing direction so a solid always results.
    pub fn from_points_padded(points: &[Vector3<f64>], pad: f64) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::Empty);
        }
        if affine_rank(points, 1e-9) == 3 {
            return Self::from_points(points);
        }
        let h = 0.5 * pad;
        let mut padded = Vec::with_capacity(points.len() * 8);
        for p in points {
            for dx in [-h, h] {
                for dy in [-h, h] {
                    for dz in [-h, h] {
                        padded.push(p + Vector3::new(dx, dy, dz));
                    }
                }
            }
        }
        Self::from_points(&padded)
    }

    /// Axis-aligned box.
    pub fn cuboid(min: Vector3<f64>, max: Vector3<f64>) -> Self {
        let mut pts = Vec::with_capacity(8);
        for x in [min.x, max.x] {
            for y in [min.y, max.y] {
                for z in [min.z, max.z] {
                    pts.push(Vector3::new(x, y, z));
                }
            }
        }
        Self::from_points(&pts).expect("box with positive extent")
    }

    fn from_hull(points: Vec<Vector3<f64>>, triangles: Vec<[usize; 3]>) -> Self {
        // compact to the vertices actually used by the hull
        let mut remap = vec![usize::MAX; points.len()];
        let mut vertices = Vec::new();
        let mut tris = Vec::with_capacity(triangles.len());
        for t in &triangles {
            let mut nt = [0; 3];
            for k in 0..3 {
                let old = t[k];
                if remap[old] == usize::MAX {
                    remap[old] = vertices.len();
                    vertices.push(points[old]);
                }
                nt[k] = remap[old];
            }
            tris.push(nt);
        }
        let scale = extent(&vertices).max(1e-12);
        let mut halfspaces: Vec<Halfspace> = Vec::new();
        for t in &tris {
            let [a, b, c] = [vertices[t[0]], vertices[t[1]], vertices[t[2]]];
            let n = (b - a).cross(&(c - a));
            if n.norm() <= 1e-300 {
                continue;
            }
            let n = n.normalize();
            // offset as the max over vertices of the face keeps every vertex inside
            let offset = n.dot(&a).max(n.dot(&b)).max(n.dot(&c));
            let dup = halfspaces
                .iter()
                .any(|h| h.normal.dot(&n) > 1.0 - 1e-9 && (h.offset - offset).abs() < 1e-9 * scale);
            if !dup {
                halfspaces.push(Halfspace { normal: n, offset });
            }
        }
        // a face plane built from three vertices can still leave other
        // near-coplanar vertices a hair outside; lift the offset to cover them
        for h in &mut halfspaces {
            let max = vertices.iter().map(|v| h.normal.dot(v)).fold(f64::NEG_INFINITY, f64::max);
            if max > h.offset {
                h.offset = max;
            }
        }
        ConvexPolytope { vertices, halfspaces, triangles: tris }
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn centroid(&self) -> Vector3<f64> {
        let sum: Vector3<f64> = self.vertices.iter().sum();
        sum / self.vertices.len() as f64
    }

    pub fn volume(&self) -> f64 {
        let c = self.centroid();
        self.triangles
            .iter()
            .map(|t| {
                let a = self.vertices[t[0]] - c;
                let b = self.vertices[t[1]] - c;
                let d = self.vertices[t[2]] - c;
                a.dot(&b.cross(&d)) / 6.0
            })
            .sum()
    }

    pub fn contains(&self, p: &Vector3<f64>, tol: f64) -> bool {
        self.halfspaces.iter().all(|h| h.signed_distance(p) <= tol)
    }

    /// Largest halfspace violation; <= 0 inside.
    pub fn max_violation(&self, p: &Vector3<f64>) -> f64 {
        self.halfspaces
            .iter()
            .map(|h| h.signed_distance(p))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Signed Euclidean distance from `p` to the boundary (negative inside).
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        let inside = self.max_violation(p);
        if inside <= 0.0 {
            return inside;
        }
        (self.closest_point(p) - p).norm()
    }

    /// Nearest boundary point to an exterior query, via the closest point on
    /// every boundary triangle.
    pub fn closest_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let mut best = self.vertices[0];
        let mut best_d = f64::INFINITY;
        for t in &self.triangles {
            let q = closest_point_on_triangle(
                p,
                &self.vertices[t[0]],
                &self.vertices[t[1]],
                &self.vertices[t[2]],
            );
            let d = (q - p).norm_squared();
            if d < best_d {
                best_d = d;
                best = q;
            }
        }
        best
    }

    /// Parameter interval `[t_in, t_out]` of `a + t (b - a)`, `t` in [0, 1],
    /// that lies inside the polytope.
    pub fn segment_interval(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> Option<(f64, f64)> {
        let d = b - a;
        let mut t0: f64 = 0.0;
        let mut t1: f64 = 1.0;
        for h in &self.halfspaces {
            let num = h.offset - h.normal.dot(a);
            let den = h.normal.dot(&d);
            if den.abs() < 1e-15 {
                if num < 0.0 {
                    return None;
                }
                continue;
            }
            let t = num / den;
            if den < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }

    pub fn intersects_segment(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> bool {
        self.segment_interval(a, b).is_some()
    }

    /// Keeps the part with `h.normal . x <= h.offset`; `None` when nothing
    /// with positive volume survives.
    pub fn clip(&self, h: &Halfspace) -> Option<Self> {
        let scale = extent(&self.vertices).max(1e-12);
        let tol = 1e-10 * scale;
        let d: Vec<f64> = self.vertices.iter().map(|v| h.signed_distance(v)).collect();
        if d.iter().all(|&x| x <= tol) {
            return Some(self.clone());
        }
        if d.iter().all(|&x| x >= -tol) {
            return None;
        }
        let mut pts: Vec<Vector3<f64>> = self
            .vertices
            .iter()
            .zip(&d)
            .filter(|(_, &x)| x <= tol)
            .map(|(v, _)| *v)
            .collect();
        let mut seen = std::collections::HashSet::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (i, j) = (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]));
                if !seen.insert((i, j)) {
                    continue;
                }
                let (di, dj) = (d[i], d[j]);
                if (di < -tol && dj > tol) || (di > tol && dj < -tol) {
                    let s = di / (di - dj);
                    pts.push(self.vertices[i] + (self.vertices[j] - self.vertices[i]) * s);
                }
            }
        }
        if affine_rank(&pts, 1e-7) < 3 {
            return None;
        }
        Self::from_points(&pts).ok()
    }

    /// Intersection with a set of halfspaces.
    pub fn clip_all(&self, halfspaces: &[Halfspace]) -> Option<Self> {
        let mut cur = self.clone();
        for h in halfspaces {
            cur = cur.clip(h)?;
        }
        Some(cur)
    }

    pub fn intersection(&self, other: &ConvexPolytope) -> Option<Self> {
        self.clip_all(&other.halfspaces)
    }

    /// Convex pieces covering `self` minus the convex region `cut`.
    pub fn difference(&self, cut: &[Halfspace]) -> Vec<Self> {
        let mut pieces = Vec::new();
        let mut rest = Some(self.clone());
        for h in cut {
            let Some(cur) = rest else { break };
            if let Some(outside) = cur.clip(&h.flipped()) {
                pieces.push(outside);
            }
            rest = cur.clip(h);
        }
        pieces
    }

    /// True when every vertex of `self` lies inside `other`.
    pub fn is_inside(&self, other: &ConvexPolytope, tol: f64) -> bool {
        self.vertices.iter().all(|v| other.contains(v, tol))
    }

    /// Hull of the vertices pushed by `margin` along every box diagonal, a
    /// superset of the Minkowski sum with a ball of radius `margin`.
    pub fn inflated(&self, margin: f64) -> Self {
        if margin <= 0.0 {
            return self.clone();
        }
        let mut pts = Vec::with_capacity(self.vertices.len() * 8);
        for v in &self.vertices {
            for dx in [-margin, margin] {
                for dy in [-margin, margin] {
                    for dz in [-margin, margin] {
                        pts.push(v + Vector3::new(dx, dy, dz));
                    }
                }
            }
        }
        Self::from_points(&pts).expect("inflated solid has full rank")
    }

    pub fn translated(&self, by: &Vector3<f64>) -> Self {
        let mut out = self.clone();
        for v in &mut out.vertices {
            *v += by;
        }
        for h in &mut out.halfspaces {
            h.offset += h.normal.dot(by);
        }
        out
    }
}

/// Vertices of a bounded halfspace intersection by testing every plane
/// triple. Cubic in the number of planes; meant for small systems and audits.
pub fn vertices_from_halfspaces(halfspaces: &[Halfspace], tol: f64) -> Vec<Vector3<f64>> {
    let mut out: Vec<Vector3<f64>> = Vec::new();
    let n = halfspaces.len();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let m = nalgebra::Matrix3::from_rows(&[
                    halfspaces[i].normal.transpose(),
                    halfspaces[j].normal.transpose(),
                    halfspaces[k].normal.transpose(),
                ]);
                let rhs = Vector3::new(halfspaces[i].offset, halfspaces[j].offset, halfspaces[k].offset);
                let Some(inv) = m.try_inverse() else { continue };
                if m.determinant().abs() < 1e-12 {
                    continue;
                }
                let p = inv * rhs;
                if halfspaces.iter().all(|h| h.signed_distance(&p) <= tol)
                    && !out.iter().any(|q| (q - p).norm() <= tol)
                {
                    out.push(p);
                }
            }
        }
    }
    out
}

pub fn closest_point_on_triangle(
    p: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
) -> Vector3<f64> {
    // Ericson, Real-Time Collision Detection, 5.1.5
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}
