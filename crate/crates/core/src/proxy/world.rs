//! Geometric ground truth: convex obstacles and sphere-based collision checks.

use nalgebra::DVector;

use super::ProxyError;
use crate::geometry::{ConvexPolytope, Sphere};
use crate::kinematics::{forward_kinematics, posed_spheres, RobotModel};

#[derive(Debug, Clone)]
pub struct Obstacle {
    pub polytope: ConvexPolytope,
    pub category: usize,
}

#[derive(Debug, Clone, Default)]
pub struct GeometricWorld {
    pub obstacles: Vec<Obstacle>,
    /// Number of obstacle categories (at least 1).
    pub categories: usize,
}

impl GeometricWorld {
    pub fn new(categories: usize) -> Self {
        GeometricWorld { obstacles: Vec::new(), categories: categories.max(1) }
    }

    pub fn from_polytopes(polytopes: Vec<ConvexPolytope>) -> Self {
        GeometricWorld {
            obstacles: polytopes.into_iter().map(|polytope| Obstacle { polytope, category: 0 }).collect(),
            categories: 1,
        }
    }

    pub fn push(&mut self, polytope: ConvexPolytope, category: usize) {
        self.categories = self.categories.max(category + 1);
        self.obstacles.push(Obstacle { polytope, category });
    }

    /// Every obstacle grown by `margin`, categories kept.
    pub fn inflated(&self, margin: f64) -> Self {
        GeometricWorld {
            obstacles: self
                .obstacles
                .iter()
                .map(|o| Obstacle { polytope: o.polytope.inflated(margin), category: o.category })
                .collect(),
            categories: self.categories,
        }
    }

    /// Smallest signed clearance between a sphere and the obstacles of `category`.
    pub fn sphere_clearance(&self, sphere: &Sphere, category: Option<usize>) -> f64 {
        self.obstacles
            .iter()
            .filter(|o| category.is_none_or(|c| o.category == c))
            .map(|o| o.polytope.signed_distance(&sphere.center) - sphere.radius)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn sphere_collides(&self, sphere: &Sphere, category: usize) -> bool {
        self.sphere_clearance(sphere, Some(category)) < 0.0
    }
}

/// `result[group][category]`: true iff a sphere of the group penetrates an
/// obstacle of that category.
pub fn ground_truth_collision(
    world: &GeometricWorld,
    model: &RobotModel,
    q: &DVector<f64>,
) -> Result<Vec<Vec<bool>>, ProxyError> {
    let fk = forward_kinematics(model, q)?;
    let cats = world.categories.max(1);
    let mut out = vec![vec![false; cats]; model.groups.len()];
    for (g, row) in out.iter_mut().enumerate() {
        let spheres = posed_spheres(&fk, &model.group_spheres(g));
        for (c, hit) in row.iter_mut().enumerate() {
            *hit = spheres.iter().any(|s| world.sphere_collides(s, c));
        }
    }
    Ok(out)
}

/// Minimum clearance over every sphere of the robot to every obstacle.
pub fn robot_clearance(world: &GeometricWorld, model: &RobotModel, q: &DVector<f64>) -> Result<f64, ProxyError> {
    let fk = forward_kinematics(model, q)?;
    Ok(posed_spheres(&fk, &model.collision_spheres)
        .iter()
        .map(|s| world.sphere_clearance(s, None))
        .fold(f64::INFINITY, f64::min))
}
