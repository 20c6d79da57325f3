//! Polyharmonic and forward-kinematics kernels.

use nalgebra::{DMatrix, DVector, Vector3};

use super::ProxyError;
use crate::kinematics::{control_point_positions, forward_kinematics, ControlPoint, RobotModel};

/// `r^k` for odd `k`, `r^k ln r` for even `k` (0 at `r = 0`).
pub fn polyharmonic_radial(r: f64, k: u32) -> f64 {
    if k % 2 == 1 {
        r.powi(k as i32)
    } else if r <= 0.0 {
        0.0
    } else {
        r.powi(k as i32) * r.ln()
    }
}

/// Derivative of [`polyharmonic_radial`] with respect to `r`.
pub fn polyharmonic_radial_derivative(r: f64, k: u32) -> f64 {
    let kf = k as f64;
    if k % 2 == 1 {
        if k == 1 {
            1.0
        } else {
            kf * r.powi(k as i32 - 1)
        }
    } else if r <= 0.0 {
        0.0
    } else {
        r.powi(k as i32 - 1) * (kf * r.ln() + 1.0)
    }
}

pub fn polyharmonic_kernel(x: &DVector<f64>, y: &DVector<f64>, k: u32) -> Result<f64, ProxyError> {
    if k < 1 {
        return Err(ProxyError::InvalidKernelOrder(k));
    }
    if x.len() != y.len() {
        return Err(ProxyError::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    Ok(polyharmonic_radial((x - y).norm(), k))
}

/// World positions of a group's control points at `q`.
pub fn features(model: &RobotModel, points: &[ControlPoint], q: &DVector<f64>) -> Result<Vec<Vector3<f64>>, ProxyError> {
    let fk = forward_kinematics(model, q)?;
    Ok(control_point_positions(&fk, points))
}

/// Mean control-point distance between two feature sets.
pub fn mean_distance(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    a.iter().zip(b).map(|(p, s)| (p - s).norm()).sum::<f64>() / a.len() as f64
}

/// Mean polyharmonic kernel over paired control points.
pub fn feature_kernel(a: &[Vector3<f64>], b: &[Vector3<f64>], k: u32) -> f64 {
    a.iter().zip(b).map(|(p, s)| polyharmonic_radial((p - s).norm(), k)).sum::<f64>() / a.len() as f64
}

pub fn fk_kernel(
    model: &RobotModel,
    group: usize,
    q: &DVector<f64>,
    q2: &DVector<f64>,
    k: u32,
) -> Result<f64, ProxyError> {
    if k < 1 {
        return Err(ProxyError::InvalidKernelOrder(k));
    }
    let points = group_points(model, group)?;
    let a = features(model, &points, q)?;
    let b = features(model, &points, q2)?;
    Ok(feature_kernel(&a, &b, k))
}

pub(crate) fn group_points(model: &RobotModel, group: usize) -> Result<Vec<ControlPoint>, ProxyError> {
    if group >= model.groups.len() {
        return Err(ProxyError::InvalidGroup(group));
    }
    let points = model.group_control_points(group);
    if points.is_empty() {
        return Err(ProxyError::EmptyControlPoints(group));
    }
    Ok(points)
}

/// Similarity `exp(-rbar / sigma)` in (0, 1], 1 on the diagonal.
pub fn similarity(a: &[Vector3<f64>], b: &[Vector3<f64>], sigma: f64) -> f64 {
    (-mean_distance(a, b) / sigma).exp()
}

/// Pairwise normalized FK similarity of a configuration list.
pub fn fk_similarity_matrix(
    model: &RobotModel,
    group: usize,
    configs: &[DVector<f64>],
    sigma: f64,
) -> Result<DMatrix<f64>, ProxyError> {
    let points = group_points(model, group)?;
    let f: Vec<_> = configs.iter().map(|q| features(model, &points, q)).collect::<Result<_, _>>()?;
    let n = configs.len();
    Ok(DMatrix::from_fn(n, n, |i, j| similarity(&f[i], &f[j], sigma)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_values() {
        assert_eq!(polyharmonic_radial(0.0, 1), 0.0);
        assert_eq!(polyharmonic_radial(5.0, 1), 5.0);
        assert_eq!(polyharmonic_radial(1.0, 2), 0.0);
        assert_eq!(polyharmonic_radial(0.0, 2), 0.0);
        let x = DVector::from_vec(vec![0.0, 0.0]);
        let y = DVector::from_vec(vec![3.0, 4.0]);
        assert_eq!(polyharmonic_kernel(&x, &y, 1).unwrap(), 5.0);
        assert!(matches!(polyharmonic_kernel(&x, &y, 0), Err(ProxyError::InvalidKernelOrder(0))));
    }

    #[test]
    fn radial_derivative_matches_difference() {
        for k in 1..=4 {
            let r = 0.7;
            let h = 1e-6;
            let fd = (polyharmonic_radial(r + h, k) - polyharmonic_radial(r - h, k)) / (2.0 * h);
            assert!((fd - polyharmonic_radial_derivative(r, k)).abs() < 1e-8);
        }
    }
}
