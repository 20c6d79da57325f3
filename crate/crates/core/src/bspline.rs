//! Clamped uniform B-splines over the normalized phase `s` in `[0, 1]`.
//!
//! Control points are stored as the rows of an `M x d` matrix, so sampled
//! quantities are plain matrix products with the collocation matrices.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BSplineError {
    #[error("phase {0} outside [0, 1]")]
    PhaseOutOfRange(f64),
    #[error("degree-0 curve has no derivative curve")]
    DegreeZero,
    #[error("{control_points} control points cannot carry degree {degree}")]
    TooFewControlPoints { degree: usize, control_points: usize },
    #[error("no collocation phases given")]
    EmptyPhases,
    #[error("collocation phases must be sorted within [0, 1]")]
    UnsortedPhases,
    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("least-squares fit is underdetermined")]
    Underdetermined,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    degree: usize,
    knots: Vec<f64>,
}

impl KnotVector {
    /// Clamped knots with equidistant interior knots for `m` control points.
    pub fn clamped_uniform(degree: usize, m: usize) -> Result<Self, BSplineError> {
        if m < degree + 1 {
            return Err(BSplineError::TooFewControlPoints { degree, control_points: m });
        }
        let inner = m - degree; // number of spans
        let mut knots = vec![0.0; degree + 1];
        for i in 1..inner {
            knots.push(i as f64 / inner as f64);
        }
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Ok(KnotVector { degree, knots })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn control_point_count(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Distinct interior knot values.
    pub fn interior(&self) -> &[f64] {
        &self.knots[self.degree + 1..self.knots.len() - self.degree - 1]
    }

    /// Knot span index `k` with `t_k <= s < t_{k+1}`; `s = 1` maps to the last span.
    pub fn span(&self, s: f64) -> usize {
        let n = self.degree;
        let m = self.control_point_count();
        if s >= self.knots[m] {
            return m - 1;
        }
        // upper_bound over the active range
        let mut lo = n;
        let mut hi = m;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if s < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// The `n + 1` nonzero basis values at `s`, for indices `span - n ..= span`.
    pub fn basis(&self, span: usize, s: f64) -> Vec<f64> {
        let n = self.degree;
        let t = &self.knots;
        let mut out = vec![0.0; n + 1];
        let mut left = vec![0.0; n + 1];
        let mut right = vec![0.0; n + 1];
        out[0] = 1.0;
        for j in 1..=n {
            left[j] = s - t[span + 1 - j];
            right[j] = t[span + j] - s;
            let mut saved = 0.0;
            for r in 0..j {
                let tmp = out[r] / (right[r + 1] + left[j - r]);
                out[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            out[j] = saved;
        }
        out
    }

    /// Full row of `M` basis values at `s`.
    pub fn basis_row(&self, s: f64) -> Vec<f64> {
        let span = self.span(s);
        let mut row = vec![0.0; self.control_point_count()];
        for (k, b) in self.basis(span, s).into_iter().enumerate() {
            row[span - self.degree + k] = b;
        }
        row
    }

    /// Knots of the derivative curve: one fewer at each clamped end.
    pub fn derivative(&self) -> Result<KnotVector, BSplineError> {
        if self.degree == 0 {
            return Err(BSplineError::DegreeZero);
        }
        Ok(KnotVector {
            degree: self.degree - 1,
            knots: self.knots[1..self.knots.len() - 1].to_vec(),
        })
    }

    /// `(M-1) x M` matrix taking control points to derivative control points.
    pub fn difference_matrix(&self) -> Result<DMatrix<f64>, BSplineError> {
        if self.degree == 0 {
            return Err(BSplineError::DegreeZero);
        }
        let n = self.degree as f64;
        let m = self.control_point_count();
        let mut d = DMatrix::zeros(m - 1, m);
        for i in 0..m - 1 {
            let w = n / (self.knots[i + self.degree + 1] - self.knots[i + 1]);
            d[(i, i)] = -w;
            d[(i, i + 1)] = w;
        }
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BSplineCurve {
    knots: KnotVector,
    /// Row `i` is control point `c_i`.
    control_points: DMatrix<f64>,
}

impl BSplineCurve {
    pub fn new(knots: KnotVector, control_points: DMatrix<f64>) -> Result<Self, BSplineError> {
        if control_points.nrows() != knots.control_point_count() {
            return Err(BSplineError::TooFewControlPoints {
                degree: knots.degree,
                control_points: control_points.nrows(),
            });
        }
        Ok(BSplineCurve { knots, control_points })
    }

    pub fn clamped_uniform(degree: usize, control_points: DMatrix<f64>) -> Result<Self, BSplineError> {
        let knots = KnotVector::clamped_uniform(degree, control_points.nrows())?;
        Self::new(knots, control_points)
    }

    pub fn degree(&self) -> usize {
        self.knots.degree
    }

    pub fn dim(&self) -> usize {
        self.control_points.ncols()
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn control_points(&self) -> &DMatrix<f64> {
        &self.control_points
    }

    pub fn control_points_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.control_points
    }

    /// De Boor evaluation.
    pub fn evaluate(&self, s: f64) -> Result<DVector<f64>, BSplineError> {
        if !(0.0..=1.0).contains(&s) {
            return Err(BSplineError::PhaseOutOfRange(s));
        }
        let n = self.knots.degree;
        let t = &self.knots.knots;
        let k = self.knots.span(s);
        let mut d: Vec<DVector<f64>> = (0..=n)
            .map(|j| self.control_points.row(j + k - n).transpose())
            .collect();
        for r in 1..=n {
            for j in (r..=n).rev() {
                let i = j + k - n;
                let denom = t[i + n + 1 - r] - t[i];
                let alpha = if denom > 0.0 { (s - t[i]) / denom } else { 0.0 };
                d[j] = &d[j - 1] * (1.0 - alpha) + &d[j] * alpha;
            }
        }
        Ok(d.swap_remove(n))
    }

    pub fn derivative_curve(&self) -> Result<BSplineCurve, BSplineError> {
        let d = self.knots.difference_matrix()?;
        Ok(BSplineCurve { knots: self.knots.derivative()?, control_points: d * &self.control_points })
    }
}

/// Sampling matrices: row `i` of `position` (resp. `velocity`,
/// `acceleration`) times the control-point matrix gives the curve value
/// (resp. first and second phase derivatives) at phase `s_i`.
#[derive(Debug, Clone)]
pub struct CollocationMatrices {
    pub phases: Vec<f64>,
    pub position: DMatrix<f64>,
    pub velocity: DMatrix<f64>,
    pub acceleration: DMatrix<f64>,
}

pub fn collocation_matrices(knots: &KnotVector, phases: &[f64]) -> Result<CollocationMatrices, BSplineError> {
    if phases.is_empty() {
        return Err(BSplineError::EmptyPhases);
    }
    if phases.windows(2).any(|w| w[1] < w[0]) || phases.iter().any(|s| !(0.0..=1.0).contains(s)) {
        return Err(BSplineError::UnsortedPhases);
    }
    let rows = |kv: &KnotVector| {
        let m = kv.control_point_count();
        let mut b = DMatrix::zeros(phases.len(), m);
        for (i, &s) in phases.iter().enumerate() {
            for (j, v) in kv.basis_row(s).into_iter().enumerate() {
                b[(i, j)] = v;
            }
        }
        b
    };
    let m = knots.control_point_count();
    let position = rows(knots);
    let (velocity, acceleration) = match knots.degree {
        0 => (DMatrix::zeros(phases.len(), m), DMatrix::zeros(phases.len(), m)),
        _ => {
            let d1 = knots.difference_matrix()?;
            let k1 = knots.derivative()?;
            let velocity = rows(&k1) * &d1;
            let acceleration = if k1.degree == 0 {
                DMatrix::zeros(phases.len(), m)
            } else {
                rows(&k1.derivative()?) * k1.difference_matrix()? * &d1
            };
            (velocity, acceleration)
        }
    };
    Ok(CollocationMatrices { phases: phases.to_vec(), position, velocity, acceleration })
}

/// Uniform phases `i / n` for `i = 0..=n`.
pub fn uniform_phases(n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

/// Least-squares clamped uniform curve through `(s, value)` samples.
pub fn fit_least_squares(
    degree: usize,
    m: usize,
    phases: &[f64],
    values: &DMatrix<f64>,
) -> Result<BSplineCurve, BSplineError> {
    let knots = KnotVector::clamped_uniform(degree, m)?;
    let b = collocation_matrices(&knots, phases)?.position;
    let gram = b.transpose() * &b + DMatrix::identity(m, m) * 1e-12;
    let chol = gram.cholesky().ok_or(BSplineError::Underdetermined)?;
    let c = chol.solve(&(b.transpose() * values));
    BSplineCurve::new(knots, c)
}

/// Curve over normalized phase plus its duration; `s(t) = t / T`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrajectory {
    pub curve: BSplineCurve,
    duration: f64,
}

/// Value and time derivatives at one phase.
#[derive(Debug, Clone)]
pub struct TimeSample {
    pub z: DVector<f64>,
    pub zd: DVector<f64>,
    pub zdd: DVector<f64>,
}

impl PhaseTrajectory {
    pub fn new(curve: BSplineCurve, duration: f64) -> Result<Self, BSplineError> {
        if duration.is_nan() || duration <= 0.0 {
            return Err(BSplineError::NonPositiveDuration(duration));
        }
        Ok(PhaseTrajectory { curve, duration })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn time_scaled_samples(&self, s: f64) -> Result<TimeSample, BSplineError> {
        let t = self.duration;
        let z = self.curve.evaluate(s)?;
        let n = self.curve.degree();
        let (zd, zdd) = if n == 0 {
            (DVector::zeros(z.len()), DVector::zeros(z.len()))
        } else {
            let v = self.curve.derivative_curve()?;
            let zd = v.evaluate(s)? / t;
            let zdd = if n == 1 {
                DVector::zeros(z.len())
            } else {
                v.derivative_curve()?.evaluate(s)? / (t * t)
            };
            (zd, zdd)
        };
        Ok(TimeSample { z, zd, zdd })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_interpolation() {
        let c = BSplineCurve::clamped_uniform(1, DMatrix::from_row_slice(2, 1, &[0.0, 1.0])).unwrap();
        assert!((c.evaluate(0.5).unwrap()[0] - 0.5).abs() < 1e-15);
        let d = c.derivative_curve().unwrap();
        assert_eq!(d.control_points().nrows(), 1);
    }

    #[test]
    fn knot_layout() {
        let k = KnotVector::clamped_uniform(3, 10).unwrap();
        assert_eq!(k.knots().len(), 14);
        assert_eq!(k.interior().len(), 6);
        assert_eq!(k.span(1.0), 9);
        assert_eq!(k.span(0.0), 3);
    }

    #[test]
    fn out_of_range_phase() {
        let c = BSplineCurve::clamped_uniform(2, DMatrix::zeros(4, 2)).unwrap();
        assert_eq!(c.evaluate(1.5), Err(BSplineError::PhaseOutOfRange(1.5)));
    }
}
