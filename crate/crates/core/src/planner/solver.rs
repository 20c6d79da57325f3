//! Bound-constrained augmented Lagrangian solver.
//!
//! Outer loop: PHR multiplier updates with a penalty that grows while the
//! violation stalls. Inner loop: projected Gauss-Newton steps on the
//! augmented Lagrangian with Levenberg damping and an Armijo backtrack
//! measured along the projected path. Variables sitting on a bound with the
//! gradient pushing outward are frozen for the step.

use nalgebra::{DMatrix, DVector};

use super::config::SolverConfig;
use super::PlannerError;

/// Violation above which a stalled run is reported infeasible.
pub const INFEASIBLE_VIOLATION: f64 = 1e-2;

/// Problem evaluated at a point. The cost is `|r|^2 + extra_cost`.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub residuals: DVector<f64>,
    pub residual_jacobian: Option<DMatrix<f64>>,
    pub extra_cost: f64,
    pub extra_gradient: Option<DVector<f64>>,
    /// `h(x) = 0`.
    pub eq: DVector<f64>,
    pub eq_jacobian: Option<DMatrix<f64>>,
    /// `g(x) <= 0`.
    pub ineq: DVector<f64>,
    pub ineq_jacobian: Option<DMatrix<f64>>,
}

impl Evaluation {
    pub fn cost(&self) -> f64 {
        self.residuals.norm_squared() + self.extra_cost
    }

    pub fn eq_violation(&self) -> f64 {
        self.eq.amax()
    }

    pub fn ineq_violation(&self) -> f64 {
        self.ineq.iter().fold(0.0, |a: f64, v| a.max(*v))
    }

    pub fn cost_gradient(&self) -> DVector<f64> {
        let j = self.residual_jacobian.as_ref().expect("evaluated with jacobians");
        let mut g = j.transpose() * &self.residuals * 2.0;
        if let Some(e) = &self.extra_gradient {
            g += e;
        }
        g
    }
}

pub trait Nlp: Sync {
    fn dim(&self) -> usize;
    fn lower(&self) -> &DVector<f64>;
    fn upper(&self) -> &DVector<f64>;
    fn evaluate(&self, x: &DVector<f64>, jac: bool) -> Result<Evaluation, PlannerError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Feasible and stationary within tolerance.
    Optimal,
    /// Feasible but the iteration budget ran out before stationarity.
    Feasible,
    Infeasible,
    MaxIter,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Feasible => "feasible",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::MaxIter => "max_iter",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [SolveStatus::Optimal, SolveStatus::Feasible, SolveStatus::Infeasible, SolveStatus::MaxIter]
            .into_iter()
            .find(|v| v.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverDiagnostics {
    pub status: SolveStatus,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub eq_residual: f64,
    pub ineq_violation: f64,
    pub stationarity: f64,
    pub cost: f64,
    pub penalty: f64,
    pub eq_multipliers: DVector<f64>,
    pub ineq_multipliers: DVector<f64>,
}

/// Multipliers and penalty carried from a previous solve.
#[derive(Debug, Clone)]
pub struct Duals {
    pub eq: DVector<f64>,
    pub ineq: DVector<f64>,
    pub penalty: f64,
}

struct Merit<'a> {
    lambda: &'a DVector<f64>,
    mu: &'a DVector<f64>,
    rho: f64,
    backoff: f64,
}

impl Merit<'_> {
    fn value(&self, e: &Evaluation) -> f64 {
        let h = &e.eq;
        let mut v = e.cost() + self.lambda.dot(h) + 0.5 * self.rho * h.norm_squared();
        for (g, m) in e.ineq.iter().zip(self.mu.iter()) {
            let s = (m + self.rho * (g + self.backoff)).max(0.0);
            v += (s * s - m * m) / (2.0 * self.rho);
        }
        v
    }

    /// Gradient and Gauss-Newton Hessian of the merit.
    fn model(&self, e: &Evaluation) -> (DVector<f64>, DMatrix<f64>) {
        let jr = e.residual_jacobian.as_ref().expect("jacobians");
        let jh = e.eq_jacobian.as_ref().expect("jacobians");
        let jg = e.ineq_jacobian.as_ref().expect("jacobians");
        let mut grad = e.cost_gradient();
        grad += jh.transpose() * (self.lambda + &e.eq * self.rho);
        let nu = DVector::from_iterator(
            e.ineq.len(),
            e.ineq.iter().zip(self.mu.iter()).map(|(g, m)| (m + self.rho * (g + self.backoff)).max(0.0)),
        );
        grad += jg.transpose() * &nu;
        let mut hess = jr.transpose() * jr * 2.0;
        hess += jh.transpose() * jh * self.rho;
        let active: Vec<usize> = (0..nu.len()).filter(|&j| nu[j] > 0.0).collect();
        if !active.is_empty() {
            let ja = jg.select_rows(active.iter());
            hess += ja.transpose() * ja * self.rho;
        }
        (grad, hess)
    }
}

fn project(x: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(x.len(), (0..x.len()).map(|i| x[i].clamp(lo[i], hi[i])))
}

fn stationarity(x: &DVector<f64>, grad: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> f64 {
    (project(&(x - grad), lo, hi) - x).amax()
}

/// Minimizes the merit at fixed multipliers; returns the point and its
/// projected-gradient norm.
fn inner_solve<N: Nlp + ?Sized>(
    nlp: &N,
    x0: DVector<f64>,
    merit: &Merit,
    cfg: &SolverConfig,
    tol: f64,
    counter: &mut usize,
) -> Result<(DVector<f64>, f64), PlannerError> {
    let (lo, hi) = (nlp.lower(), nlp.upper());
    let n = x0.len();
    let mut x = x0;
    let mut damping = 1e-8;
    let mut last_stat = f64::INFINITY;
    for _ in 0..cfg.max_inner {
        *counter += 1;
        let e = nlp.evaluate(&x, true)?;
        let value = merit.value(&e);
        let (grad, hess) = merit.model(&e);
        let stat = stationarity(&x, &grad, lo, hi);
        last_stat = stat;
        if stat <= tol {
            break;
        }
        let free: Vec<usize> = (0..n)
            .filter(|&i| {
                let at_lo = x[i] <= lo[i] + 1e-12 && grad[i] > 0.0;
                let at_hi = x[i] >= hi[i] - 1e-12 && grad[i] < 0.0;
                lo[i] < hi[i] && !at_lo && !at_hi
            })
            .collect();
        if free.is_empty() {
            break;
        }
        let hf = hess.select_rows(free.iter()).select_columns(free.iter());
        let gf = grad.select_rows(free.iter());
        let scale = (0..free.len()).map(|i| hf[(i, i)]).sum::<f64>() / free.len() as f64;
        let scale = scale.max(1e-8);
        let mut accepted = false;
        while damping < 1e8 {
            let mut a = hf.clone();
            for i in 0..free.len() {
                a[(i, i)] += damping * scale;
            }
            let Some(ch) = a.cholesky() else {
                damping *= 10.0;
                continue;
            };
            let df = -ch.solve(&gf);
            let mut d = DVector::zeros(n);
            for (k, &i) in free.iter().enumerate() {
                d[i] = df[k];
            }
            let mut alpha = 1.0;
            while alpha > 1e-6 {
                let xt = project(&(&x + &d * alpha), lo, hi);
                let et = nlp.evaluate(&xt, false)?;
                let vt = merit.value(&et);
                let decrease = grad.dot(&(&xt - &x));
                if vt.is_finite() && vt <= value + 1e-4 * decrease {
                    if alpha == 1.0 {
                        damping = (damping / 3.0).max(1e-12);
                    }
                    let moved = (&xt - &x).amax();
                    x = xt;
                    accepted = moved > 0.0;
                    break;
                }
                alpha *= 0.5;
            }
            if accepted {
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    Ok((x, last_stat))
}

/// Solves from `x0` with fresh multipliers.
pub fn solve<N: Nlp + ?Sized>(
    nlp: &N,
    x0: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<(DVector<f64>, SolverDiagnostics), PlannerError> {
    solve_with_duals(nlp, x0, cfg, None)
}

pub fn solve_with_duals<N: Nlp + ?Sized>(
    nlp: &N,
    x0: &DVector<f64>,
    cfg: &SolverConfig,
    duals: Option<&Duals>,
) -> Result<(DVector<f64>, SolverDiagnostics), PlannerError> {
    if x0.len() != nlp.dim() {
        return Err(PlannerError::DimensionMismatch { expected: nlp.dim(), got: x0.len() });
    }
    let (lo, hi) = (nlp.lower(), nlp.upper());
    let mut x = project(x0, lo, hi);
    let e0 = nlp.evaluate(&x, false)?;
    let (mut lambda, mut mu, mut rho) = match duals {
        Some(d) if d.eq.len() == e0.eq.len() && d.ineq.len() == e0.ineq.len() => {
            (d.eq.clone(), d.ineq.clone(), d.penalty.clamp(cfg.rho_initial, cfg.rho_max))
        }
        _ => (DVector::zeros(e0.eq.len()), DVector::zeros(e0.ineq.len()), cfg.rho_initial),
    };
    let mut inner = 0;
    let mut prev_violation = e0.eq_violation().max(e0.ineq_violation());
    let mut stall = 0;
    let mut outer = 0;
    let mut status = None;
    let mut stat = f64::INFINITY;
    let mut last = e0;
    while outer < cfg.max_outer {
        outer += 1;
        let merit = Merit { lambda: &lambda, mu: &mu, rho, backoff: cfg.ineq_backoff };
        let grad_scale = 1.0 + last.cost().abs();
        let (xn, s) = inner_solve(nlp, x, &merit, cfg, cfg.optimality_tol * grad_scale, &mut inner)?;
        x = xn;
        stat = s;
        last = nlp.evaluate(&x, false)?;
        let (ve, vi) = (last.eq_violation(), last.ineq_violation());
        let feasible = ve <= cfg.eq_tol && vi <= cfg.ineq_tol;
        if feasible && stat <= cfg.optimality_tol * (1.0 + last.cost().abs()) {
            status = Some(SolveStatus::Optimal);
            break;
        }
        for (l, h) in lambda.iter_mut().zip(last.eq.iter()) {
            *l += rho * h;
        }
        for (m, g) in mu.iter_mut().zip(last.ineq.iter()) {
            *m = (*m + rho * (g + cfg.ineq_backoff)).max(0.0);
        }
        let violation = ve.max(vi);
        if violation > 0.25 * prev_violation && !feasible {
            rho = (rho * cfg.rho_growth).min(cfg.rho_max);
        }
        if rho >= cfg.rho_max && violation > 0.99 * prev_violation && violation > INFEASIBLE_VIOLATION {
            stall += 1;
            if stall >= 3 {
                status = Some(SolveStatus::Infeasible);
                break;
            }
        } else {
            stall = 0;
        }
        prev_violation = violation;
    }
    let (ve, vi) = (last.eq_violation(), last.ineq_violation());
    let status = status.unwrap_or(if ve <= cfg.eq_tol && vi <= cfg.ineq_tol {
        SolveStatus::Feasible
    } else if ve.max(vi) > INFEASIBLE_VIOLATION {
        SolveStatus::Infeasible
    } else {
        SolveStatus::MaxIter
    });
    Ok((
        x,
        SolverDiagnostics {
            status,
            outer_iterations: outer,
            inner_iterations: inner,
            eq_residual: ve,
            ineq_violation: vi,
            stationarity: stat,
            cost: last.cost(),
            penalty: rho,
            eq_multipliers: lambda,
            ineq_multipliers: mu,
        },
    ))
}
