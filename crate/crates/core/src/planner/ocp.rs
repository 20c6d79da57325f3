//! Transcription of the closed-chain planning problem into a dense NLP.
//!
//! Decision vector layout: the `M x dim` control-point matrix in row-major
//! order, then the duration `T`, then the 7-component goal slack.
//! Costs are split into least-squares residuals (acceleration, dexterity,
//! slack) and plain terms with gradients only (duration, visibility).

use nalgebra::{DMatrix, DVector, Quaternion, UnitQuaternion, Vector3};
use rayon::prelude::*;

use super::config::PlannerConfig;
use super::solver::{self, Duals, Evaluation, Nlp, SolveStatus, SolverDiagnostics};
use super::PlannerError;
use crate::bspline::{collocation_matrices, fit_least_squares, uniform_phases, BSplineCurve, CollocationMatrices, KnotVector, PhaseTrajectory};
use crate::geometry::pose::{pose_from_array, pose_to_array, Pose, POSE_DIM};
use crate::kinematics::{forward_kinematics, solve_ik, ClosedChainSystem, IkOptions, RobotModel, SystemState};
use crate::proxy::CollisionDetector;
use crate::visibility::{EyeInHand, VisibilityModel};

/// Collision proxy for one arm, trained on that arm's carrying model.
#[derive(Debug, Clone)]
pub struct ArmProxy {
    pub model: RobotModel,
    pub detector: CollisionDetector,
}

#[derive(Debug, Clone)]
pub struct VisibilityTerm {
    pub model: VisibilityModel,
    pub rig: EyeInHand,
}

#[derive(Debug, Clone)]
pub struct PlannerProblem {
    pub system: ClosedChainSystem,
    /// Current full state; pinned as the first control point.
    pub start: DVector<f64>,
    /// Current estimate of the goal object pose.
    pub x_obj_final: Pose,
    pub config: PlannerConfig,
    pub eps_position: f64,
    pub eps_orientation: f64,
    /// Upper duration bound; the loop lowers it as the horizon shrinks.
    pub t_max: f64,
    /// Either empty or one proxy per arm.
    pub proxies: Vec<ArmProxy>,
    pub visibility: Option<VisibilityTerm>,
}

impl PlannerProblem {
    pub fn new(
        system: ClosedChainSystem,
        start: &SystemState,
        x_obj_final: Pose,
        config: PlannerConfig,
    ) -> Result<Self, PlannerError> {
        let p = PlannerProblem {
            start: start.to_vector(),
            x_obj_final,
            eps_position: config.bounds.eps_position,
            eps_orientation: config.bounds.eps_orientation,
            t_max: config.bounds.t_max,
            config,
            system,
            proxies: Vec::new(),
            visibility: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn layout(&self) -> Layout {
        Layout {
            control_points: self.config.spline.control_points,
            joints: [self.system.robots[0].joint_count(), self.system.robots[1].joint_count()],
        }
    }

    pub fn x_obj_initial(&self) -> Pose {
        let o = self.layout().pose_offset();
        pose_from_array(self.start.rows(o, POSE_DIM).as_slice())
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        self.config.validate()?;
        let dim = self.system.state_dim();
        if self.start.len() != dim {
            return Err(PlannerError::DimensionMismatch { expected: dim, got: self.start.len() });
        }
        if !(self.t_max >= self.config.bounds.t_min) {
            return Err(PlannerError::InvalidProblem("t_max below t_min".into()));
        }
        if !(self.eps_position >= 0.0) || !(self.eps_orientation >= 0.0) {
            return Err(PlannerError::InvalidProblem("slack bounds must be nonnegative".into()));
        }
        if !self.proxies.is_empty() && self.proxies.len() != 2 {
            return Err(PlannerError::InvalidProblem("need zero or two arm proxies".into()));
        }
        for (arm, p) in self.proxies.iter().enumerate() {
            let n = self.system.robots[arm].joint_count();
            if p.model.joint_count() != n || p.detector.sets.is_empty() {
                return Err(PlannerError::InvalidProblem(format!("proxy {arm} does not match its arm")));
            }
        }
        if let Some(v) = &self.visibility {
            if v.rig.arm > 1 || v.model.is_empty() {
                return Err(PlannerError::InvalidProblem("visibility term needs a camera arm and candidates".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub control_points: usize,
    pub joints: [usize; 2],
}

impl Layout {
    pub fn dim(&self) -> usize {
        self.joints[0] + self.joints[1] + POSE_DIM
    }

    pub fn joint_count(&self) -> usize {
        self.joints[0] + self.joints[1]
    }

    pub fn joint_offset(&self, arm: usize) -> usize {
        if arm == 0 { 0 } else { self.joints[0] }
    }

    pub fn pose_offset(&self) -> usize {
        self.joint_count()
    }

    pub fn var(&self, i: usize, d: usize) -> usize {
        i * self.dim() + d
    }

    pub fn t_index(&self) -> usize {
        self.control_points * self.dim()
    }

    pub fn eps_index(&self, j: usize) -> usize {
        self.t_index() + 1 + j
    }

    pub fn len(&self) -> usize {
        self.control_points * self.dim() + 1 + POSE_DIM
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostTerm {
    pub name: &'static str,
    pub value: f64,
}

/// Built problem: collocation operators, bounds and the flattened goal.
pub struct Ocp<'a> {
    pub problem: &'a PlannerProblem,
    pub layout: Layout,
    pub colloc: CollocationMatrices,
    knots: KnotVector,
    /// Control points to derivative control points, `(M-1) x M`.
    vel: DMatrix<f64>,
    /// Control points to second-derivative control points, `(M-2) x M`.
    acc: DMatrix<f64>,
    goal: [f64; POSE_DIM],
    lower: DVector<f64>,
    upper: DVector<f64>,
    v_max: Vec<f64>,
    a_max: Vec<f64>,
    q_mid: Vec<f64>,
    collision_rows_per_point: usize,
}

pub fn build_ocp(problem: &PlannerProblem) -> Result<Ocp<'_>, PlannerError> {
    problem.validate()?;
    let layout = problem.layout();
    let sp = problem.config.spline;
    if sp.degree < 2 {
        return Err(PlannerError::InvalidConfig("acceleration costs need degree >= 2".into()));
    }
    let m = sp.control_points;
    let knots = KnotVector::clamped_uniform(sp.degree, m)?;
    let colloc = collocation_matrices(&knots, &uniform_phases(sp.collocation))?;
    let vel = knots.difference_matrix()?;
    let acc = knots.derivative()?.difference_matrix()? * &vel;

    let po = layout.pose_offset();
    let mut goal = pose_to_array(&problem.x_obj_final);
    let start_q = problem.start.rows(po + 3, 4);
    if (0..4).map(|j| goal[3 + j] * start_q[j]).sum::<f64>() < 0.0 {
        for g in goal.iter_mut().skip(3) {
            *g = -*g;
        }
    }

    let mut v_max = Vec::new();
    let mut a_max = Vec::new();
    let mut q_mid = Vec::new();
    let mut lower = DVector::zeros(layout.len());
    let mut upper = DVector::zeros(layout.len());
    let b = &problem.config.bounds;
    for arm in 0..2 {
        let r = &problem.system.robots[arm];
        v_max.extend(r.v_limit.iter());
        a_max.extend(r.a_limit.iter());
        q_mid.extend(r.q_mid().iter());
    }
    for i in 0..m {
        for d in 0..layout.dim() {
            let k = layout.var(i, d);
            if i == 0 {
                lower[k] = problem.start[d];
                upper[k] = problem.start[d];
                continue;
            }
            let (lo, hi) = if d < po {
                let (arm, j) = if d < layout.joints[0] { (0, d) } else { (1, d - layout.joints[0]) };
                let r = &problem.system.robots[arm];
                (r.q_min[j], r.q_max[j])
            } else if d < po + 3 {
                (-b.workspace, b.workspace)
            } else {
                (-1.5, 1.5)
            };
            lower[k] = lo;
            upper[k] = hi;
        }
    }
    lower[layout.t_index()] = b.t_min;
    upper[layout.t_index()] = problem.t_max;
    let eq = (0.5 * problem.eps_orientation).sin();
    for j in 0..POSE_DIM {
        let e = if j < 3 { problem.eps_position } else { eq };
        lower[layout.eps_index(j)] = -e;
        upper[layout.eps_index(j)] = e;
    }
    let collision_rows_per_point = problem
        .proxies
        .iter()
        .map(|p| p.detector.sets.iter().map(|s| s.categories()).sum::<usize>())
        .sum();
    Ok(Ocp { problem, layout, colloc, knots, vel, acc, goal, lower, upper, v_max, a_max, q_mid, collision_rows_per_point })
}

/// Per-collocation-point quantities and their Jacobians w.r.t. the state.
struct PointBlock {
    chain: [f64; 12],
    chain_jac: Option<DMatrix<f64>>,
    collision: Vec<f64>,
    collision_jac: Option<DMatrix<f64>>,
    visibility: f64,
    visibility_grad: Option<DVector<f64>>,
}

fn quat_at(z: &[f64], o: usize) -> Quaternion<f64> {
    Quaternion::new(z[o], z[o + 1], z[o + 2], z[o + 3])
}

/// `[p_a - p; 2 vec(conj(u) q_a)]` for both arms, where `p`, `u` are the
/// object block of `z` and `p_a`, `q_a` the pose implied by arm `a`.
/// The rotation rows vanish exactly when the rotations agree, for either
/// quaternion sign and any scale of `u`.
pub fn chain_residual_at(system: &ClosedChainSystem, z: &DVector<f64>) -> Result<[f64; 12], PlannerError> {
    let n = [system.robots[0].joint_count(), system.robots[1].joint_count()];
    let po = n[0] + n[1];
    if z.len() != po + POSE_DIM {
        return Err(PlannerError::DimensionMismatch { expected: po + POSE_DIM, got: z.len() });
    }
    let u = quat_at(z.as_slice(), po + 3);
    let mut out = [0.0; 12];
    for arm in 0..2 {
        let off = if arm == 0 { 0 } else { n[0] };
        let q = z.rows(off, n[arm]).into_owned();
        let x = system.object_pose(arm, &q)?;
        let p = x.translation.vector;
        let rel = u.conjugate() * x.rotation.quaternion();
        for r in 0..3 {
            out[arm * 6 + r] = p[r] - z[po + r];
            out[arm * 6 + 3 + r] = 2.0 * rel.imag()[r];
        }
    }
    Ok(out)
}

impl<'a> Ocp<'a> {
    pub fn collocation_count(&self) -> usize {
        self.colloc.phases.len()
    }

    pub fn control_matrix(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let l = self.layout;
        DMatrix::from_fn(l.control_points, l.dim(), |i, d| x[l.var(i, d)])
    }

    pub fn bounds(&self) -> (&DVector<f64>, &DVector<f64>) {
        (&self.lower, &self.upper)
    }

    pub fn goal_flat(&self) -> [f64; POSE_DIM] {
        self.goal
    }

    pub fn equality_count(&self) -> usize {
        POSE_DIM + 12 * (self.collocation_count() - 1) + (self.layout.control_points - 1)
    }

    pub fn inequality_count(&self) -> usize {
        let nj = self.layout.joint_count();
        let m = self.layout.control_points;
        2 * nj * (m - 1) + 2 * nj * (m - 2) + self.collision_rows_per_point * (self.collocation_count() - 1)
    }

    fn point_block(&self, z: &[f64], jac: bool) -> Result<PointBlock, PlannerError> {
        let p = self.problem;
        let l = self.layout;
        let dim = l.dim();
        let po = l.pose_offset();
        let u = quat_at(z, po + 3);
        let mut chain = [0.0; 12];
        let mut chain_jac = jac.then(|| DMatrix::zeros(12, dim));
        let mut collision = Vec::with_capacity(self.collision_rows_per_point);
        let mut collision_jac = jac.then(|| DMatrix::zeros(self.collision_rows_per_point, dim));
        let margin = p.config.bounds.collision_margin;
        let mut crow = 0;
        for arm in 0..2 {
            let off = l.joint_offset(arm);
            let n = l.joints[arm];
            let q = DVector::from_column_slice(&z[off..off + n]);
            let fk = forward_kinematics(&p.system.robots[arm], &q)?;
            let x = fk.ee * p.system.grasps[arm];
            let qa = *x.rotation.quaternion();
            let pa = x.translation.vector;
            let rel = u.conjugate() * qa;
            for r in 0..3 {
                chain[arm * 6 + r] = pa[r] - z[po + r];
                chain[arm * 6 + 3 + r] = 2.0 * rel.imag()[r];
            }
            if let Some(cj) = chain_jac.as_mut() {
                let oj = p.system.object_jacobian(arm, &fk);
                let mut m_rot = nalgebra::Matrix3::zeros();
                for i in 0..3 {
                    let mut w = Vector3::zeros();
                    w[i] = 1.0;
                    let dq = u.conjugate() * Quaternion::from_imag(w) * qa;
                    m_rot.set_column(i, &dq.imag());
                }
                let jrot = m_rot * oj.rows(3, 3);
                for c in 0..n {
                    for r in 0..3 {
                        cj[(arm * 6 + r, off + c)] = oj[(r, c)];
                        cj[(arm * 6 + 3 + r, off + c)] = jrot[(r, c)];
                    }
                }
                for r in 0..3 {
                    cj[(arm * 6 + r, po + r)] = -1.0;
                }
                for j in 0..4 {
                    let mut e = [0.0; 4];
                    e[j] = 1.0;
                    let dq = Quaternion::new(e[0], e[1], e[2], e[3]).conjugate() * qa;
                    for r in 0..3 {
                        cj[(arm * 6 + 3 + r, po + 3 + j)] = 2.0 * dq.imag()[r];
                    }
                }
            }
            if let Some(proxy) = p.proxies.get(arm) {
                for set in &proxy.detector.sets {
                    if let Some(cj) = collision_jac.as_mut() {
                        let (s, g) = set.score_with_gradient(&proxy.model, &q)?;
                        for c in 0..s.len() {
                            collision.push(s[c] + margin);
                            for j in 0..n {
                                cj[(crow + c, off + j)] = g[(c, j)];
                            }
                        }
                        crow += s.len();
                    } else {
                        let s = set.score(&proxy.model, &q)?;
                        collision.extend(s.iter().map(|v| v + margin));
                        crow += s.len();
                    }
                }
            }
        }
        let (mut visibility, mut visibility_grad) = (0.0, None);
        if let Some(v) = &p.visibility {
            let off = l.joint_offset(v.rig.arm);
            let n = l.joints[v.rig.arm];
            let q = DVector::from_column_slice(&z[off..off + n]);
            let scale = 1.0 / v.model.max_density();
            if jac {
                let (c, g) = v.model.cost_with_gradient(&v.rig, &q)?;
                visibility = c * scale;
                let mut full = DVector::zeros(dim);
                full.rows_mut(off, n).copy_from(&(g * scale));
                visibility_grad = Some(full);
            } else {
                visibility = -v.model.score(&v.rig, &q)? * scale;
            }
        }
        Ok(PointBlock { chain, chain_jac, collision, collision_jac, visibility, visibility_grad })
    }

    fn weights_sqrt(&self) -> (f64, f64, f64) {
        let w = &self.problem.config.weights;
        (w.acceleration.sqrt(), w.dexterity.sqrt(), w.slack.sqrt())
    }

    fn has_visibility(&self) -> bool {
        self.problem.visibility.is_some() && self.problem.config.weights.visibility > 0.0
    }

    /// Named cost contributions at `x`; visibility appears only when active.
    pub fn cost_terms(&self, x: &DVector<f64>) -> Result<Vec<CostTerm>, PlannerError> {
        let e = self.evaluate(x, false)?;
        let l = self.layout;
        let nj = l.joint_count();
        let n_acc = (l.control_points - 2) * nj;
        let n_dex = self.collocation_count() * nj;
        let sq = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
        let r = e.residuals.as_slice();
        let duration = self.problem.config.weights.duration * x[l.t_index()];
        let mut terms = vec![
            CostTerm { name: "acceleration", value: sq(&r[..n_acc]) },
            CostTerm { name: "dexterity", value: sq(&r[n_acc..n_acc + n_dex]) },
            CostTerm { name: "duration", value: duration },
            CostTerm { name: "slack", value: sq(&r[n_acc + n_dex..]) },
        ];
        if self.has_visibility() {
            terms.insert(3, CostTerm { name: "visibility", value: e.extra_cost - duration });
        }
        Ok(terms)
    }

    /// Straight-line object motion, arms tracked by IK, fit by least squares.
    pub fn initial_guess(&self) -> Result<DVector<f64>, PlannerError> {
        let p = self.problem;
        let l = self.layout;
        let dim = l.dim();
        let po = l.pose_offset();
        let m = l.control_points;
        let phases = uniform_phases(4 * m);
        let start = p.x_obj_initial();
        let goal = pose_from_array(&self.goal);
        let mut qs = [p.start.rows(0, l.joints[0]).into_owned(), p.start.rows(l.joints[0], l.joints[1]).into_owned()];
        let mut values = DMatrix::zeros(phases.len(), dim);
        let mut prev_q = quat_at(p.start.as_slice(), po + 3);
        for (row, &s) in phases.iter().enumerate() {
            let t = start.translation.vector.lerp(&goal.translation.vector, s);
            let r = start.rotation.try_slerp(&goal.rotation, s, 1e-9).unwrap_or(start.rotation);
            let obj = Pose::from_parts(t.into(), r);
            for arm in 0..2 {
                let target = obj * p.system.grasps[arm].inverse();
                if let Ok(q) = solve_ik(&p.system.robots[arm], &target, &qs[arm], &IkOptions::default()) {
                    qs[arm] = q;
                }
                values.view_mut((row, l.joint_offset(arm)), (1, l.joints[arm])).copy_from(&qs[arm].transpose());
            }
            let mut flat = pose_to_array(&obj);
            let q = quat_at(&flat, 3);
            if q.dot(&prev_q) < 0.0 {
                for f in flat.iter_mut().skip(3) {
                    *f = -*f;
                }
            }
            prev_q = quat_at(&flat, 3);
            for j in 0..POSE_DIM {
                values[(row, po + j)] = flat[j];
            }
        }
        if phases.len() > 0 {
            values.row_mut(0).copy_from(&p.start.transpose());
        }
        let curve = fit_least_squares(p.config.spline.degree, m, &phases, &values)?;
        let mut x = DVector::zeros(l.len());
        for i in 0..m {
            for d in 0..dim {
                x[l.var(i, d)] = curve.control_points()[(i, d)];
            }
        }
        let mut t0: f64 = 1.0;
        for d in 0..l.joint_count() {
            let dq = (values[(phases.len() - 1, d)] - p.start[d]).abs();
            t0 = t0.max(2.0 * dq / self.v_max[d] + 1.0);
        }
        x[l.t_index()] = t0;
        Ok(self.project(&x))
    }

    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(x.len(), (0..x.len()).map(|i| x[i].clamp(self.lower[i], self.upper[i])))
    }

    /// Runs the solver from `warm_start` (or the IK-tracked initial guess).
    pub fn solve(&self, warm_start: Option<&DVector<f64>>) -> Result<PlannerSolution, PlannerError> {
        self.solve_with(warm_start, None)
    }

    pub fn solve_with(&self, warm_start: Option<&DVector<f64>>, duals: Option<&Duals>) -> Result<PlannerSolution, PlannerError> {
        let x0 = match warm_start {
            Some(w) if w.len() == self.layout.len() => self.project(w),
            Some(w) => return Err(PlannerError::DimensionMismatch { expected: self.layout.len(), got: w.len() }),
            None => self.initial_guess()?,
        };
        let (x, diagnostics) = solver::solve_with_duals(self, &x0, &self.problem.config.solver, duals)?;
        self.solution_from(&x, diagnostics)
    }

    pub fn solution_from(&self, x: &DVector<f64>, diagnostics: SolverDiagnostics) -> Result<PlannerSolution, PlannerError> {
        let l = self.layout;
        let mut eps = [0.0; POSE_DIM];
        for (j, e) in eps.iter_mut().enumerate() {
            *e = x[l.eps_index(j)];
        }
        Ok(PlannerSolution {
            degree: self.knots.degree(),
            joints: l.joints,
            control_points: self.control_matrix(x),
            duration: x[l.t_index()],
            slack: eps,
            status: diagnostics.status,
            cost_terms: self.cost_terms(x)?,
            diagnostics,
            x: x.clone(),
        })
    }
}

impl Nlp for Ocp<'_> {
    fn dim(&self) -> usize {
        self.layout.len()
    }

    fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    fn evaluate(&self, x: &DVector<f64>, jac: bool) -> Result<Evaluation, PlannerError> {
        let l = self.layout;
        let nv = l.len();
        let dim = l.dim();
        let m = l.control_points;
        let nj = l.joint_count();
        let po = l.pose_offset();
        let np = self.collocation_count();
        let ti = l.t_index();
        let t = x[ti];
        let c = self.control_matrix(x);
        let z = &self.colloc.position * &c;
        let (sa, sm, sf) = self.weights_sqrt();
        let w = &self.problem.config.weights;

        let blocks = (0..np)
            .into_par_iter()
            .map(|k| {
                let zk: Vec<f64> = z.row(k).iter().copied().collect();
                self.point_block(&zk, jac)
            })
            .collect::<Result<Vec<_>, PlannerError>>()?;

        // least-squares residuals: acceleration, dexterity, slack
        let ac = &self.acc * &c;
        let n_acc = (m - 2) * nj;
        let n_dex = np * nj;
        let mut r = DVector::zeros(n_acc + n_dex + POSE_DIM);
        let mut jr = jac.then(|| DMatrix::zeros(r.len(), nv));
        for i in 0..m - 2 {
            for d in 0..nj {
                let row = i * nj + d;
                r[row] = sa * ac[(i, d)] / (t * t);
                if let Some(j) = jr.as_mut() {
                    for cpt in 0..m {
                        j[(row, l.var(cpt, d))] = sa * self.acc[(i, cpt)] / (t * t);
                    }
                    j[(row, ti)] = -2.0 * r[row] / t;
                }
            }
        }
        for k in 0..np {
            for d in 0..nj {
                let row = n_acc + k * nj + d;
                r[row] = sm * (z[(k, d)] - self.q_mid[d]);
                if let Some(j) = jr.as_mut() {
                    for cpt in 0..m {
                        j[(row, l.var(cpt, d))] = sm * self.colloc.position[(k, cpt)];
                    }
                }
            }
        }
        for e in 0..POSE_DIM {
            let row = n_acc + n_dex + e;
            r[row] = sf * x[l.eps_index(e)];
            if let Some(j) = jr.as_mut() {
                j[(row, l.eps_index(e))] = sf;
            }
        }

        // plain cost terms: duration and mean visibility cost
        let mut extra = w.duration * t;
        let mut extra_grad = jac.then(|| {
            let mut g = DVector::zeros(nv);
            g[ti] = w.duration;
            g
        });
        if self.has_visibility() {
            let scale = w.visibility / np as f64;
            for (k, b) in blocks.iter().enumerate() {
                extra += scale * b.visibility;
                if let (Some(g), Some(bg)) = (extra_grad.as_mut(), b.visibility_grad.as_ref()) {
                    for cpt in 0..m {
                        let bk = self.colloc.position[(k, cpt)];
                        if bk != 0.0 {
                            for d in 0..dim {
                                g[l.var(cpt, d)] += scale * bk * bg[d];
                            }
                        }
                    }
                }
            }
        }

        // equalities: goal, chain at k >= 1, unit quaternion on free control points
        let ne = self.equality_count();
        let mut h = DVector::zeros(ne);
        let mut jh = jac.then(|| DMatrix::zeros(ne, nv));
        for e in 0..POSE_DIM {
            h[e] = c[(m - 1, po + e)] - self.goal[e] - x[l.eps_index(e)];
            if let Some(j) = jh.as_mut() {
                j[(e, l.var(m - 1, po + e))] = 1.0;
                j[(e, l.eps_index(e))] = -1.0;
            }
        }
        for (k, b) in blocks.iter().enumerate().skip(1) {
            let base = POSE_DIM + 12 * (k - 1);
            for rr in 0..12 {
                h[base + rr] = b.chain[rr];
            }
            if let (Some(j), Some(cj)) = (jh.as_mut(), b.chain_jac.as_ref()) {
                scatter(j, cj, base, &self.colloc.position, k, l);
            }
        }
        let ub = POSE_DIM + 12 * (np - 1);
        for i in 1..m {
            let row = ub + i - 1;
            let nrm: f64 = (0..4).map(|q| c[(i, po + 3 + q)].powi(2)).sum();
            h[row] = nrm - 1.0;
            if let Some(j) = jh.as_mut() {
                for q in 0..4 {
                    j[(row, l.var(i, po + 3 + q))] = 2.0 * c[(i, po + 3 + q)];
                }
            }
        }

        // inequalities: scaled velocity and acceleration, then collision
        let ni = self.inequality_count();
        let mut g = DVector::zeros(ni);
        let mut jg = jac.then(|| DMatrix::zeros(ni, nv));
        let vc = &self.vel * &c;
        let mut row = 0;
        for i in 0..m - 1 {
            for d in 0..nj {
                for sign in [1.0, -1.0] {
                    g[row] = sign * vc[(i, d)] - t * self.v_max[d];
                    if let Some(j) = jg.as_mut() {
                        for cpt in 0..m {
                            j[(row, l.var(cpt, d))] = sign * self.vel[(i, cpt)];
                        }
                        j[(row, ti)] = -self.v_max[d];
                    }
                    row += 1;
                }
            }
        }
        for i in 0..m - 2 {
            for d in 0..nj {
                for sign in [1.0, -1.0] {
                    g[row] = sign * ac[(i, d)] - t * t * self.a_max[d];
                    if let Some(j) = jg.as_mut() {
                        for cpt in 0..m {
                            j[(row, l.var(cpt, d))] = sign * self.acc[(i, cpt)];
                        }
                        j[(row, ti)] = -2.0 * t * self.a_max[d];
                    }
                    row += 1;
                }
            }
        }
        for (k, b) in blocks.iter().enumerate().skip(1) {
            for (q, v) in b.collision.iter().enumerate() {
                g[row + q] = *v;
            }
            if let (Some(j), Some(cj)) = (jg.as_mut(), b.collision_jac.as_ref()) {
                scatter(j, cj, row, &self.colloc.position, k, l);
            }
            row += b.collision.len();
        }
        debug_assert_eq!(row, ni);

        Ok(Evaluation {
            residuals: r,
            residual_jacobian: jr,
            extra_cost: extra,
            extra_gradient: extra_grad,
            eq: h,
            eq_jacobian: jh,
            ineq: g,
            ineq_jacobian: jg,
        })
    }
}

/// Adds `local` (rows x dim, w.r.t. the state at collocation point `k`)
/// into `target` through the spline basis row of `k`.
fn scatter(target: &mut DMatrix<f64>, local: &DMatrix<f64>, row0: usize, basis: &DMatrix<f64>, k: usize, l: Layout) {
    for cpt in 0..l.control_points {
        let bk = basis[(k, cpt)];
        if bk == 0.0 {
            continue;
        }
        for r in 0..local.nrows() {
            for d in 0..local.ncols() {
                let v = local[(r, d)];
                if v != 0.0 {
                    target[(row0 + r, l.var(cpt, d))] += bk * v;
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlannerSolution {
    pub degree: usize,
    pub joints: [usize; 2],
    /// `M x dim`, one row per control point.
    pub control_points: DMatrix<f64>,
    pub duration: f64,
    pub slack: [f64; POSE_DIM],
    pub status: SolveStatus,
    pub cost_terms: Vec<CostTerm>,
    pub diagnostics: SolverDiagnostics,
    /// Raw decision vector, kept for warm starts.
    pub x: DVector<f64>,
}

impl PlannerSolution {
    pub fn is_usable(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal | SolveStatus::Feasible)
    }

    pub fn states(&self) -> Vec<SystemState> {
        (0..self.control_points.nrows())
            .map(|i| {
                let v = self.control_points.row(i).transpose();
                SystemState::from_vector(&v, self.joints[0], self.joints[1]).expect("row has state length")
            })
            .collect()
    }

    pub fn curve(&self) -> BSplineCurve {
        BSplineCurve::clamped_uniform(self.degree, self.control_points.clone()).expect("solution curve is valid")
    }

    pub fn trajectory(&self) -> PhaseTrajectory {
        PhaseTrajectory::new(self.curve(), self.duration).expect("duration is positive")
    }

    pub fn slack_norm(&self) -> f64 {
        self.slack.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Object pose block at phase `s`, quaternion normalized.
    pub fn object_pose(&self, s: f64) -> Pose {
        let z = self.curve().evaluate(s).expect("phase in range");
        let o = self.joints[0] + self.joints[1];
        let p = Vector3::new(z[o], z[o + 1], z[o + 2]);
        let q = UnitQuaternion::from_quaternion(quat_at(z.as_slice(), o + 3));
        Pose::from_parts(p.into(), q)
    }
}
