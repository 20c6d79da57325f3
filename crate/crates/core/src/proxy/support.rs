//! Support sets: training, scoring, pruning and text serialization.
//!
//! Training has two stages. A kernel perceptron on the normalized
//! similarity `exp(-rbar / sigma)` selects support configurations from the
//! data. The score weights are then a ridge least-squares fit of
//! `K_ph(X, S) W = Y` with the polyharmonic FK kernel, so the self-kernel of a
//! support point is exactly zero and scores are smooth in `q`.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, Vector3};
use rayon::prelude::*;

use super::dataset::LabeledDataset;
use super::kernel::{features, feature_kernel, group_points, mean_distance, polyharmonic_radial_derivative};
use super::ProxyError;
use crate::kinematics::{forward_kinematics, point_jacobian, ControlPoint, RobotModel};

pub const SUPPORT_FORMAT_TAG: &str = "c2f-support";
pub const SUPPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub order: u32,
    /// Length scale of the perceptron similarity, meters.
    pub sigma: f64,
    pub max_iterations: usize,
    /// Ridge term relative to the mean diagonal of the normal matrix.
    pub ridge: f64,
    /// Overrides the group budget from the model when set.
    pub sv_budget: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { order: 1, sigma: 0.05, max_iterations: 20_000, ridge: 1e-6, sv_budget: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainReport {
    pub iterations: usize,
    /// Perceptron stage reached positive margins on all data.
    pub converged: bool,
    pub budget_reached: bool,
    /// Training points whose final score has the wrong sign.
    pub margin_violations: usize,
}

#[derive(Debug, Clone)]
pub struct SupportSet {
    pub group: usize,
    pub control_point_ids: Vec<usize>,
    pub order: u32,
    pub sigma: f64,
    pub sv_budget: usize,
    /// Support configurations, one per row.
    pub configs: DMatrix<f64>,
    /// Oracle labels of the support configurations.
    pub labels: DMatrix<f64>,
    /// Perceptron coefficients (hypothesis weights).
    pub alpha: DMatrix<f64>,
    /// Score weights `W`.
    pub weights: DMatrix<f64>,
    features: Vec<Vec<Vector3<f64>>>,
    points: Vec<ControlPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramPruneConfig {
    pub sigma: f64,
    pub threshold_free: f64,
    pub threshold_collision: f64,
}

impl Default for GramPruneConfig {
    fn default() -> Self {
        GramPruneConfig { sigma: 4.0, threshold_free: 0.95, threshold_collision: 0.99 }
    }
}

struct Bank {
    feats: Vec<Vec<Vector3<f64>>>,
}

impl Bank {
    fn new(model: &RobotModel, points: &[ControlPoint], x: &DMatrix<f64>) -> Result<Self, ProxyError> {
        let feats = (0..x.nrows())
            .into_par_iter()
            .map(|i| features(model, points, &x.row(i).transpose()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Bank { feats })
    }
}

/// Perceptron stage: returns coefficients `alpha` (N x c) and a report.
fn perceptron(bank: &Bank, y: &DMatrix<f64>, cfg: &TrainConfig, budget: usize) -> (DMatrix<f64>, TrainReport) {
    let n = y.nrows();
    let c = y.ncols();
    let mut alpha = DMatrix::zeros(n, c);
    let mut columns: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut column = |i: usize| -> Vec<f64> {
        columns
            .entry(i)
            .or_insert_with(|| {
                bank.feats.iter().map(|f| (-mean_distance(f, &bank.feats[i]) / cfg.sigma).exp()).collect()
            })
            .clone()
    };
    let mut in_support = vec![false; n];
    let mut support_count = 0usize;
    let mut report = TrainReport { iterations: 0, converged: true, budget_reached: false, margin_violations: 0 };
    for cat in 0..c {
        let mut f = vec![0.0; n];
        // contributions of SVs already chosen for earlier categories start at zero
        let mut converged = false;
        let mut it = 0;
        while it < cfg.max_iterations {
            it += 1;
            let (i, m) = (0..n)
                .map(|i| (i, y[(i, cat)] * f[i]))
                .fold((0, f64::INFINITY), |acc, v| if v.1 < acc.1 { v } else { acc });
            if m > 0.0 {
                // drop the most redundant support point, if any
                let candidate = (0..n)
                    .filter(|&j| alpha[(j, cat)] != 0.0)
                    .map(|j| (j, y[(j, cat)] * (f[j] - alpha[(j, cat)])))
                    .filter(|&(_, v)| v > 0.0)
                    .fold(None, |acc: Option<(usize, f64)>, v| match acc {
                        Some(a) if a.1 >= v.1 => Some(a),
                        _ => Some(v),
                    });
                let Some((j, _)) = candidate else {
                    converged = true;
                    break;
                };
                let col = column(j);
                let a = alpha[(j, cat)];
                for (fk, k) in f.iter_mut().zip(&col) {
                    *fk -= a * k;
                }
                alpha[(j, cat)] = 0.0;
                if (0..c).all(|cc| alpha[(j, cc)] == 0.0) {
                    in_support[j] = false;
                    support_count -= 1;
                }
                continue;
            }
            if !in_support[i] && support_count >= budget {
                report.budget_reached = true;
                break;
            }
            let delta = y[(i, cat)] - f[i];
            let col = column(i);
            for (fk, k) in f.iter_mut().zip(&col) {
                *fk += delta * k;
            }
            alpha[(i, cat)] += delta;
            if !in_support[i] {
                in_support[i] = true;
                support_count += 1;
            }
        }
        report.iterations += it;
        report.converged &= converged;
    }
    (alpha, report)
}

/// Ridge least-squares score weights of `support` features against `data`.
fn fit_weights(
    data_feats: &[Vec<Vector3<f64>>],
    y: &DMatrix<f64>,
    sv_feats: &[Vec<Vector3<f64>>],
    order: u32,
    ridge: f64,
) -> Result<DMatrix<f64>, ProxyError> {
    let m = sv_feats.len();
    let n = data_feats.len();
    let rows: Vec<Vec<f64>> = data_feats
        .par_iter()
        .map(|f| sv_feats.iter().map(|s| feature_kernel(f, s, order)).collect())
        .collect();
    let a = DMatrix::from_fn(n, m, |i, j| rows[i][j]);
    let mut normal = a.transpose() * &a;
    let lambda = ridge * normal.trace() / m as f64;
    for i in 0..m {
        normal[(i, i)] += lambda.max(1e-300);
    }
    let rhs = a.transpose() * y;
    let chol = normal.cholesky().ok_or(ProxyError::SingularFit)?;
    Ok(chol.solve(&rhs))
}

impl SupportSet {
    pub fn len(&self) -> usize {
        self.configs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.nrows() == 0
    }

    pub fn categories(&self) -> usize {
        self.weights.ncols()
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.weights.amax()
    }

    /// Assembles a support set from its stored blocks.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        model: &RobotModel,
        group: usize,
        order: u32,
        sigma: f64,
        budget: usize,
        configs: DMatrix<f64>,
        labels: DMatrix<f64>,
        alpha: DMatrix<f64>,
        weights: DMatrix<f64>,
    ) -> Result<Self, ProxyError> {
        let points = group_points(model, group)?;
        let feats = Bank::new(model, &points, &configs)?.feats;
        Ok(SupportSet {
            group,
            control_point_ids: model.groups[group].control_points.clone(),
            order,
            sigma,
            sv_budget: budget,
            configs,
            labels,
            alpha,
            weights,
            features: feats,
            points,
        })
    }

    fn config_of(&self) -> TrainConfig {
        TrainConfig { order: self.order, sigma: self.sigma, sv_budget: Some(self.sv_budget), ..TrainConfig::default() }
    }

    /// Scores per category at `q`; positive means predicted collision.
    pub fn score(&self, model: &RobotModel, q: &DVector<f64>) -> Result<DVector<f64>, ProxyError> {
        if self.is_empty() {
            return Err(ProxyError::EmptySupport);
        }
        let f = features(model, &self.points, q)?;
        let k = DVector::from_iterator(self.len(), self.features.iter().map(|s| feature_kernel(&f, s, self.order)));
        Ok(self.weights.transpose() * k)
    }

    /// Scores and their gradient (categories x joints).
    pub fn score_with_gradient(
        &self,
        model: &RobotModel,
        q: &DVector<f64>,
    ) -> Result<(DVector<f64>, DMatrix<f64>), ProxyError> {
        if self.is_empty() {
            return Err(ProxyError::EmptySupport);
        }
        let fk = forward_kinematics(model, q)?;
        let pos: Vec<Vector3<f64>> = self.points.iter().map(|c| fk.point(c.link, &c.point)).collect();
        let jacs: Vec<_> = self.points.iter().zip(&pos).map(|(c, p)| point_jacobian(&fk, c.link, p)).collect();
        let cats = self.categories();
        let np = self.points.len() as f64;
        let mut s = DVector::zeros(cats);
        // gradient of the kernel w.r.t. each control point position, weighted by W
        let mut dpos = vec![nalgebra::Matrix3xX::<f64>::zeros(cats); self.points.len()];
        for (m, sv) in self.features.iter().enumerate() {
            let w = self.weights.row(m);
            for (c, (p, spt)) in pos.iter().zip(sv).enumerate() {
                let d = p - spt;
                let r = d.norm();
                let phi = super::kernel::polyharmonic_radial(r, self.order) / np;
                for j in 0..cats {
                    s[j] += w[j] * phi;
                }
                if r > 1e-12 {
                    let g = d * (polyharmonic_radial_derivative(r, self.order) / (r * np));
                    for j in 0..cats {
                        let mut col = dpos[c].column_mut(j);
                        col += g * w[j];
                    }
                }
            }
        }
        let mut grad = DMatrix::zeros(cats, q.len());
        for (c, j) in jacs.iter().enumerate() {
            grad += dpos[c].transpose() * j;
        }
        Ok((s, grad))
    }

    /// Removes same-label support pairs whose similarity exceeds the label's
    /// threshold, keeping the earlier index. The remaining weights are refit
    /// to `refit` when given, and otherwise to reproduce the old scores at
    /// the old support configurations.
    pub fn gram_prune(
        &self,
        model: &RobotModel,
        cfg: &GramPruneConfig,
        refit: Option<&LabeledDataset>,
    ) -> Result<SupportSet, ProxyError> {
        let keep = self.gram_keep(cfg);
        if keep.len() == self.len() {
            return Ok(self.clone());
        }
        let feats: Vec<_> = keep.iter().map(|&i| self.features[i].clone()).collect();
        let tc = self.config_of();
        let weights = match refit {
            Some(data) => {
                let bank = Bank::new(model, &self.points, &data.x)?;
                fit_weights(&bank.feats, &data.y, &feats, self.order, tc.ridge)?
            }
            None => {
                let targets = DMatrix::from_fn(self.len(), self.categories(), |i, j| {
                    let k: f64 = self
                        .features
                        .iter()
                        .enumerate()
                        .map(|(m, s)| feature_kernel(&self.features[i], s, self.order) * self.weights[(m, j)])
                        .sum();
                    k
                });
                fit_weights(&self.features, &targets, &feats, self.order, tc.ridge)?
            }
        };
        Ok(SupportSet {
            configs: self.configs.select_rows(&keep),
            labels: self.labels.select_rows(&keep),
            alpha: self.alpha.select_rows(&keep),
            weights,
            features: feats,
            ..self.clone()
        })
    }

    /// Indices kept by Gram pruning.
    pub fn gram_keep(&self, cfg: &GramPruneConfig) -> Vec<usize> {
        let mut keep: Vec<usize> = Vec::new();
        for i in 0..self.len() {
            let collision = self.labels.row(i).iter().any(|&v| v > 0.0);
            let thr = if collision { cfg.threshold_collision } else { cfg.threshold_free };
            let redundant = keep.iter().any(|&j| {
                self.labels.row(j) == self.labels.row(i)
                    && (-mean_distance(&self.features[i], &self.features[j]) / cfg.sigma).exp() > thr
            });
            if !redundant {
                keep.push(i);
            }
        }
        keep
    }

    /// Drops rows whose weights are all zero.
    pub fn drop_zero_rows(&self) -> SupportSet {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.weights.row(i).iter().any(|w| *w != 0.0)).collect();
        if keep.len() == self.len() {
            return self.clone();
        }
        SupportSet {
            configs: self.configs.select_rows(&keep),
            labels: self.labels.select_rows(&keep),
            alpha: self.alpha.select_rows(&keep),
            weights: self.weights.select_rows(&keep),
            features: keep.iter().map(|&i| self.features[i].clone()).collect(),
            ..self.clone()
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{SUPPORT_FORMAT_TAG} {SUPPORT_FORMAT_VERSION}");
        let _ = writeln!(s, "group {}", self.group);
        let _ = writeln!(s, "order {}", self.order);
        let _ = writeln!(s, "sigma {:e}", self.sigma);
        let _ = writeln!(s, "budget {}", self.sv_budget);
        let ids: Vec<String> = self.control_point_ids.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(s, "control_points {}", ids.join(" "));
        let _ = writeln!(s, "dims {} {} {}", self.len(), self.configs.ncols(), self.categories());
        for i in 0..self.len() {
            let row = |m: &DMatrix<f64>| m.row(i).iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(" ");
            let _ = writeln!(
                s,
                "sv {} | {} | {} | {}",
                row(&self.configs),
                row(&self.labels),
                row(&self.alpha),
                row(&self.weights)
            );
        }
        s
    }

    pub fn from_text(text: &str, model: &RobotModel) -> Result<Self, ProxyError> {
        let bad = |m: &str| ProxyError::Parse(m.to_string());
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| bad("empty input"))?;
        let mut h = header.split_whitespace();
        if h.next() != Some(SUPPORT_FORMAT_TAG) {
            return Err(bad("missing format tag"));
        }
        let version: u32 = h.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("missing version"))?;
        if version != SUPPORT_FORMAT_VERSION {
            return Err(ProxyError::Parse(format!("unsupported version {version}")));
        }
        let mut field = |name: &str| -> Result<String, ProxyError> {
            let line = lines.next().ok_or_else(|| bad("truncated header"))?;
            line.strip_prefix(name)
                .map(|r| r.trim().to_string())
                .ok_or_else(|| ProxyError::Parse(format!("expected {name}")))
        };
        let num = |s: String| s.parse::<f64>().map_err(|_| bad("bad number"));
        let int = |s: String| s.parse::<usize>().map_err(|_| bad("bad integer"));
        let group = int(field("group")?)?;
        let order = int(field("order")?)? as u32;
        let sigma = num(field("sigma")?)?;
        let budget = int(field("budget")?)?;
        let ids: Vec<usize> = field("control_points")?
            .split_whitespace()
            .map(|v| v.parse().map_err(|_| bad("bad control point id")))
            .collect::<Result<_, _>>()?;
        let dims: Vec<usize> = field("dims")?
            .split_whitespace()
            .map(|v| v.parse().map_err(|_| bad("bad dims")))
            .collect::<Result<_, _>>()?;
        let [m, d, c] = dims[..] else { return Err(bad("dims needs three values")) };
        let mut blocks = [DMatrix::zeros(m, d), DMatrix::zeros(m, c), DMatrix::zeros(m, c), DMatrix::zeros(m, c)];
        for i in 0..m {
            let line = lines.next().ok_or_else(|| bad("missing support row"))?;
            let body = line.strip_prefix("sv").ok_or_else(|| bad("expected sv row"))?;
            let parts: Vec<&str> = body.split('|').collect();
            if parts.len() != 4 {
                return Err(bad("sv row needs four blocks"));
            }
            for (b, part) in blocks.iter_mut().zip(parts) {
                let vals: Vec<f64> =
                    part.split_whitespace().map(|v| v.parse().map_err(|_| bad("bad value"))).collect::<Result<_, _>>()?;
                if vals.len() != b.ncols() {
                    return Err(bad("sv block has wrong width"));
                }
                for (j, v) in vals.into_iter().enumerate() {
                    b[(i, j)] = v;
                }
            }
        }
        if group >= model.groups.len() || model.groups[group].control_points != ids {
            return Err(bad("support set does not match the robot model groups"));
        }
        let [configs, labels, alpha, weights] = blocks;
        SupportSet::from_parts(model, group, order, sigma, budget, configs, labels, alpha, weights)
    }
}

const REFINE_ROUNDS: usize = 25;
const REFINE_BATCH: usize = 4;

/// Rows whose fitted score has the wrong sign in some category, with their
/// most negative margin.
fn violations(
    data_feats: &[Vec<Vector3<f64>>],
    y: &DMatrix<f64>,
    sv_feats: &[Vec<Vector3<f64>>],
    weights: &DMatrix<f64>,
    order: u32,
) -> Vec<(usize, f64)> {
    data_feats
        .par_iter()
        .enumerate()
        .filter_map(|(i, f)| {
            let k = DVector::from_iterator(sv_feats.len(), sv_feats.iter().map(|s| feature_kernel(f, s, order)));
            let sc = weights.transpose() * k;
            let worst = (0..sc.len()).map(|j| sc[j] * y[(i, j)]).fold(f64::INFINITY, f64::min);
            (worst <= 0.0).then_some((i, worst))
        })
        .collect()
}

/// Trains the support set of one collision group.
pub fn train(
    data: &LabeledDataset,
    model: &RobotModel,
    group: usize,
    cfg: &TrainConfig,
) -> Result<(SupportSet, TrainReport), ProxyError> {
    if data.is_empty() {
        return Err(ProxyError::EmptyDataset);
    }
    if cfg.order < 1 {
        return Err(ProxyError::InvalidKernelOrder(cfg.order));
    }
    let points = group_points(model, group)?;
    let budget = cfg.sv_budget.unwrap_or(model.groups[group].sv_budget).max(1);
    let bank = Bank::new(model, &points, &data.x)?;
    let (mut alpha, mut report) = perceptron(&bank, &data.y, cfg, budget);
    let mut rows: Vec<usize> = (0..data.len()).filter(|&i| alpha.row(i).iter().any(|a| *a != 0.0)).collect();
    let mut sv_feats: Vec<_> = rows.iter().map(|&i| bank.feats[i].clone()).collect();
    let mut weights = fit_weights(&bank.feats, &data.y, &sv_feats, cfg.order, cfg.ridge)?;
    // The perceptron separates under its similarity, not under the fitted
    // polyharmonic score; the worst violators of the latter join the support.
    for _ in 0..REFINE_ROUNDS {
        let room = budget.saturating_sub(rows.len()).min(REFINE_BATCH);
        let mut bad = violations(&bank.feats, &data.y, &sv_feats, &weights, cfg.order);
        bad.retain(|(i, _)| !rows.contains(i));
        if room == 0 || bad.is_empty() {
            break;
        }
        bad.sort_by(|a, b| a.1.total_cmp(&b.1));
        for &(i, _) in bad.iter().take(room) {
            rows.push(i);
            sv_feats.push(bank.feats[i].clone());
            for j in 0..alpha.ncols() {
                alpha[(i, j)] = data.y[(i, j)];
            }
        }
        weights = fit_weights(&bank.feats, &data.y, &sv_feats, cfg.order, cfg.ridge)?;
    }
    report.budget_reached |= rows.len() >= budget;
    let support = SupportSet::from_parts(
        model,
        group,
        cfg.order,
        cfg.sigma,
        budget,
        data.x.select_rows(&rows),
        data.y.select_rows(&rows),
        alpha.select_rows(&rows),
        weights,
    )?
    .drop_zero_rows();
    report.margin_violations = violations(&bank.feats, &data.y, &support.features, &support.weights, cfg.order).len();
    Ok((support, report))
}

/// Fraction of rows where the sign of every category score matches the label.
pub fn accuracy(support: &SupportSet, model: &RobotModel, data: &LabeledDataset) -> Result<f64, ProxyError> {
    let hits = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let s = support.score(model, &data.config(i))?;
            Ok((0..s.len()).all(|j| (s[j] > 0.0) == (data.y[(i, j)] > 0.0)))
        })
        .collect::<Result<Vec<bool>, ProxyError>>()?;
    Ok(hits.iter().filter(|h| **h).count() as f64 / data.len().max(1) as f64)
}

/// Refits the weights of `support` against `data`, keeping its support configurations.
pub fn refit(support: &SupportSet, model: &RobotModel, data: &LabeledDataset) -> Result<SupportSet, ProxyError> {
    let bank = Bank::new(model, &support.points, &data.x)?;
    let weights = fit_weights(&bank.feats, &data.y, &support.features, support.order, TrainConfig::default().ridge)?;
    Ok(SupportSet { weights, ..support.clone() })
}
