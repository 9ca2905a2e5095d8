//! Elastic-net penalized Cox proportional hazards model.
//!
//! Minimizes `-(1/n) logPL(beta) + lambda * (r |beta|_1 + (1 - r)/2 |beta|_2^2)`
//! over internally standardized columns, with Breslow handling of tied event
//! times. The solver is an outer IRLS loop: each iteration builds a
//! quadratic approximation of the partial likelihood (exact Hessian for
//! moderate widths, its diagonal in the linear predictor for wide matrices),
//! minimizes it by cyclic coordinate descent, and backtracks so the
//! objective never increases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::survival::{count_events, StepFunction, SurvivalDataset, SurvivalTarget};

pub const LAMBDA_RANGE: (f64, f64) = (1e-4, 1e-2);
pub const L1_RATIO_RANGE: (f64, f64) = (0.1, 1.0);

/// A fit is declared converged only when the stationarity residual is below this.
pub const KKT_TOLERANCE: f64 = 1e-6;

/// Up to this many columns the quadratic model uses the exact Hessian;
/// wider problems fall back to its diagonal in the linear predictor.
const EXACT_HESSIAN_MAX_COLS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoxnetConfig {
    pub lambda: f64,
    /// Share of the penalty given to the L1 term.
    pub l1_ratio: f64,
    pub max_iter: usize,
    /// Relative objective change below which the outer loop may stop.
    pub tol: f64,
}

impl Default for CoxnetConfig {
    fn default() -> Self {
        CoxnetConfig { lambda: 1e-3, l1_ratio: 0.5, max_iter: 100, tol: 1e-7 }
    }
}

impl CoxnetConfig {
    pub fn new(lambda: f64, l1_ratio: f64) -> Self {
        CoxnetConfig { lambda, l1_ratio, ..Default::default() }
    }

    /// `lambda = 0` is accepted for unpenalized fits.
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidInput(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.l1_ratio) {
            return Err(Error::InvalidInput(format!("l1 ratio must lie in [0, 1], got {}", self.l1_ratio)));
        }
        if self.max_iter == 0 || !(self.tol > 0.0) {
            return Err(Error::InvalidInput("max_iter and tol must be positive".into()));
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        format!("lambda={:e};r={}", self.lambda, self.l1_ratio)
    }
}

/// Cartesian grid with log-spaced lambda and linearly spaced l1 ratio, both
/// endpoints included. Lambda varies slowest.
pub fn coxnet_grid(lambda_count: usize, r_count: usize) -> Vec<CoxnetConfig> {
    let lambdas = log_space(LAMBDA_RANGE.0, LAMBDA_RANGE.1, lambda_count);
    let ratios = lin_space(L1_RATIO_RANGE.0, L1_RATIO_RANGE.1, r_count);
    lambdas
        .iter()
        .flat_map(|&l| ratios.iter().map(move |&r| CoxnetConfig::new(l, r)))
        .collect()
}

fn lin_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    lin_space(lo.log10(), hi.log10(), n)
        .into_iter()
        .map(|e| 10f64.powf(e))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxnetModel {
    pub coefficients: Vec<f64>,
    pub column_names: Vec<String>,
    /// Breslow cumulative baseline hazard at the fitted coefficients.
    pub baseline_hazard: StepFunction,
    pub config: CoxnetConfig,
}

impl CoxnetModel {
    /// Linear predictor `X beta`; larger means higher risk.
    pub fn predict_risk(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        check_columns(&self.column_names, features)?;
        Ok(features.rows().map(|row| dot(row, &self.coefficients)).collect())
    }

    /// Cumulative hazard `H0(t) exp(eta)` for each row at time `t`.
    pub fn cumulative_hazard(&self, features: &FeatureMatrix, t: f64) -> Result<Vec<f64>> {
        let h0 = self.baseline_hazard.eval(t);
        Ok(self.predict_risk(features)?.into_iter().map(|eta| h0 * eta.exp()).collect())
    }
}

pub(crate) fn check_columns(expected: &[String], features: &FeatureMatrix) -> Result<()> {
    if expected != features.column_names() {
        return Err(Error::ColumnMismatch {
            expected: expected.to_vec(),
            found: features.column_names().to_vec(),
        });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Rows ordered by time with tie groups, shared by the likelihood routines.
#[derive(Debug, Clone)]
pub(crate) struct RiskSets {
    /// Row indices in ascending time order.
    order: Vec<usize>,
    /// `(start, end, events)` ranges of `order` with equal times.
    groups: Vec<(usize, usize, usize)>,
    event: Vec<bool>,
}

impl RiskSets {
    pub(crate) fn new(targets: &[SurvivalTarget]) -> Self {
        let mut order: Vec<usize> = (0..targets.len()).collect();
        order.sort_by(|&a, &b| targets[a].time.total_cmp(&targets[b].time));
        let mut groups = Vec::new();
        let mut i = 0;
        while i < order.len() {
            let t = targets[order[i]].time;
            let mut j = i;
            let mut d = 0;
            while j < order.len() && targets[order[j]].time == t {
                d += targets[order[j]].event as usize;
                j += 1;
            }
            groups.push((i, j, d));
            i = j;
        }
        RiskSets { order, groups, event: targets.iter().map(|t| t.event).collect() }
    }

    /// Log partial likelihood (Breslow) at linear predictor `eta`.
    pub(crate) fn log_likelihood(&self, eta: &[f64]) -> f64 {
        let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut risk_sum = 0.0;
        let mut ll = 0.0;
        for &(start, end, d) in self.groups.iter().rev() {
            for &k in &self.order[start..end] {
                risk_sum += (eta[k] - shift).exp();
            }
            if d > 0 {
                let log_s = risk_sum.ln() + shift;
                for &k in &self.order[start..end] {
                    if self.event[k] {
                        ll += eta[k] - log_s;
                    }
                }
            }
        }
        ll
    }

    /// Gradient of the log partial likelihood with respect to `eta`, and the
    /// diagonal of its negative Hessian.
    pub(crate) fn gradient_and_weights(&self, eta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = eta.len();
        let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp_eta: Vec<f64> = eta.iter().map(|e| (e - shift).exp()).collect();
        // risk-set sums per group, accumulated from the latest time backwards
        let mut group_sum = vec![0.0; self.groups.len()];
        let mut acc = 0.0;
        for (g, &(start, end, _)) in self.groups.iter().enumerate().rev() {
            for &k in &self.order[start..end] {
                acc += exp_eta[k];
            }
            group_sum[g] = acc;
        }
        let mut grad = vec![0.0; n];
        let mut weight = vec![0.0; n];
        let (mut a, mut b) = (0.0, 0.0);
        for (g, &(start, end, d)) in self.groups.iter().enumerate() {
            if d > 0 {
                let s = group_sum[g];
                a += d as f64 / s;
                b += d as f64 / (s * s);
            }
            for &k in &self.order[start..end] {
                let e = exp_eta[k];
                grad[k] = self.event[k] as u8 as f64 - e * a;
                weight[k] = e * a - e * e * b;
            }
        }
        (grad, weight)
    }
}

impl RiskSets {
    /// Negative Hessian of the log partial likelihood in standardized
    /// coefficient space, divided by `n`.
    pub(crate) fn standardized_hessian(&self, eta: &[f64], columns: &[Vec<f64>], n: f64) -> Vec<Vec<f64>> {
        let p = columns.len();
        let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s0 = 0.0;
        let mut s1 = vec![0.0; p];
        let mut s2 = vec![vec![0.0; p]; p];
        let mut h = vec![vec![0.0; p]; p];
        let mut x = vec![0.0; p];
        for &(start, end, d) in self.groups.iter().rev() {
            for &k in &self.order[start..end] {
                let e = (eta[k] - shift).exp();
                for (xj, col) in x.iter_mut().zip(columns) {
                    *xj = col[k];
                }
                s0 += e;
                for a in 0..p {
                    let ex = e * x[a];
                    s1[a] += ex;
                    for b in 0..=a {
                        s2[a][b] += ex * x[b];
                    }
                }
            }
            if d > 0 {
                let d = d as f64;
                for a in 0..p {
                    for b in 0..=a {
                        h[a][b] += d * (s2[a][b] / s0 - s1[a] * s1[b] / (s0 * s0));
                    }
                }
            }
        }
        for a in 0..p {
            for b in 0..=a {
                h[a][b] /= n;
                h[b][a] = h[a][b];
            }
        }
        h
    }
}

/// Breslow log partial likelihood of a linear predictor.
pub fn partial_log_likelihood(eta: &[f64], targets: &[SurvivalTarget]) -> f64 {
    RiskSets::new(targets).log_likelihood(eta)
}

/// Gradient of the log partial likelihood with respect to the linear predictor.
pub fn partial_log_likelihood_eta_gradient(eta: &[f64], targets: &[SurvivalTarget]) -> Vec<f64> {
    RiskSets::new(targets).gradient_and_weights(eta).0
}

/// Gradient of the log partial likelihood with respect to `beta` at `X beta`.
pub fn partial_log_likelihood_gradient(features: &FeatureMatrix, beta: &[f64], targets: &[SurvivalTarget]) -> Vec<f64> {
    let eta: Vec<f64> = features.rows().map(|r| dot(r, beta)).collect();
    let g = partial_log_likelihood_eta_gradient(&eta, targets);
    (0..features.n_cols())
        .map(|j| features.rows().zip(&g).map(|(r, gk)| r[j] * gk).sum())
        .collect()
}

/// Penalized objective in the coordinates given (no standardization applied).
pub fn penalized_objective(
    features: &FeatureMatrix,
    beta: &[f64],
    targets: &[SurvivalTarget],
    lambda: f64,
    l1_ratio: f64,
) -> f64 {
    let eta: Vec<f64> = features.rows().map(|r| dot(r, beta)).collect();
    let n = targets.len() as f64;
    -partial_log_likelihood(&eta, targets) / n + penalty(beta, lambda, l1_ratio)
}

fn penalty(beta: &[f64], lambda: f64, l1_ratio: f64) -> f64 {
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let l2: f64 = beta.iter().map(|b| b * b).sum();
    lambda * (l1_ratio * l1 + 0.5 * (1.0 - l1_ratio) * l2)
}

/// Largest violation of the elastic-net optimality conditions.
pub fn kkt_residual(
    features: &FeatureMatrix,
    beta: &[f64],
    targets: &[SurvivalTarget],
    lambda: f64,
    l1_ratio: f64,
) -> f64 {
    let n = targets.len() as f64;
    let grad = partial_log_likelihood_gradient(features, beta, targets);
    kkt_from_gradient(&grad, beta, n, lambda, l1_ratio)
}

fn kkt_from_gradient(loglik_grad: &[f64], beta: &[f64], n: f64, lambda: f64, l1_ratio: f64) -> f64 {
    loglik_grad
        .iter()
        .zip(beta)
        .map(|(g, &b)| {
            let smooth = -g / n + lambda * (1.0 - l1_ratio) * b;
            if b != 0.0 {
                (smooth + lambda * l1_ratio * b.signum()).abs()
            } else {
                (smooth.abs() - lambda * l1_ratio).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Per-outer-iteration trace of a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct CoxnetTrace {
    /// Objective at the start and after every outer iteration (standardized scale).
    pub objective: Vec<f64>,
    pub iterations: usize,
    /// KKT residual on the standardized scale at termination.
    pub kkt_residual: f64,
}

struct Standardized {
    /// Column-major standardized values of the non-constant columns.
    columns: Vec<Vec<f64>>,
    active: Vec<usize>,
    scale: Vec<f64>,
}

fn standardize(features: &FeatureMatrix) -> Standardized {
    let n = features.n_rows() as f64;
    let mut columns = Vec::new();
    let mut active = Vec::new();
    let mut scale = Vec::new();
    for j in 0..features.n_cols() {
        let col = features.column(j);
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        if sd > 1e-12 * (1.0 + mean.abs()) {
            columns.push(col.iter().map(|v| (v - mean) / sd).collect());
            active.push(j);
            scale.push(sd);
        }
    }
    Standardized { columns, active, scale }
}

pub fn fit_coxnet(data: &SurvivalDataset, config: &CoxnetConfig) -> Result<CoxnetModel> {
    fit_coxnet_traced(data, config).map(|(m, _)| m)
}

pub fn fit_coxnet_traced(data: &SurvivalDataset, config: &CoxnetConfig) -> Result<(CoxnetModel, CoxnetTrace)> {
    config.validate()?;
    data.require_events()?;
    let targets = &data.targets;
    let n_rows = targets.len();
    let n = n_rows as f64;
    let (lambda, r) = (config.lambda, config.l1_ratio);
    let l1 = lambda * r;
    let l2 = lambda * (1.0 - r);

    let std = standardize(&data.features);
    let p = std.columns.len();
    let risk = RiskSets::new(targets);

    let eta_of = |beta: &[f64]| -> Vec<f64> {
        let mut eta = vec![0.0; n_rows];
        for (col, b) in std.columns.iter().zip(beta) {
            if *b != 0.0 {
                for (e, x) in eta.iter_mut().zip(col) {
                    *e += x * b;
                }
            }
        }
        eta
    };
    let objective = |beta: &[f64], eta: &[f64]| -risk.log_likelihood(eta) / n + penalty(beta, lambda, r);
    let std_gradient = |g_eta: &[f64]| -> Vec<f64> {
        std.columns.iter().map(|col| col.iter().zip(g_eta).map(|(x, g)| x * g).sum()).collect()
    };

    let mut beta = vec![0.0; p];
    let mut eta = vec![0.0; n_rows];
    let mut obj = objective(&beta, &eta);
    let mut history = vec![obj];
    let mut converged = p == 0;
    let mut last_delta = f64::INFINITY;
    let mut iterations = 0;
    let mut kkt = 0.0;

    while !converged && iterations < config.max_iter {
        iterations += 1;
        let (grad, weight) = risk.gradient_and_weights(&eta);
        let candidate = if p <= EXACT_HESSIAN_MAX_COLS {
            let g_beta: Vec<f64> = std_gradient(&grad).into_iter().map(|g| g / n).collect();
            let hessian = risk.standardized_hessian(&eta, &std.columns, n);
            newton_step(&beta, &g_beta, &hessian, l1, l2)
        } else {
            diagonal_step(&beta, &grad, &weight, &std.columns, n, l1, l2)
        };

        // backtrack so the true objective never increases
        let direction: Vec<f64> = candidate.iter().zip(&beta).map(|(c, b)| c - b).collect();
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = beta.iter().zip(&direction).map(|(b, d)| b + step * d).collect();
            let trial_eta = eta_of(&trial);
            let trial_obj = objective(&trial, &trial_eta);
            if trial_obj <= obj {
                accepted = Some((trial, trial_eta, trial_obj));
                break;
            }
            step *= 0.5;
        }
        let stalled = accepted.is_none();
        if let Some((b, e, o)) = accepted {
            last_delta = (obj - o).abs() / obj.abs().max(1e-300);
            beta = b;
            eta = e;
            obj = o;
        } else {
            last_delta = 0.0;
        }
        history.push(obj);

        let g_eta = risk.gradient_and_weights(&eta).0;
        kkt = kkt_from_gradient(&std_gradient(&g_eta), &beta, n, lambda, r);
        if kkt <= KKT_TOLERANCE && (last_delta < config.tol || stalled) {
            converged = true;
        } else if stalled {
            break;
        }
    }

    if !converged {
        return Err(Error::NotConverged { iterations, delta: last_delta });
    }

    let mut coefficients = vec![0.0; data.features.n_cols()];
    for ((&j, b), s) in std.active.iter().zip(&beta).zip(&std.scale) {
        coefficients[j] = b / s;
    }
    let raw_eta: Vec<f64> = data.features.rows().map(|row| dot(row, &coefficients)).collect();
    let baseline_hazard = breslow_baseline(&raw_eta, targets);
    let model = CoxnetModel {
        coefficients,
        column_names: data.features.column_names().to_vec(),
        baseline_hazard,
        config: *config,
    };
    Ok((model, CoxnetTrace { objective: history, iterations, kkt_residual: kkt }))
}

/// Minimizes `-g'd + d'Hd/2 + penalty(beta + d)` by cyclic coordinate descent.
fn newton_step(beta: &[f64], g: &[f64], hessian: &[Vec<f64>], l1: f64, l2: f64) -> Vec<f64> {
    let p = beta.len();
    let mut candidate = beta.to_vec();
    // h_d = H (candidate - beta)
    let mut h_d = vec![0.0; p];
    for _sweep in 0..10_000 {
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            let a = hessian[j][j];
            let denom = a + l2;
            if denom <= 0.0 {
                continue;
            }
            let old = candidate[j];
            let c = g[j] - h_d[j] + a * old;
            let new = soft_threshold(c, l1) / denom;
            let change = new - old;
            if change != 0.0 {
                for (hd, row) in h_d.iter_mut().zip(hessian) {
                    *hd += row[j] * change;
                }
                candidate[j] = new;
                max_change = max_change.max(change.abs() * a.sqrt().max(1e-8));
            }
        }
        if max_change < 1e-14 {
            break;
        }
    }
    candidate
}

/// Weighted least-squares step on the diagonal approximation of the
/// likelihood curvature in the linear predictor, used for wide matrices.
fn diagonal_step(
    beta: &[f64],
    grad: &[f64],
    weight: &[f64],
    columns: &[Vec<f64>],
    n: f64,
    l1: f64,
    l2: f64,
) -> Vec<f64> {
    // working residual u = z - X beta, with z = eta + grad / weight
    let mut resid: Vec<f64> = grad
        .iter()
        .zip(weight)
        .map(|(g, w)| if *w > 1e-300 { g / w } else { 0.0 })
        .collect();
    let curvature: Vec<f64> = columns
        .iter()
        .map(|col| col.iter().zip(weight).map(|(x, w)| w * x * x).sum::<f64>() / n)
        .collect();
    let mut candidate = beta.to_vec();
    for _sweep in 0..10_000 {
        let mut max_change: f64 = 0.0;
        for (j, col) in columns.iter().enumerate() {
            let denom = curvature[j] + l2;
            if denom <= 0.0 {
                continue;
            }
            let old = candidate[j];
            let c = col
                .iter()
                .zip(weight)
                .zip(&resid)
                .map(|((x, w), u)| w * x * u)
                .sum::<f64>()
                / n
                + curvature[j] * old;
            let new = soft_threshold(c, l1) / denom;
            let change = new - old;
            if change != 0.0 {
                for (u, x) in resid.iter_mut().zip(col) {
                    *u -= x * change;
                }
                candidate[j] = new;
                max_change = max_change.max(change.abs() * curvature[j].sqrt().max(1e-8));
            }
        }
        if max_change < 1e-13 {
            break;
        }
    }
    candidate
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Breslow estimator of the cumulative baseline hazard.
pub fn breslow_baseline(eta: &[f64], targets: &[SurvivalTarget]) -> StepFunction {
    if count_events(targets) == 0 {
        return StepFunction::constant(0.0);
    }
    let risk = RiskSets::new(targets);
    let mut sums = vec![0.0; risk.groups.len()];
    let mut acc = 0.0;
    for (g, &(start, end, _)) in risk.groups.iter().enumerate().rev() {
        for &k in &risk.order[start..end] {
            acc += eta[k].exp();
        }
        sums[g] = acc;
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut h = 0.0;
    for (g, &(start, _, d)) in risk.groups.iter().enumerate() {
        if d > 0 {
            h += d as f64 / sums[g];
            times.push(targets[risk.order[start]].time);
            values.push(h);
        }
    }
    StepFunction::new(times, values, 0.0).expect("group times are strictly increasing")
}
