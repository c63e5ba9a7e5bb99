//! SCAD-penalized minimization by local linear approximation.
//!
//! Each outer step replaces the penalty by its tangent at the current iterate,
//! which leaves a weighted-L1 problem
//!
//! ```text
//! minimize Q(theta) + sum_j w_j |theta_j|,   w_j = lambda * p'(|theta_j^t|)
//! ```
//!
//! solved by coordinate descent. Smooth but non-quadratic objectives are
//! handled by repeatedly minimizing the penalized second-order expansion at the
//! current point, with a backtracking step on the true penalized objective.

pub mod cd;

use ndarray::{Array1, Array2, ArrayView1, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_ridge, sup_norm};
use crate::objectives::{IndexLoss, ObjectiveModel};
use crate::penalty::{lla_weight, penalty_total, PenaltyConfig};
use cd::{active_set_cycle, CdState, DenseQuadratic, IndexQuadratic};

pub use cd::{soft_threshold, CoordinateModel, CycleOutcome, CURVATURE_FLOOR};

/// Active passes between forced full passes.
const FULL_PASS_INTERVAL: usize = 50;
const MAX_RECENTERINGS: usize = 25;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Initializer {
    Zero,
    Warm(Vec<f64>),
    /// Minimizer of `Q` plus a small ridge term.
    Ridge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_lla_iters: usize,
    pub max_cd_passes: usize,
    /// Largest coefficient change per pass that still counts as converged.
    pub cd_tolerance: f64,
    /// Relative change of the penalized objective between recenterings.
    pub quad_approx_tolerance: f64,
    pub kkt_tolerance: f64,
    pub initializer: Initializer,
    /// Warn when the L1 norm of a fit exceeds this.
    pub l1_cap: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_lla_iters: 10,
            max_cd_passes: 1000,
            cd_tolerance: 1e-7,
            quad_approx_tolerance: 1e-8,
            kkt_tolerance: 1e-5,
            initializer: Initializer::Zero,
            l1_cap: 1e6,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_lla_iters < 1 || self.max_cd_passes < 1 {
            return Err(Error::InvalidConfig("solver iteration caps must be at least 1".into()));
        }
        for (name, v) in [
            ("cd_tolerance", self.cd_tolerance),
            ("quad_approx_tolerance", self.quad_approx_tolerance),
            ("kkt_tolerance", self.kkt_tolerance),
            ("l1_cap", self.l1_cap),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedFit {
    pub theta_tilde: Array1<f64>,
    /// `Q(theta) + p_lambda(theta)` at the returned point.
    pub objective_value: f64,
    /// `Q(theta)` alone.
    pub loss_value: f64,
    pub lla_iters_used: usize,
    pub converged: bool,
    pub kkt_max_violation: f64,
    /// Weights of the last weighted-L1 problem, which `theta_tilde` solves.
    pub weights: Array1<f64>,
    /// Penalized objective at the initializer and after every outer step.
    pub objective_trace: Vec<f64>,
    pub curvature_floored: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SubproblemFit {
    pub theta: Array1<f64>,
    pub passes: usize,
    pub recenterings: usize,
    pub converged: bool,
    pub curvature_floored: bool,
    pub kkt_max_violation: f64,
}

/// Largest violation of the weighted-L1 optimality conditions at `theta`.
pub fn check_kkt(model: &ObjectiveModel, theta: ArrayView1<f64>, weights: ArrayView1<f64>) -> f64 {
    kkt_from_gradient(model.gradient(theta).view(), theta, weights)
}

fn kkt_from_gradient(grad: ArrayView1<f64>, theta: ArrayView1<f64>, weights: ArrayView1<f64>) -> f64 {
    let mut worst = 0.0f64;
    Zip::from(grad).and(theta).and(weights).for_each(|&g, &t, &w| {
        let v = if t == 0.0 {
            (g.abs() - w).max(0.0)
        } else {
            (g + w * t.signum()).abs()
        };
        worst = worst.max(if v.is_nan() { f64::INFINITY } else { v });
    });
    worst
}

fn weighted_l1(theta: ArrayView1<f64>, weights: ArrayView1<f64>) -> f64 {
    theta
        .iter()
        .zip(weights.iter())
        .map(|(t, w)| if *t == 0.0 { 0.0 } else { w * t.abs() })
        .sum()
}

fn check_weights(model: &ObjectiveModel, weights: ArrayView1<f64>) -> Result<()> {
    if weights.len() != model.dim() {
        return Err(Error::InvalidInput(format!(
            "{} weights for an objective of dimension {}",
            weights.len(),
            model.dim()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidInput("penalty weights must be nonnegative".into()));
    }
    Ok(())
}

/// Minimize `Q(theta) + sum_j w_j |theta_j|` starting from `warm_start`.
pub fn weighted_l1_subproblem(
    model: &ObjectiveModel,
    weights: ArrayView1<f64>,
    warm_start: ArrayView1<f64>,
    opts: &SolverOptions,
) -> Result<SubproblemFit> {
    check_weights(model, weights)?;
    if warm_start.len() != model.dim() {
        return Err(Error::InvalidInput("warm start has the wrong length".into()));
    }
    match model.as_index() {
        Some(index) if index.loss == IndexLoss::Squared => {
            let n = index.n() as f64;
            let eta = index.eta(warm_start);
            let u = (&index.y - &eta) * (2.0 / n);
            let d = Array1::from_elem(index.n(), 2.0 / n);
            let quad = IndexQuadratic::new(index.xt(), d, u, warm_start.to_owned());
            let mut state = CdState::new(quad, weights, opts.cd_tolerance, opts.max_cd_passes);
            let outcome = active_set_cycle(&mut state, FULL_PASS_INTERVAL);
            let floored = state.model.floored;
            let theta = state.model.into_theta();
            let kkt = check_kkt(model, theta.view(), weights);
            Ok(SubproblemFit {
                theta,
                passes: outcome.passes,
                recenterings: 1,
                converged: outcome.converged && kkt <= opts.kkt_tolerance,
                curvature_floored: floored,
                kkt_max_violation: kkt,
            })
        }
        _ => recentered_subproblem(model, weights, warm_start, opts),
    }
}

/// Penalized second-order expansions around successive centers.
fn recentered_subproblem(
    model: &ObjectiveModel,
    weights: ArrayView1<f64>,
    warm_start: ArrayView1<f64>,
    opts: &SolverOptions,
) -> Result<SubproblemFit> {
    let penalized = |t: ArrayView1<f64>| model.value(t) + weighted_l1(t, weights);
    let mut center = warm_start.to_owned();
    let mut f_center = penalized(center.view());
    if !f_center.is_finite() {
        return Err(Error::NonFinite {
            context: format!("the subproblem start {center}"),
        });
    }
    let mut grad = model.gradient(center.view());
    let mut kkt = kkt_from_gradient(grad.view(), center.view(), weights);
    let (mut passes, mut recenterings, mut floored) = (0, 0, false);
    let mut cd_converged = true;

    while recenterings < MAX_RECENTERINGS {
        recenterings += 1;
        let (proposal, outcome, fl) = quadratic_step(model, &center, &grad, weights, opts);
        passes += outcome.passes;
        cd_converged = outcome.converged;
        floored |= fl;

        let direction = &proposal - &center;
        if sup_norm(direction.view()) == 0.0 {
            break;
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial = &center + &(&direction * step);
            let f = penalized(trial.view());
            if f.is_finite() && f <= f_center {
                accepted = Some((trial, f));
                break;
            }
            step *= 0.5;
        }
        let Some((next, f_next)) = accepted else {
            break;
        };
        let rel_change = (f_center - f_next).abs() / f_center.abs().max(1.0);
        let moved = sup_norm((&next - &center).view());
        center = next;
        f_center = f_next;
        grad = model.gradient(center.view());
        kkt = kkt_from_gradient(grad.view(), center.view(), weights);
        if (rel_change < opts.quad_approx_tolerance && kkt <= opts.kkt_tolerance) || moved < opts.cd_tolerance {
            break;
        }
    }
    Ok(SubproblemFit {
        theta: center,
        passes,
        recenterings,
        converged: cd_converged && kkt <= opts.kkt_tolerance,
        curvature_floored: floored,
        kkt_max_violation: kkt,
    })
}

/// Minimizer of the penalized quadratic expansion of `Q` at `center`.
fn quadratic_step(
    model: &ObjectiveModel,
    center: &Array1<f64>,
    grad: &Array1<f64>,
    weights: ArrayView1<f64>,
    opts: &SolverOptions,
) -> (Array1<f64>, CycleOutcome, bool) {
    match model.as_index() {
        Some(index) => {
            let n = index.n() as f64;
            let eta = index.eta(center.view());
            let d = index.index_curvature(eta.view()) / n;
            let u = index.index_derivative(eta.view()) / -n;
            let quad = IndexQuadratic::new(index.xt(), d, u, center.clone());
            let mut state = CdState::new(quad, weights, opts.cd_tolerance, opts.max_cd_passes);
            let outcome = active_set_cycle(&mut state, FULL_PASS_INTERVAL);
            let floored = state.model.floored;
            (state.model.into_theta(), outcome, floored)
        }
        None => {
            let h = model.hessian(center.view());
            let quad = DenseQuadratic::new(h, grad.clone(), center.clone());
            let mut state = CdState::new(quad, weights, opts.cd_tolerance, opts.max_cd_passes);
            let outcome = active_set_cycle(&mut state, FULL_PASS_INTERVAL);
            let floored = state.model.floored;
            (state.model.into_theta(), outcome, floored)
        }
    }
}

/// Damped Newton iterations on `Q(theta) + (kappa / 2) |theta|^2`.
fn ridge_start(model: &ObjectiveModel) -> Result<Array1<f64>> {
    let k = model.dim();
    let mut theta = Array1::<f64>::zeros(k);
    let h0 = model.hessian(theta.view());
    let kappa = 1e-2 * (h0.diag().iter().map(|v| v.abs()).sum::<f64>() / k as f64).max(1e-8);
    let objective = |t: &Array1<f64>| model.value(t.view()) + 0.5 * kappa * t.dot(t);
    let mut f = objective(&theta);
    for _ in 0..50 {
        let g = model.gradient(theta.view()) + &theta * kappa;
        let mut h: Array2<f64> = model.hessian(theta.view());
        for j in 0..k {
            h[[j, j]] += kappa;
        }
        let (chol, _) = cholesky_with_ridge(h.view())?;
        let direction = -chol.solve(g.view());
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..MAX_HALVINGS {
            let trial = &theta + &(&direction * step);
            let ft = objective(&trial);
            if ft.is_finite() && ft <= f {
                theta = trial;
                f = ft;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved || sup_norm(direction.view()) * step < 1e-10 {
            break;
        }
    }
    Ok(theta)
}

fn initial_point(model: &ObjectiveModel, opts: &SolverOptions) -> Result<Array1<f64>> {
    match &opts.initializer {
        Initializer::Zero => Ok(Array1::zeros(model.dim())),
        Initializer::Warm(t) => {
            if t.len() != model.dim() {
                return Err(Error::InvalidInput(format!(
                    "warm start of length {} for an objective of dimension {}",
                    t.len(),
                    model.dim()
                )));
            }
            Ok(Array1::from_vec(t.clone()))
        }
        Initializer::Ridge => ridge_start(model),
    }
}

/// SCAD-penalized fit by local linear approximation from the configured
/// initializer.
pub fn lla_fit(model: &ObjectiveModel, cfg: &PenaltyConfig, opts: &SolverOptions) -> Result<PenalizedFit> {
    cfg.validate()?;
    opts.validate()?;
    let init = initial_point(model, opts)?;
    lla_fit_from(model, cfg, opts, init.clone(), init)
}

/// Local linear approximation whose first weights come from `origin` while
/// coordinate descent starts at `cd_start`. Path fits use a zero origin with
/// the previous solution as `cd_start`.
pub(crate) fn lla_fit_from(
    model: &ObjectiveModel,
    cfg: &PenaltyConfig,
    opts: &SolverOptions,
    origin: Array1<f64>,
    cd_start: Array1<f64>,
) -> Result<PenalizedFit> {
    let penalized = |t: ArrayView1<f64>| model.value(t) + penalty_total(t, cfg);
    let start_value = model.try_value(origin.view())?;
    let mut trace = vec![start_value + penalty_total(origin.view(), cfg)];
    let mut current = origin;
    let mut start = cd_start;
    let mut weights: Option<Array1<f64>> = None;
    let mut stabilized = false;
    let mut floored = false;
    let mut sub_converged = true;
    let mut iters = 0;

    while iters < opts.max_lla_iters {
        let w = current.mapv(|v| lla_weight(v.abs(), cfg));
        if weights.as_ref() == Some(&w) {
            stabilized = true;
            break;
        }
        iters += 1;
        let sub = weighted_l1_subproblem(model, w.view(), start.view(), opts)?;
        floored |= sub.curvature_floored;
        sub_converged = sub.converged;
        let change = sup_norm((&sub.theta - &current).view());
        current = sub.theta;
        start = current.clone();
        weights = Some(w);
        trace.push(penalized(current.view()));
        if change < opts.cd_tolerance {
            stabilized = true;
            break;
        }
    }

    let weights = weights.unwrap_or_else(|| current.mapv(|v| lla_weight(v.abs(), cfg)));
    let loss_value = model.value(current.view());
    if !loss_value.is_finite() {
        return Err(Error::NonFinite {
            context: format!("the penalized fit at lambda = {}", cfg.lambda),
        });
    }
    let kkt = check_kkt(model, current.view(), weights.view());
    let mut warnings = Vec::new();
    let l1: f64 = current.iter().map(|v| v.abs()).sum();
    if l1 > opts.l1_cap {
        warnings.push(format!(
            "L1 norm of the estimate {l1:.3e} exceeds the cap {:.3e}; the objective may be unbounded",
            opts.l1_cap
        ));
    }
    if floored {
        warnings.push(format!(
            "curvature floored at {CURVATURE_FLOOR:e} in the quadratic approximation"
        ));
    }
    Ok(PenalizedFit {
        objective_value: loss_value + penalty_total(current.view(), cfg),
        loss_value,
        theta_tilde: current,
        lla_iters_used: iters,
        converged: stabilized && sub_converged && kkt <= opts.kkt_tolerance,
        kkt_max_violation: kkt,
        weights,
        objective_trace: trace,
        curvature_floored: floored,
        warnings,
    })
}

#[cfg(test)]
mod tests;
