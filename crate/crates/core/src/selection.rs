//! Penalty-level path, BIC choice of `lambda`, and hard thresholding.

use std::fmt::Write as _;

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::Support;
use crate::error::{Error, Result};
use crate::linalg::sup_norm;
use crate::objectives::ObjectiveModel;
use crate::penalty::{BicConstant, PenaltyConfig};
use crate::solver::{lla_fit_from, PenalizedFit, SolverOptions};

pub const DEFAULT_GRID_SIZE: usize = 50;
pub const DEFAULT_GRID_RATIO: f64 = 1e-3;

/// Log-spaced descending grid from the smallest `lambda` whose first
/// (lasso) step is identically zero, `max_j |dQ(0)/dtheta_j|`.
pub fn default_lambda_grid(model: &ObjectiveModel, size: usize, ratio: f64) -> Result<Vec<f64>> {
    if size < 2 {
        return Err(Error::InvalidConfig(format!("lambda grid needs at least 2 points, got {size}")));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidConfig(format!("lambda grid ratio must be in (0, 1), got {ratio}")));
    }
    let g = model.gradient(Array1::zeros(model.dim()).view());
    let lambda_max = sup_norm(g.view());
    if !(lambda_max > 0.0) || !lambda_max.is_finite() {
        return Err(Error::InvalidInput(format!(
            "gradient at the origin is {lambda_max}; the data carry no signal to penalize"
        )));
    }
    let last = (size - 1) as f64;
    Ok((0..size).map(|k| lambda_max * ratio.powf(k as f64 / last)).collect())
}

/// `n Q + C_n |S| log n`.
pub fn bic_value(n: usize, loss_value: f64, support_size: usize, c_n: f64) -> f64 {
    let n = n as f64;
    n * loss_value + c_n * support_size as f64 * n.ln()
}

pub fn bic_score(model: &ObjectiveModel, fit: &PenalizedFit, support_size: usize, cfg: &PenaltyConfig) -> f64 {
    bic_value(
        model.n_obs(),
        fit.loss_value,
        support_size,
        cfg.bic_constant.value(model.dim()),
    )
}

/// Index of the smallest score; ties go to the earliest entry.
pub fn argmin_first(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_nan() {
            continue;
        }
        if best.map_or(true, |b| s < scores[b]) {
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct PathPoint {
    pub lambda: f64,
    pub fit: PenalizedFit,
    pub support: Support,
}

#[derive(Debug, Clone)]
pub struct LambdaPath {
    pub points: Vec<PathPoint>,
    /// Grid values whose fit failed, with the reason.
    pub failures: Vec<(f64, String)>,
    pub n: usize,
    pub p: usize,
    /// Position in `points` of the BIC choice under the configured rule.
    pub selected: usize,
}

impl LambdaPath {
    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|pt| pt.lambda).collect()
    }

    pub fn scores(&self, rule: BicConstant) -> Vec<f64> {
        let c_n = rule.value(self.p);
        self.points
            .iter()
            .map(|pt| bic_value(self.n, pt.fit.loss_value, pt.support.len(), c_n))
            .collect()
    }

    /// Minimizer of the BIC under `rule`, preferring larger `lambda` on ties.
    pub fn best_index(&self, rule: BicConstant) -> usize {
        argmin_first(&self.scores(rule)).unwrap_or(0)
    }

    pub fn selected_point(&self) -> &PathPoint {
        &self.points[self.selected]
    }

    /// `lambda,support_size,q_value,bic` rows for `rule`.
    pub fn to_csv(&self, rule: BicConstant) -> String {
        let mut out = String::from("lambda,support_size,q_value,bic\n");
        for (pt, score) in self.points.iter().zip(self.scores(rule)) {
            let _ = writeln!(out, "{},{},{},{}", pt.lambda, pt.support.len(), pt.fit.loss_value, score);
        }
        out
    }
}

/// Warm-started fits along `grid`, which must be strictly descending.
pub fn fit_path(model: &ObjectiveModel, grid: &[f64], cfg: &PenaltyConfig, opts: &SolverOptions) -> Result<LambdaPath> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("lambda grid is empty".into()));
    }
    if grid.windows(2).any(|w| !(w[1] < w[0])) || grid.iter().any(|l| !(*l >= 0.0)) {
        return Err(Error::InvalidConfig("lambda grid must be nonnegative and strictly descending".into()));
    }
    cfg.with_lambda(grid[0]).validate()?;
    opts.validate()?;
    let p = model.dim();
    let mut points = Vec::with_capacity(grid.len());
    let mut failures = Vec::new();
    let mut warm = Array1::<f64>::zeros(p);
    for &lambda in grid {
        let at = cfg.with_lambda(lambda).with_tau(0.0);
        match lla_fit_from(model, &at, opts, Array1::zeros(p), warm.clone()) {
            Ok(fit) => {
                warm = fit.theta_tilde.clone();
                let support = Support::of_nonzero(fit.theta_tilde.view());
                points.push(PathPoint { lambda, fit, support });
            }
            Err(e) => failures.push((lambda, e.to_string())),
        }
    }
    if points.is_empty() {
        let detail = failures
            .iter()
            .map(|(l, e)| format!("lambda={l}: {e}"))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::PathFailed(detail));
    }
    let mut path = LambdaPath {
        points,
        failures,
        n: model.n_obs(),
        p,
        selected: 0,
    };
    path.selected = path.best_index(cfg.bic_constant);
    Ok(path)
}

/// Path over `grid` with the BIC choice under `cfg.bic_constant`.
pub fn select_lambda(
    model: &ObjectiveModel,
    grid: &[f64],
    cfg: &PenaltyConfig,
    opts: &SolverOptions,
) -> Result<LambdaPath> {
    fit_path(model, grid, cfg, opts)
}

/// `n^{-1/8} a lambda`.
pub fn default_tau(n: usize, cfg: &PenaltyConfig) -> f64 {
    (n as f64).powf(-0.125) * cfg.a * cfg.lambda
}

/// Zero every coordinate with magnitude below `tau`.
pub fn threshold(theta_tilde: ArrayView1<f64>, tau: f64) -> (Array1<f64>, Support) {
    let hat = theta_tilde.mapv(|v| if v.abs() >= tau { v } else { 0.0 });
    let support = Support::of_nonzero(hat.view());
    (hat, support)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauRule {
    /// `n^{-1/8} a lambda*` at the selected penalty level.
    Scaled,
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub lambda_star: f64,
    pub theta_tilde: Array1<f64>,
    pub theta_hat: Array1<f64>,
    pub support: Support,
    pub tau: f64,
    pub bic_constant: BicConstant,
}

/// Threshold the BIC choice of `path` under `rule`.
pub fn selection_from_path(path: &LambdaPath, rule: BicConstant, a: f64, tau: TauRule) -> SelectionResult {
    let point = &path.points[path.best_index(rule)];
    let tau = match tau {
        TauRule::Scaled => {
            let cfg = PenaltyConfig {
                a,
                lambda: point.lambda,
                ..PenaltyConfig::default()
            };
            default_tau(path.n, &cfg)
        }
        TauRule::Fixed(t) => t,
    };
    let (theta_hat, support) = threshold(point.fit.theta_tilde.view(), tau);
    SelectionResult {
        lambda_star: point.lambda,
        theta_tilde: point.fit.theta_tilde.clone(),
        theta_hat,
        support,
        tau,
        bic_constant: rule,
    }
}

/// Default grid, path, BIC choice and thresholding in one call.
pub fn select_support(
    model: &ObjectiveModel,
    cfg: &PenaltyConfig,
    tau: TauRule,
    opts: &SolverOptions,
) -> Result<(LambdaPath, SelectionResult)> {
    let grid = default_lambda_grid(model, DEFAULT_GRID_SIZE, DEFAULT_GRID_RATIO)?;
    let path = select_lambda(model, &grid, cfg, opts)?;
    let result = selection_from_path(&path, cfg.bic_constant, cfg.a, tau);
    Ok((path, result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::objectives::{linear_ls_objective, logit_objective};
    use crate::solver::check_kkt;
    use approx::assert_relative_eq;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, p), |_| rng.sample(StandardNormal))
    }

    #[test]
    fn grid_construction() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = gaussian(&mut rng, 50, 4);
        let y = Array1::from_shape_fn(50, |_| rng.sample::<f64, _>(StandardNormal));
        let data = Dataset::new(x.clone(), Some(y.clone())).unwrap();
        let m = linear_ls_objective(&data).unwrap();
        let grid = default_lambda_grid(&m, 2, 1e-3).unwrap();
        // the squared-error objective is not halved, hence the factor 2
        let xty = x.t().dot(&y) / 50.0;
        let expected = 2.0 * xty.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert_relative_eq!(grid[0], expected, max_relative = 1e-12);
        assert_relative_eq!(grid[1], expected * 1e-3, max_relative = 1e-12);
        let grid = default_lambda_grid(&m, 50, 1e-3).unwrap();
        assert!(grid.windows(2).all(|w| w[1] < w[0]));
        assert!(default_lambda_grid(&m, 1, 1e-3).is_err());

        let zero = Dataset::new(x, Some(Array1::zeros(50))).unwrap();
        assert!(default_lambda_grid(&linear_ls_objective(&zero).unwrap(), 10, 1e-3).is_err());
    }

    #[test]
    fn lambda_max_gives_empty_first_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = gaussian(&mut rng, 80, 5);
        let y = x.column(0).mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
        let m = logit_objective(&Dataset::new(x, Some(y)).unwrap()).unwrap();
        let grid = default_lambda_grid(&m, 10, 1e-2).unwrap();
        let path = fit_path(&m, &grid, &PenaltyConfig::default(), &SolverOptions::default()).unwrap();
        assert!(path.points[0].support.is_empty());
        assert!(!path.points.last().unwrap().support.is_empty());
    }

    #[test]
    fn bic_examples() {
        assert_relative_eq!(bic_value(1000, 0.30, 15, 1.0), 300.0 + 15.0 * 1000f64.ln(), epsilon = 1e-12);
        assert!((bic_value(1000, 0.30, 15, 1.0) - 403.62).abs() < 5e-3);
        assert_eq!(bic_value(200, 0.7, 0, 1.0), 200.0 * 0.7);
        assert!(bic_value(200, 0.7, 3, 1.0) < bic_value(200, 0.7, 4, 1.0));
        assert_eq!(argmin_first(&[3.0, 1.0, 1.0, 2.0]), Some(1));
        assert_eq!(argmin_first(&[f64::NAN, 2.0]), Some(1));
    }

    #[test]
    fn path_points_satisfy_kkt_and_single_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = gaussian(&mut rng, 200, 12);
        let beta = array![1.0, -1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let y = x.dot(&beta) + Array1::from_shape_fn(200, |_| rng.sample::<f64, _>(StandardNormal));
        let m = linear_ls_objective(&Dataset::new(x, Some(y)).unwrap()).unwrap();
        let grid = default_lambda_grid(&m, 20, 1e-3).unwrap();
        let path = fit_path(&m, &grid, &PenaltyConfig::default(), &SolverOptions::default()).unwrap();
        for pt in &path.points {
            assert!(check_kkt(&m, pt.fit.theta_tilde.view(), pt.fit.weights.view()) <= 1e-5);
        }
        assert!(path.scores(BicConstant::One).iter().all(|s| s.is_finite()));
        let sel = selection_from_path(&path, BicConstant::One, 3.7, TauRule::Scaled);
        assert!(sel.support.contains(0) && sel.support.contains(1));
        assert!(sel.support.len() <= 5);
        assert!(sel.theta_hat.iter().all(|v| *v == 0.0 || v.abs() >= sel.tau));

        let single = fit_path(&m, &[0.3], &PenaltyConfig::default(), &SolverOptions::default()).unwrap();
        assert_eq!(single.selected, 0);
        assert_eq!(single.selected_point().lambda, 0.3);
        assert!(fit_path(&m, &[0.1, 0.3], &PenaltyConfig::default(), &SolverOptions::default()).is_err());
        let csv = path.to_csv(BicConstant::One);
        assert_eq!(csv.lines().count(), 21);
        assert!(csv.starts_with("lambda,support_size,q_value,bic"));
    }

    #[test]
    fn pure_noise_selects_little() {
        let mut small = 0;
        for rep in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + rep);
            let x = gaussian(&mut rng, 100, 10);
            let y = Array1::from_shape_fn(100, |_| rng.sample::<f64, _>(StandardNormal));
            let m = linear_ls_objective(&Dataset::new(x, Some(y)).unwrap()).unwrap();
            let (_, sel) =
                select_support(&m, &PenaltyConfig::default(), TauRule::Scaled, &SolverOptions::default()).unwrap();
            if sel.support.len() <= 2 {
                small += 1;
            }
        }
        assert!(small >= 18, "{small} of 20");
    }

    #[test]
    fn tau_rule() {
        let cfg = PenaltyConfig::new(3.7, 0.1).unwrap();
        assert!((default_tau(1000, &cfg) - 0.156034).abs() < 1e-5);
        assert_relative_eq!(default_tau(1000, &cfg), 0.37 * 1000f64.powf(-0.125), epsilon = 1e-15);
        assert_relative_eq!(default_tau(1, &cfg), 0.37, epsilon = 1e-15);
        let double = PenaltyConfig::new(3.7, 0.2).unwrap();
        assert_relative_eq!(default_tau(1000, &double), 2.0 * default_tau(1000, &cfg), epsilon = 1e-15);
    }

    #[test]
    fn thresholding() {
        let t = array![0.5, 0.05, -0.3];
        let (hat, s) = threshold(t.view(), 0.1);
        assert_eq!(hat, array![0.5, 0.0, -0.3]);
        assert_eq!(s.indices(), &[0, 2]);
        let (same, all) = threshold(t.view(), 0.0);
        assert_eq!(same, t);
        assert_eq!(all.len(), 3);
        let (again, s2) = threshold(hat.view(), 0.1);
        assert_eq!(again, hat);
        assert_eq!(s2, s);
    }
}
