//! Unpenalized refits on a fixed support, standard errors, t statistics and
//! first-order asymptotic intervals.
//!
//! Every interval is the set of hypothesized values `theta0` whose studentized
//! statistic `t = (theta_hat - theta0) / se` falls in an acceptance region
//! `[lo, hi]`, so the interval is `[theta_hat - hi se, theta_hat - lo se]`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::Support;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_ridge, sup_norm, Cholesky};
use crate::objectives::{ObjectiveKind, ObjectiveModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeMethod {
    InverseHessian,
    OuterProduct,
    Sandwich,
}

impl SeMethod {
    /// Inverse Hessian for likelihoods, sandwich otherwise.
    pub fn default_for(kind: ObjectiveKind) -> Self {
        if kind.is_likelihood() {
            SeMethod::InverseHessian
        } else {
            SeMethod::Sandwich
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SeMethod::InverseHessian => "inverse-hessian",
            SeMethod::OuterProduct => "outer-product",
            SeMethod::Sandwich => "sandwich",
        }
    }
}

impl FromStr for SeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "inverse-hessian" | "hessian" => Ok(SeMethod::InverseHessian),
            "outer-product" | "opg" => Ok(SeMethod::OuterProduct),
            "sandwich" => Ok(SeMethod::Sandwich),
            other => Err(Error::InvalidConfig(format!("unknown standard error method '{other}'"))),
        }
    }
}

impl fmt::Display for SeMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalKind {
    LowerOneSided,
    UpperOneSided,
    Symmetric,
    EqualTailed,
}

impl IntervalKind {
    pub const ALL: [IntervalKind; 4] = [
        IntervalKind::LowerOneSided,
        IntervalKind::UpperOneSided,
        IntervalKind::Symmetric,
        IntervalKind::EqualTailed,
    ];

    pub fn label(self) -> &'static str {
        match self {
            IntervalKind::LowerOneSided => "lower-one-sided",
            IntervalKind::UpperOneSided => "upper-one-sided",
            IntervalKind::Symmetric => "symmetric",
            IntervalKind::EqualTailed => "equal-tailed",
        }
    }

    /// Row label in coverage tables.
    pub fn table_label(self) -> &'static str {
        match self {
            IntervalKind::LowerOneSided => "Lower 1-Sided",
            IntervalKind::UpperOneSided => "Upper 1-Sided",
            IntervalKind::Symmetric => "Symmetrical",
            IntervalKind::EqualTailed => "Equal-Tailed",
        }
    }
}

impl FromStr for IntervalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "lower-one-sided" | "lower" => Ok(IntervalKind::LowerOneSided),
            "upper-one-sided" | "upper" => Ok(IntervalKind::UpperOneSided),
            "symmetric" | "symmetrical" => Ok(IntervalKind::Symmetric),
            "equal-tailed" => Ok(IntervalKind::EqualTailed),
            other => Err(Error::InvalidConfig(format!("unknown interval kind '{other}'"))),
        }
    }
}

/// Closed interval, possibly unbounded on one side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: f64| {
            if v == f64::INFINITY {
                "inf".to_string()
            } else if v == f64::NEG_INFINITY {
                "-inf".to_string()
            } else {
                format!("{v:.2}")
            }
        };
        write!(f, "({}, {})", show(self.lo), show(self.hi))
    }
}

/// Acceptance region `[lo, hi]` for the signed statistic `(theta_hat - theta0) / se`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRegion {
    pub lo: f64,
    pub hi: f64,
}

impl AcceptanceRegion {
    /// Strictly outside the region; a statistic on the boundary is not rejected.
    pub fn rejects(&self, signed_t: f64) -> bool {
        signed_t < self.lo || signed_t > self.hi
    }

    pub fn interval(&self, theta_hat: f64, se: f64) -> Interval {
        let lo = if self.hi == f64::INFINITY {
            f64::NEG_INFINITY
        } else {
            theta_hat - self.hi * se
        };
        let hi = if self.lo == f64::NEG_INFINITY {
            f64::INFINITY
        } else {
            theta_hat - self.lo * se
        };
        Interval { lo, hi }
    }
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("level alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Standard normal quantile.
pub fn normal_quantile(q: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(q)
}

/// First-order asymptotic acceptance region.
pub fn asymptotic_region(kind: IntervalKind, alpha: f64) -> Result<AcceptanceRegion> {
    check_alpha(alpha)?;
    Ok(match kind {
        IntervalKind::Symmetric | IntervalKind::EqualTailed => {
            let z = normal_quantile(1.0 - alpha / 2.0);
            AcceptanceRegion { lo: -z, hi: z }
        }
        IntervalKind::LowerOneSided => AcceptanceRegion {
            lo: -normal_quantile(1.0 - alpha),
            hi: f64::INFINITY,
        },
        IntervalKind::UpperOneSided => AcceptanceRegion {
            lo: f64::NEG_INFINITY,
            hi: normal_quantile(1.0 - alpha),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefitOptions {
    pub max_iters: usize,
    /// Sup-norm of the restricted gradient at which Newton stops.
    pub gradient_tolerance: f64,
    pub max_halvings: usize,
    /// `None` picks [`SeMethod::default_for`] the objective.
    pub se_method: Option<SeMethod>,
}

impl Default for RefitOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            gradient_tolerance: 1e-8,
            max_halvings: 50,
            se_method: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RefitResult {
    pub support: Support,
    /// Estimates over the support, in support order.
    pub theta_po: Array1<f64>,
    pub se: Array1<f64>,
    pub se_method: SeMethod,
    /// Condition estimate of the restricted Hessian at the solution.
    pub hessian_condition: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl RefitResult {
    /// Estimates on the full coordinate space, zero off the support.
    pub fn theta_full(&self) -> Array1<f64> {
        self.support.expand(self.theta_po.view())
    }

    /// Position of coordinate `coef` within the support.
    pub fn position(&self, coef: usize) -> Result<usize> {
        self.support.position(coef).ok_or(Error::NotSelected(coef))
    }

    pub fn estimate(&self, coef: usize) -> Result<f64> {
        Ok(self.theta_po[self.position(coef)?])
    }

    pub fn std_error(&self, coef: usize) -> Result<f64> {
        Ok(self.se[self.position(coef)?])
    }
}

/// Newton minimization with backtracking; returns the point, iteration count
/// and final gradient norm.
pub fn newton_minimize(
    model: &ObjectiveModel,
    start: ArrayView1<f64>,
    opts: &RefitOptions,
) -> Result<(Array1<f64>, usize, f64)> {
    let mut theta = start.to_owned();
    let mut f = model.try_value(theta.view())?;
    let mut grad = model.gradient(theta.view());
    let mut gnorm = sup_norm(grad.view());
    let mut iters = 0;
    while gnorm >= opts.gradient_tolerance {
        if !gnorm.is_finite() {
            return Err(Error::NonFinite {
                context: format!("the refit gradient after {iters} Newton steps"),
            });
        }
        if iters >= opts.max_iters {
            return Err(Error::NonConvergence {
                method: "Newton refit",
                iterations: iters,
                gradient_norm: gnorm,
            });
        }
        iters += 1;
        let h = model.hessian(theta.view());
        let (chol, _) = cholesky_with_ridge(h.view())?;
        let direction = -chol.solve(grad.view());
        let slope = grad.dot(&direction);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial = &theta + &(&direction * step);
            let ft = model.value(trial.view());
            if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                theta = trial;
                f = ft;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(Error::NonConvergence {
                method: "Newton refit line search",
                iterations: iters,
                gradient_norm: gnorm,
            });
        }
        grad = model.gradient(theta.view());
        gnorm = sup_norm(grad.view());
    }
    Ok((theta, iters, gnorm))
}

fn factor_or_singular(m: &Array2<f64>, what: &str) -> Result<Cholesky> {
    Cholesky::factor(m.view()).map_err(|_| {
        let condition = cholesky_with_ridge(m.view())
            .map(|(c, _)| c.condition_estimate())
            .unwrap_or(f64::INFINITY);
        Error::Singular {
            context: format!("{what} of the restricted objective is singular"),
            condition,
        }
    })
}

/// Standard errors at `theta` for the (already restricted) objective.
///
/// Returns the standard errors and the condition estimate of the Hessian.
pub fn standard_errors(model: &ObjectiveModel, theta: ArrayView1<f64>, method: SeMethod) -> Result<(Array1<f64>, f64)> {
    let n = model.n_obs() as f64;
    let outer = || -> Result<Array2<f64>> {
        let s = model.score_contributions(theta)?;
        Ok(s.t().dot(&s) / n)
    };
    let (var, condition) = match method {
        SeMethod::InverseHessian => {
            let chol = factor_or_singular(&model.hessian(theta), "Hessian")?;
            (chol.inverse().diag().to_owned(), chol.condition_estimate())
        }
        SeMethod::OuterProduct => {
            if !model.kind().is_likelihood() {
                return Err(Error::Unsupported(
                    "outer-product standard errors outside likelihood objectives".into(),
                ));
            }
            let chol = factor_or_singular(&outer()?, "outer product of scores")?;
            (chol.inverse().diag().to_owned(), chol.condition_estimate())
        }
        SeMethod::Sandwich => {
            let chol = factor_or_singular(&model.hessian(theta), "Hessian")?;
            let hinv = chol.inverse();
            let sandwich = hinv.dot(&outer()?).dot(&hinv);
            (sandwich.diag().to_owned(), chol.condition_estimate())
        }
    };
    let se = var.mapv(|v| (v / n).sqrt());
    if se.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::Singular {
            context: format!("nonpositive or non-finite variance estimate ({method})"),
            condition,
        });
    }
    Ok((se, condition))
}

/// Unpenalized fit of `model` restricted to `support`, with standard errors.
pub fn refit(model: &ObjectiveModel, support: &Support, opts: &RefitOptions) -> Result<RefitResult> {
    refit_from(model, support, None, opts)
}

/// Like [`refit`] but starting Newton at `warm` (coordinates over the support).
pub fn refit_from(
    model: &ObjectiveModel,
    support: &Support,
    warm: Option<ArrayView1<f64>>,
    opts: &RefitOptions,
) -> Result<RefitResult> {
    if support.is_empty() {
        return Err(Error::EmptySupport(
            "no coefficient survived thresholding; try a smaller threshold".into(),
        ));
    }
    let restricted = model.restrict(support)?;
    refit_restricted(&restricted, support, warm, opts)
}

/// Refit of an objective that is already restricted to `support`.
pub fn refit_restricted(
    restricted: &ObjectiveModel,
    support: &Support,
    warm: Option<ArrayView1<f64>>,
    opts: &RefitOptions,
) -> Result<RefitResult> {
    let start = match warm {
        Some(w) => {
            if w.len() != support.len() {
                return Err(Error::InvalidInput("refit warm start does not match the support".into()));
            }
            w.to_owned()
        }
        None => Array1::zeros(support.len()),
    };
    let (theta, iterations, gradient_norm) = newton_minimize(restricted, start.view(), opts)?;
    let method = opts.se_method.unwrap_or(SeMethod::default_for(restricted.kind()));
    let (se, hessian_condition) = standard_errors(restricted, theta.view(), method)?;
    Ok(RefitResult {
        support: support.clone(),
        theta_po: theta,
        se,
        se_method: method,
        hessian_condition,
        iterations,
        gradient_norm,
    })
}

/// `|theta_hat - theta0| / se` for symmetric intervals, signed otherwise.
pub fn t_statistic(refit: &RefitResult, coef: usize, theta0: f64, kind: IntervalKind) -> Result<f64> {
    let k = refit.position(coef)?;
    let t = (refit.theta_po[k] - theta0) / refit.se[k];
    Ok(match kind {
        IntervalKind::Symmetric => t.abs(),
        _ => t,
    })
}

pub fn asymptotic_interval(refit: &RefitResult, coef: usize, alpha: f64, kind: IntervalKind) -> Result<Interval> {
    let k = refit.position(coef)?;
    Ok(asymptotic_region(kind, alpha)?.interval(refit.theta_po[k], refit.se[k]))
}
