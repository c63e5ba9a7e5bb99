//! The SCAD penalty in closed form.
//!
//! The total penalty is `lambda * sum_j p(|theta_j|)` where `p` is defined through
//! its derivative
//!
//! ```text
//! p'(v) = 1                                  for v <= lambda
//!       = (a*lambda - v)_+ / ((a - 1)*lambda)  for v >  lambda
//! ```
//!
//! so the per-coordinate contribution `lambda * p(v)` is linear near zero,
//! quadratic in the taper and flat (`lambda^2 (a + 1) / 2`) past `a * lambda`.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Concavity used throughout unless configured otherwise.
pub const DEFAULT_CONCAVITY: f64 = 3.7;

/// Constant multiplying `|S| log n` in the BIC score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BicConstant {
    /// `C_n = 1`.
    One,
    /// `C_n = log log p`, with `C_n = 1` when `p <= e`.
    LogLogP,
}

impl BicConstant {
    pub fn value(self, p: usize) -> f64 {
        match self {
            BicConstant::One => 1.0,
            BicConstant::LogLogP => {
                let p = p as f64;
                if p <= std::f64::consts::E {
                    1.0
                } else {
                    p.ln().ln()
                }
            }
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BicConstant::One => "one",
            BicConstant::LogLogP => "loglogp",
        }
    }
}

impl std::str::FromStr for BicConstant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "one" | "1" => Ok(BicConstant::One),
            "loglogp" | "log-log-p" => Ok(BicConstant::LogLogP),
            other => Err(Error::InvalidConfig(format!("unknown BIC constant rule '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    /// SCAD concavity, must exceed 2.
    pub a: f64,
    pub lambda: f64,
    /// Hard-threshold level applied after the penalized fit.
    pub tau: f64,
    pub bic_constant: BicConstant,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            a: DEFAULT_CONCAVITY,
            lambda: 0.0,
            tau: 0.0,
            bic_constant: BicConstant::One,
        }
    }
}

impl PenaltyConfig {
    pub fn new(a: f64, lambda: f64) -> Result<Self> {
        let cfg = Self {
            a,
            lambda,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }

    pub fn with_tau(self, tau: f64) -> Self {
        Self { tau, ..self }
    }

    pub fn with_bic_constant(self, bic_constant: BicConstant) -> Self {
        Self {
            bic_constant,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 2.0) || !self.a.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "SCAD concavity must be finite and > 2, got {}",
                self.a
            )));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "penalty level must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "threshold must be finite and >= 0, got {}",
                self.tau
            )));
        }
        if self.lambda > 0.0 && self.tau > 0.0 && self.tau >= self.a * self.lambda {
            return Err(Error::InvalidConfig(format!(
                "threshold {} must be below a*lambda = {}",
                self.tau,
                self.a * self.lambda
            )));
        }
        Ok(())
    }

    /// Soft validation: a threshold that is valid but not small relative to
    /// `lambda` defeats the purpose of thresholding.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.lambda > 0.0 && self.tau > self.lambda {
            out.push(format!(
                "threshold {} exceeds the penalty level {}; expected tau << lambda",
                self.tau, self.lambda
            ));
        }
        out
    }
}

/// Slope of the normalized penalty at magnitude `v`, in `[0, 1]`.
///
/// Ties at `v == lambda` take the first branch.
pub fn scad_derivative(v: f64, cfg: &PenaltyConfig) -> f64 {
    assert!(v >= 0.0, "scad_derivative takes a magnitude, got {v}");
    let lambda = cfg.lambda;
    if lambda == 0.0 {
        return 0.0;
    }
    if v <= lambda {
        1.0
    } else {
        (cfg.a * lambda - v).max(0.0) / ((cfg.a - 1.0) * lambda)
    }
}

/// Penalty contribution `lambda * p(v)` of one coordinate with magnitude `v`.
pub fn scad_value(v: f64, cfg: &PenaltyConfig) -> f64 {
    assert!(v >= 0.0, "scad_value takes a magnitude, got {v}");
    let (a, lambda) = (cfg.a, cfg.lambda);
    if lambda == 0.0 {
        return 0.0;
    }
    if v <= lambda {
        lambda * v
    } else if v <= a * lambda {
        (2.0 * a * lambda * v - v * v - lambda * lambda) / (2.0 * (a - 1.0))
    } else {
        lambda * lambda * (a + 1.0) / 2.0
    }
}

/// Per-coordinate weight `lambda * p'(v)` used by the local linear approximation.
pub fn lla_weight(v: f64, cfg: &PenaltyConfig) -> f64 {
    cfg.lambda * scad_derivative(v, cfg)
}

pub fn penalty_total(theta: ArrayView1<f64>, cfg: &PenaltyConfig) -> f64 {
    theta.iter().map(|t| scad_value(t.abs(), cfg)).sum()
}
