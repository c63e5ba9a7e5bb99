//! Config file schema. One TOML file may hold a `[generate]`, `[fit]` and
//! `[simulate]` table; each command reads its own. Command-line flags override.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use scadboot::montecarlo::{Dgp, LogitDgpConfig, PRule, SmallCoefDgpConfig, DEFAULT_RHO};
use scadboot::{BicConstant, IntervalKind, SeMethod};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub generate: GenerateConfig,
    pub fit: FitConfig,
    pub simulate: SimulateConfig,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<ConfigFile> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}

/// Dimension as a count (`p = 200`) or a rule of `n` (`p = "n/10"`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Dimension {
    Count(usize),
    Rule(String),
}

impl Dimension {
    pub fn rule(&self) -> Result<PRule> {
        Ok(match self {
            Dimension::Count(p) => PRule::Explicit(*p),
            Dimension::Rule(s) => s.parse()?,
        })
    }
}

/// Small coefficients placed after the large ones, as in the small-parameter design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallCoefSpec {
    /// Penalty level at which the threshold `tau` is evaluated.
    pub reference_lambda: f64,
    /// Explicit values; otherwise `count` values of size `fraction * tau` with alternating signs.
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default = "default_small_count")]
    pub count: usize,
    #[serde(default = "default_small_fraction")]
    pub fraction: f64,
}

fn default_small_count() -> usize {
    5
}

fn default_small_fraction() -> f64 {
    0.125
}

/// Logit design: AR(1) Gaussian covariates and sparse coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignConfig {
    pub n: usize,
    pub p: Dimension,
    pub rho: f64,
    /// Leading coefficients, zero-padded to `p`. Defaults to the standard pattern.
    pub theta0: Option<Vec<f64>>,
    pub small: Option<SmallCoefSpec>,
}

impl DesignConfig {
    pub fn dgp(&self, seed: u64) -> Result<Dgp> {
        let mut base = LogitDgpConfig::new(self.n, self.p.rule()?, seed);
        base.rho = self.rho;
        if let Some(t) = &self.theta0 {
            base.p0 = t.iter().filter(|v| **v != 0.0).count();
            base.theta0 = Some(t.clone());
        }
        let dgp = match &self.small {
            None => Dgp::Exact(base),
            Some(s) => Dgp::SmallCoef(match &s.values {
                Some(v) => SmallCoefDgpConfig::new(base, v.clone(), s.reference_lambda)?,
                None => SmallCoefDgpConfig::at_tau_fraction(base, s.reference_lambda, s.count, s.fraction)?,
            }),
        };
        dgp.validate()?;
        Ok(dgp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub n: usize,
    pub p: Dimension,
    pub rho: f64,
    /// Leading coefficients, zero-padded to `p`. Defaults to the standard pattern.
    pub theta0: Option<Vec<f64>>,
    pub small: Option<SmallCoefSpec>,
    pub seed: u64,
    /// File stem of the written sample and its sidecar.
    pub name: String,
}

impl GenerateConfig {
    pub fn design(&self) -> DesignConfig {
        DesignConfig {
            n: self.n,
            p: self.p.clone(),
            rho: self.rho,
            theta0: self.theta0.clone(),
            small: self.small.clone(),
        }
    }
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            p: Dimension::Rule("n/10".into()),
            rho: DEFAULT_RHO,
            theta0: None,
            small: None,
            seed: 0,
            name: "sample".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitObjective {
    Logit,
    Linear,
}

impl std::str::FromStr for FitObjective {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logit" => Ok(FitObjective::Logit),
            "linear" => Ok(FitObjective::Linear),
            other => bail!("unknown objective '{other}' (expected logit or linear)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub data: Option<PathBuf>,
    pub response: String,
    pub objective: FitObjective,
    /// SCAD concavity.
    pub a: f64,
    pub bic_constant: BicConstant,
    /// Fixed threshold; by default `n^{-1/8} a lambda*`.
    pub tau: Option<f64>,
    pub grid_size: usize,
    /// Smallest grid point as a fraction of the largest.
    pub grid_ratio: f64,
    pub alpha: f64,
    /// Zero skips the bootstrap.
    pub bootstrap_reps: usize,
    pub max_drop_fraction: f64,
    pub seed: u64,
    pub se_method: Option<SeMethod>,
    pub kinds: Vec<IntervalKind>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            data: None,
            response: "y".into(),
            objective: FitObjective::Logit,
            a: scadboot::penalty::DEFAULT_CONCAVITY,
            bic_constant: BicConstant::One,
            tau: None,
            grid_size: scadboot::selection::DEFAULT_GRID_SIZE,
            grid_ratio: scadboot::selection::DEFAULT_GRID_RATIO,
            alpha: 0.10,
            bootstrap_reps: 399,
            max_drop_fraction: 0.01,
            seed: 0,
            se_method: None,
            kinds: vec![
                IntervalKind::LowerOneSided,
                IntervalKind::UpperOneSided,
                IntervalKind::Symmetric,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub n: usize,
    pub p: Dimension,
    pub rho: f64,
    /// Leading coefficients, zero-padded to `p`. Defaults to the standard pattern.
    pub theta0: Option<Vec<f64>>,
    pub small: Option<SmallCoefSpec>,
    pub replications: usize,
    pub bootstrap_reps: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Preset (`all`, `oracle-only`, ...) or a comma-separated column list.
    pub columns: String,
    /// One-based coefficients whose intervals are scored.
    pub coefs: Vec<usize>,
    pub kinds: Vec<IntervalKind>,
    pub se_method: Option<SeMethod>,
}

impl SimulateConfig {
    pub fn design(&self) -> DesignConfig {
        DesignConfig {
            n: self.n,
            p: self.p.clone(),
            rho: self.rho,
            theta0: self.theta0.clone(),
            small: self.small.clone(),
        }
    }
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            p: Dimension::Rule("n/10".into()),
            rho: DEFAULT_RHO,
            theta0: None,
            small: None,
            replications: 200,
            bootstrap_reps: 399,
            alpha: 0.10,
            seed: 0,
            columns: "all".into(),
            coefs: vec![1, 2],
            kinds: vec![
                IntervalKind::LowerOneSided,
                IntervalKind::UpperOneSided,
                IntervalKind::Symmetric,
            ],
            se_method: None,
        }
    }
}
