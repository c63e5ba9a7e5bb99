//! Logit designs with AR(1)-correlated Gaussian covariates.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Support};
use crate::error::{Error, Result};
use crate::objectives::logistic;
use crate::penalty::{PenaltyConfig, DEFAULT_CONCAVITY};
use crate::selection::default_tau;

/// The five values repeated three times at the front of the coefficient vector.
pub const THETA0_PATTERN: [f64; 5] = [4.0, -1.5, -3.0, 1.9, 2.6];
pub const DEFAULT_P0: usize = 15;
pub const DEFAULT_RHO: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PRule {
    NOver10,
    NOver2,
    ThreeNOver4,
    Explicit(usize),
}

impl PRule {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            PRule::NOver10 => n / 10,
            PRule::NOver2 => n / 2,
            PRule::ThreeNOver4 => 3 * n / 4,
            PRule::Explicit(p) => p,
        }
    }
}

impl std::str::FromStr for PRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "n/10" | "n-over-10" => Ok(PRule::NOver10),
            "n/2" | "n-over-2" => Ok(PRule::NOver2),
            "3n/4" | "three-n-over-4" => Ok(PRule::ThreeNOver4),
            other => other
                .parse::<usize>()
                .map(PRule::Explicit)
                .map_err(|_| Error::InvalidConfig(format!("unknown dimension rule '{other}'"))),
        }
    }
}

/// The default coefficient vector: the pattern three times, then zeros.
pub fn default_theta0(p: usize) -> Result<Array1<f64>> {
    if p < DEFAULT_P0 {
        return Err(Error::InvalidConfig(format!(
            "the default coefficient vector needs p >= {DEFAULT_P0}, got {p}"
        )));
    }
    Ok(Array1::from_shape_fn(p, |j| {
        if j < DEFAULT_P0 {
            THETA0_PATTERN[j % THETA0_PATTERN.len()]
        } else {
            0.0
        }
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitDgpConfig {
    pub n: usize,
    pub p_rule: PRule,
    pub rho: f64,
    /// Leading coefficients; defaults to the repeated pattern. Padded with zeros.
    pub theta0: Option<Vec<f64>>,
    pub p0: usize,
    pub seed: u64,
}

impl LogitDgpConfig {
    pub fn new(n: usize, p_rule: PRule, seed: u64) -> Self {
        Self {
            n,
            p_rule,
            rho: DEFAULT_RHO,
            theta0: None,
            p0: DEFAULT_P0,
            seed,
        }
    }

    pub fn p(&self) -> usize {
        self.p_rule.resolve(self.n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidConfig(format!("sample size must be at least 2, got {}", self.n)));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::InvalidConfig(format!("rho must lie in (-1, 1), got {}", self.rho)));
        }
        if self.p() < self.p0 {
            return Err(Error::InvalidConfig(format!(
                "dimension {} is below the number of nonzero coefficients {}",
                self.p(),
                self.p0
            )));
        }
        if let Some(t) = &self.theta0 {
            if t.len() > self.p() {
                return Err(Error::InvalidConfig("coefficient vector longer than the dimension".into()));
            }
        }
        Ok(())
    }

    pub fn theta0(&self) -> Result<Array1<f64>> {
        self.validate()?;
        match &self.theta0 {
            None => default_theta0(self.p()),
            Some(t) => {
                let mut out = Array1::zeros(self.p());
                out.slice_mut(ndarray::s![..t.len()]).assign(&Array1::from_vec(t.clone()));
                Ok(out)
            }
        }
    }

    /// Indices of the nonzero leading coefficients.
    pub fn true_support(&self) -> Result<Support> {
        let theta0 = self.theta0()?;
        Ok(Support::of_nonzero(theta0.view()))
    }
}

/// `n x p` covariates with `corr(x_j, x_l) = rho^|j - l|`.
pub fn generate_design<R: Rng>(n: usize, p: usize, rho: f64, rng: &mut R) -> Array2<f64> {
    let scale = (1.0 - rho * rho).sqrt();
    let mut x = Array2::<f64>::zeros((n, p));
    for mut row in x.rows_mut() {
        let mut prev = 0.0;
        for j in 0..p {
            let z: f64 = rng.sample(StandardNormal);
            prev = if j == 0 { z } else { rho * prev + scale * z };
            row[j] = prev;
        }
    }
    x
}

fn logit_sample(n: usize, rho: f64, theta0: &Array1<f64>, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = generate_design(n, theta0.len(), rho, &mut rng);
    let eta = x.dot(theta0);
    let y = eta.mapv(|e| if rng.gen::<f64>() < logistic(e) { 1.0 } else { 0.0 });
    let names = (1..=theta0.len()).map(|j| format!("x{j}")).collect();
    Dataset::new(x, Some(y))?.with_column_names(names)
}

pub fn generate_logit_sample(cfg: &LogitDgpConfig) -> Result<Dataset> {
    let theta0 = cfg.theta0()?;
    logit_sample(cfg.n, cfg.rho, &theta0, cfg.seed)
}

/// Exact-sparsity design plus small coefficients right after the large ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallCoefDgpConfig {
    pub base: LogitDgpConfig,
    /// Values placed at positions `p0, p0 + 1, ...`.
    pub small_values: Vec<f64>,
    /// Penalty level at which the threshold scale is evaluated.
    pub reference_lambda: f64,
    pub a: f64,
}

impl SmallCoefDgpConfig {
    /// Validated construction.
    pub fn new(base: LogitDgpConfig, small_values: Vec<f64>, reference_lambda: f64) -> Result<Self> {
        let cfg = Self {
            base,
            small_values,
            reference_lambda,
            a: DEFAULT_CONCAVITY,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `count` values of magnitude `fraction * tau`, alternating in sign.
    pub fn at_tau_fraction(
        base: LogitDgpConfig,
        reference_lambda: f64,
        count: usize,
        fraction: f64,
    ) -> Result<Self> {
        let tau = reference_tau(base.n, DEFAULT_CONCAVITY, reference_lambda);
        let values = (0..count)
            .map(|k| if k % 2 == 0 { fraction * tau } else { -fraction * tau })
            .collect();
        Self::new(base, values, reference_lambda)
    }

    pub fn tau(&self) -> f64 {
        reference_tau(self.base.n, self.a, self.reference_lambda)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if !(self.reference_lambda > 0.0) {
            return Err(Error::InvalidConfig("reference penalty level must be positive".into()));
        }
        let p = self.base.p();
        let start = self.base.theta0()?.iter().filter(|v| **v != 0.0).count();
        if start + self.small_values.len() > p {
            return Err(Error::InvalidConfig(format!(
                "{} small coefficients do not fit after {start} large ones in dimension {p}",
                self.small_values.len()
            )));
        }
        let tau = self.tau();
        let largest = self.small_values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if largest >= tau / 4.0 {
            return Err(Error::InvalidConfig(format!(
                "small coefficient magnitude {largest} is not below tau/4 = {}",
                tau / 4.0
            )));
        }
        Ok(())
    }

    pub fn theta0(&self) -> Result<Array1<f64>> {
        let mut theta = self.base.theta0()?;
        let start = theta.iter().filter(|v| **v != 0.0).count();
        for (k, v) in self.small_values.iter().enumerate() {
            theta[start + k] = *v;
        }
        Ok(theta)
    }

    /// The large coordinates, which the oracle estimator uses.
    pub fn large_support(&self) -> Result<Support> {
        self.base.true_support()
    }
}

fn reference_tau(n: usize, a: f64, lambda: f64) -> f64 {
    let cfg = PenaltyConfig {
        a,
        lambda,
        ..PenaltyConfig::default()
    };
    default_tau(n, &cfg)
}

pub fn generate_small_coef_sample(cfg: &SmallCoefDgpConfig) -> Result<Dataset> {
    cfg.validate()?;
    logit_sample(cfg.base.n, cfg.base.rho, &cfg.theta0()?, cfg.base.seed)
}

/// Either design, as used by the experiment runner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dgp {
    Exact(LogitDgpConfig),
    SmallCoef(SmallCoefDgpConfig),
}

impl Dgp {
    pub fn base(&self) -> &LogitDgpConfig {
        match self {
            Dgp::Exact(c) => c,
            Dgp::SmallCoef(c) => &c.base,
        }
    }

    pub fn n(&self) -> usize {
        self.base().n
    }

    pub fn p(&self) -> usize {
        self.base().p()
    }

    pub fn theta0(&self) -> Result<Array1<f64>> {
        match self {
            Dgp::Exact(c) => c.theta0(),
            Dgp::SmallCoef(c) => c.theta0(),
        }
    }

    /// Support used by the oracle columns.
    pub fn oracle_support(&self) -> Result<Support> {
        match self {
            Dgp::Exact(c) => c.true_support(),
            Dgp::SmallCoef(c) => c.large_support(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Dgp::Exact(c) => c.validate(),
            Dgp::SmallCoef(c) => c.validate(),
        }
    }

    pub fn sample(&self, seed: u64) -> Result<Dataset> {
        match self {
            Dgp::Exact(c) => generate_logit_sample(&LogitDgpConfig { seed, ..c.clone() }),
            Dgp::SmallCoef(c) => generate_small_coef_sample(&SmallCoefDgpConfig {
                base: LogitDgpConfig { seed, ..c.base.clone() },
                ..c.clone()
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corr(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
        let (ma, mb) = (a.mean().unwrap(), b.mean().unwrap());
        let cov = a.iter().zip(b.iter()).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>();
        let va = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>();
        let vb = b.iter().map(|y| (y - mb).powi(2)).sum::<f64>();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn design_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = generate_design(100_000, 4, 0.3, &mut rng);
        assert!((corr(x.column(0), x.column(2)) - 0.09).abs() < 0.01);
        assert!((corr(x.column(0), x.column(1)) - 0.3).abs() < 0.01);
        for j in 0..4 {
            let v = x.column(j).mapv(|v| v * v).mean().unwrap();
            assert!((v - 1.0).abs() < 0.02);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = generate_design(100_000, 3, 0.0, &mut rng);
        assert!(corr(x.column(0), x.column(1)).abs() < 0.01);
    }

    #[test]
    fn theta0_layout() {
        let t = default_theta0(15).unwrap();
        assert_eq!(t.len(), 15);
        assert_eq!(t[4], 2.6);
        assert_eq!(t[10], 4.0);
        assert_eq!(t[14], 2.6);
        let t = default_theta0(20).unwrap();
        assert!(t.iter().skip(15).all(|v| *v == 0.0));
        assert!(default_theta0(14).is_err());
    }

    #[test]
    fn samples_are_deterministic_and_balanced() {
        let cfg = LogitDgpConfig::new(10_000, PRule::Explicit(20), 7);
        let a = generate_logit_sample(&cfg).unwrap();
        let b = generate_logit_sample(&cfg).unwrap();
        assert_eq!(a, b);
        let ybar = a.y().unwrap().mean().unwrap();
        assert!(ybar > 0.2 && ybar < 0.8);
        assert_eq!(a.column_name(0), "x1");
        assert_eq!(PRule::NOver10.resolve(2000), 200);
        assert_eq!(PRule::ThreeNOver4.resolve(1000), 750);
        assert_eq!("n/2".parse::<PRule>().unwrap(), PRule::NOver2);
    }

    #[test]
    fn small_coefficients_validated() {
        let base = LogitDgpConfig::new(2000, PRule::NOver10, 3);
        let cfg = SmallCoefDgpConfig::at_tau_fraction(base.clone(), 0.02, 5, 0.125).unwrap();
        let theta = cfg.theta0().unwrap();
        assert_eq!(theta[15], cfg.tau() / 8.0);
        assert_eq!(theta[16], -cfg.tau() / 8.0);
        assert_eq!(theta[20], 0.0);
        assert!(SmallCoefDgpConfig::at_tau_fraction(base.clone(), 0.02, 5, 0.25).is_err());

        let zero = SmallCoefDgpConfig::new(base.clone(), vec![0.0; 3], 0.02).unwrap();
        let exact = Dgp::Exact(base.clone());
        assert_eq!(Dgp::SmallCoef(zero).sample(11).unwrap(), exact.sample(11).unwrap());
    }
}
