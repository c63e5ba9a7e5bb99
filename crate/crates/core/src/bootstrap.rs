//! Pairs bootstrap on a fixed support with studentized (bootstrap-t)
//! critical values.
//!
//! Each replication resamples rows with replacement, refits on the support
//! selected from the original data (no re-selection) starting from the
//! original refit, and records `t* = (theta* - theta_hat) / se*` with `se*`
//! recomputed on the resample by the original method.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::Array1;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::inference::{
    check_alpha, refit_restricted, AcceptanceRegion, Interval, IntervalKind, RefitOptions, RefitResult,
};
use crate::objectives::ObjectiveModel;
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailurePolicy {
    /// Skip failed replications up to the configured budget.
    Drop,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub n_reps: usize,
    pub alpha: f64,
    pub kinds: Vec<IntervalKind>,
    pub master_seed: u64,
    pub failure_policy: FailurePolicy,
    pub max_drop_fraction: f64,
    /// Keep the per-replication statistics in the result.
    pub retain_samples: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            n_reps: 2000,
            alpha: 0.10,
            kinds: IntervalKind::ALL.to_vec(),
            master_seed: 0,
            failure_policy: FailurePolicy::Drop,
            max_drop_fraction: 0.01,
            retain_samples: false,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_reps < 1 {
            return Err(Error::InvalidConfig("bootstrap needs at least one replication".into()));
        }
        check_alpha(self.alpha)?;
        if !(0.0..1.0).contains(&self.max_drop_fraction) {
            return Err(Error::InvalidConfig(format!(
                "drop fraction must lie in [0, 1), got {}",
                self.max_drop_fraction
            )));
        }
        Ok(())
    }
}

/// Row indices of a resample of size `n`.
pub fn pairs_resample_rows(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = stream(seed, 0);
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

pub fn pairs_resample(data: &Dataset, seed: u64) -> Dataset {
    data.select_rows(&pairs_resample_rows(data.n(), seed))
}

/// One-based rank `ceil((B + 1) q)` clamped to `[1, B]`.
pub fn order_statistic_index(b: usize, q: f64) -> usize {
    let raw = ((b as f64 + 1.0) * q - 1e-9).ceil();
    (raw.max(1.0) as usize).min(b)
}

fn order_statistic(sorted: &[f64], q: f64) -> f64 {
    sorted[order_statistic_index(sorted.len(), q) - 1]
}

/// Acceptance region for the signed statistic from bootstrap draws of it.
pub fn bootstrap_region(t_star: &[f64], kind: IntervalKind, alpha: f64) -> AcceptanceRegion {
    let mut signed = t_star.to_vec();
    signed.sort_by(f64::total_cmp);
    match kind {
        IntervalKind::Symmetric => {
            let mut abs: Vec<f64> = t_star.iter().map(|t| t.abs()).collect();
            abs.sort_by(f64::total_cmp);
            let c = order_statistic(&abs, 1.0 - alpha);
            AcceptanceRegion { lo: -c, hi: c }
        }
        IntervalKind::LowerOneSided => AcceptanceRegion {
            lo: order_statistic(&signed, alpha),
            hi: f64::INFINITY,
        },
        IntervalKind::UpperOneSided => AcceptanceRegion {
            lo: f64::NEG_INFINITY,
            hi: order_statistic(&signed, 1.0 - alpha),
        },
        IntervalKind::EqualTailed => AcceptanceRegion {
            lo: order_statistic(&signed, alpha / 2.0),
            hi: order_statistic(&signed, 1.0 - alpha / 2.0),
        },
    }
}

#[derive(Debug, Clone)]
pub struct BootstrapResult {
    /// Coefficient indices (the support), in the order of the other vectors.
    pub coefs: Vec<usize>,
    pub alpha: f64,
    pub regions: BTreeMap<IntervalKind, Vec<AcceptanceRegion>>,
    /// Signed statistics per coefficient, when retained.
    pub t_samples: Option<Vec<Vec<f64>>>,
    pub n_reps: usize,
    pub n_dropped: usize,
    pub seeds: Vec<u64>,
    pub dropped_seeds: Vec<u64>,
}

impl BootstrapResult {
    fn position(&self, coef: usize) -> Result<usize> {
        self.coefs.iter().position(|&c| c == coef).ok_or(Error::NotSelected(coef))
    }

    pub fn region(&self, coef: usize, kind: IntervalKind) -> Result<AcceptanceRegion> {
        let k = self.position(coef)?;
        self.regions
            .get(&kind)
            .map(|v| v[k])
            .ok_or_else(|| Error::InvalidConfig(format!("interval kind {} was not computed", kind.label())))
    }

    /// Symmetric critical value, or the binding quantile for the other kinds.
    pub fn critical_value(&self, coef: usize, kind: IntervalKind) -> Result<f64> {
        let r = self.region(coef, kind)?;
        Ok(match kind {
            IntervalKind::Symmetric => r.hi,
            IntervalKind::LowerOneSided => r.lo,
            IntervalKind::UpperOneSided => r.hi,
            IntervalKind::EqualTailed => r.hi,
        })
    }

    /// `coef,replication,t` rows of the retained statistics.
    pub fn t_samples_csv(&self) -> Option<String> {
        let samples = self.t_samples.as_ref()?;
        let mut out = String::from("coef,replication,t\n");
        for (c, ts) in self.coefs.iter().zip(samples) {
            for (b, t) in ts.iter().enumerate() {
                let _ = writeln!(out, "{c},{b},{t}");
            }
        }
        Some(out)
    }
}

/// Bootstrap-t interval for coordinate `coef`.
pub fn bootstrap_interval(
    theta_po_j: f64,
    se_j: f64,
    result: &BootstrapResult,
    coef: usize,
    kind: IntervalKind,
) -> Result<Interval> {
    Ok(result.region(coef, kind)?.interval(theta_po_j, se_j))
}

/// Whether the observed statistic rejects, with the region used. For
/// symmetric tests `t_observed` may be `|t|` or signed; other kinds take the
/// signed statistic.
pub fn bootstrap_test(
    t_observed: f64,
    result: &BootstrapResult,
    coef: usize,
    kind: IntervalKind,
) -> Result<(bool, AcceptanceRegion)> {
    let region = result.region(coef, kind)?;
    Ok((region.rejects(t_observed), region))
}

/// Replications run per batch before the drop budget is checked.
const BUDGET_CHUNK: usize = 64;

enum Replication {
    Ok(Array1<f64>),
    Failed,
}

/// Bootstrap critical values for every coefficient in `refit.support`.
///
/// `model` is the full objective on the original data; resamples are built
/// from it row-wise.
pub fn bootstrap_critical_values(
    model: &ObjectiveModel,
    refit: &RefitResult,
    bcfg: &BootstrapConfig,
    ropts: &RefitOptions,
) -> Result<BootstrapResult> {
    bcfg.validate()?;
    let support = &refit.support;
    let restricted = model.restrict(support)?;
    let n = model.n_obs();
    let ropts = RefitOptions {
        se_method: Some(refit.se_method),
        ..ropts.clone()
    };
    let seeds: Vec<u64> = (0..bcfg.n_reps as u64).map(|b| derive_seed(bcfg.master_seed, b)).collect();

    let allowed = match bcfg.failure_policy {
        FailurePolicy::Drop => bcfg.max_drop_fraction,
        FailurePolicy::Error => 0.0,
    };
    let over_budget = |dropped: usize| dropped as f64 > allowed * bcfg.n_reps as f64 || dropped == bcfg.n_reps;
    let replicate = |seed: u64| {
        let rows = pairs_resample_rows(n, seed);
        let fitted = restricted
            .resampled(&rows)
            .and_then(|m| refit_restricted(&m, support, Some(refit.theta_po.view()), &ropts));
        match fitted {
            Ok(star) => {
                debug_assert_eq!(&star.support, support);
                let t = (&star.theta_po - &refit.theta_po) / &star.se;
                if t.iter().all(|v| v.is_finite()) {
                    Replication::Ok(t)
                } else {
                    Replication::Failed
                }
            }
            Err(_) => Replication::Failed,
        }
    };

    // Fixed chunks keep the early exit independent of scheduling.
    let mut outcomes: Vec<Replication> = Vec::with_capacity(bcfg.n_reps);
    let mut dropped_seeds: Vec<u64> = Vec::new();
    for chunk in seeds.chunks(BUDGET_CHUNK) {
        let part: Vec<Replication> = chunk.par_iter().map(|&seed| replicate(seed)).collect();
        dropped_seeds.extend(
            part.iter()
                .zip(chunk)
                .filter(|(o, _)| matches!(o, Replication::Failed))
                .map(|(_, s)| *s),
        );
        outcomes.extend(part);
        if over_budget(dropped_seeds.len()) {
            return Err(Error::BootstrapBudget {
                dropped: dropped_seeds.len(),
                total: bcfg.n_reps,
                allowed,
                seeds: dropped_seeds,
            });
        }
    }
    let n_dropped = dropped_seeds.len();

    let k = support.len();
    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(bcfg.n_reps - n_dropped); k];
    for o in &outcomes {
        if let Replication::Ok(t) = o {
            for (j, v) in t.iter().enumerate() {
                samples[j].push(*v);
            }
        }
    }
    let mut regions = BTreeMap::new();
    for &kind in &bcfg.kinds {
        regions.insert(
            kind,
            samples.iter().map(|s| bootstrap_region(s, kind, bcfg.alpha)).collect(),
        );
    }
    Ok(BootstrapResult {
        coefs: support.indices().to_vec(),
        alpha: bcfg.alpha,
        regions,
        t_samples: bcfg.retain_samples.then_some(samples),
        n_reps: bcfg.n_reps,
        n_dropped,
        seeds,
        dropped_seeds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Support;
    use crate::inference::refit;
    use crate::objectives::linear_ls_objective;
    use approx::assert_relative_eq;
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn resample_properties() {
        let data = Dataset::new(array![[7.0]], Some(array![1.0])).unwrap();
        assert_eq!(pairs_resample(&data, 3).x(), data.x());
        let rows = pairs_resample_rows(25, 9);
        assert_eq!(rows.len(), 25);
        assert!(rows.iter().all(|&r| r < 25));
        assert_eq!(rows, pairs_resample_rows(25, 9));

        let hits = (0..10_000u64)
            .filter(|&s| pairs_resample_rows(10, s).contains(&3))
            .count() as f64
            / 10_000.0;
        let expected = 1.0 - 0.9f64.powi(10);
        assert!((expected - 0.6513).abs() < 1e-4);
        assert!((hits - expected).abs() < 0.02, "{hits}");
    }

    #[test]
    fn order_statistics() {
        assert_eq!(order_statistic_index(9, 0.9), 9);
        assert_eq!(order_statistic_index(2000, 0.9), 1801);
        assert_eq!(order_statistic_index(399, 0.9), 360);
        assert_eq!(order_statistic_index(399, 0.1), 40);
        assert_eq!(order_statistic_index(5, 0.01), 1);
        assert_eq!(order_statistic_index(5, 0.999), 5);

        let t: Vec<f64> = (1..=9).map(|v| v as f64 * if v % 2 == 0 { -1.0 } else { 1.0 }).collect();
        let r = bootstrap_region(&t, IntervalKind::Symmetric, 0.10);
        assert_eq!(r.hi, 9.0);
        assert_eq!(r.lo, -9.0);
    }

    #[test]
    fn symmetric_draws_make_equal_tailed_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // B = 399 so that (B + 1) alpha / 2 is an integer
        let half: Vec<f64> = (0..199).map(|_| rng.sample::<f64, _>(StandardNormal).abs()).collect();
        let mut t: Vec<f64> = half.iter().flat_map(|&v| [v, -v]).collect();
        t.push(0.0);
        let eq = bootstrap_region(&t, IntervalKind::EqualTailed, 0.1);
        assert_relative_eq!(eq.lo, -eq.hi);
        let mut last = 0.0;
        for alpha in [0.5, 0.2, 0.1, 0.05] {
            let c = bootstrap_region(&t, IntervalKind::Symmetric, alpha).hi;
            assert!(c >= last && c >= 0.0);
            last = c;
        }
    }

    fn ls_problem(seed: u64, n: usize) -> (ObjectiveModel, RefitResult) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 3), |_| rng.sample::<f64, _>(StandardNormal));
        let y = x.dot(&array![1.0, -0.5, 0.0]) + Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
        let m = linear_ls_objective(&Dataset::new(x, Some(y)).unwrap()).unwrap();
        let support = Support::new(vec![0, 1], 3).unwrap();
        let r = refit(&m, &support, &RefitOptions::default()).unwrap();
        (m, r)
    }

    #[test]
    fn deterministic_and_dual() {
        let (m, r) = ls_problem(5, 120);
        let cfg = BootstrapConfig {
            n_reps: 99,
            master_seed: 17,
            retain_samples: true,
            ..BootstrapConfig::default()
        };
        let a = bootstrap_critical_values(&m, &r, &cfg, &RefitOptions::default()).unwrap();
        let b = bootstrap_critical_values(&m, &r, &cfg, &RefitOptions::default()).unwrap();
        assert_eq!(a.t_samples, b.t_samples);
        assert_eq!(a.regions, b.regions);
        assert_eq!(a.coefs, vec![0, 1]);
        assert!(a.t_samples_csv().unwrap().lines().count() == 1 + 2 * 99);

        for kind in IntervalKind::ALL {
            let (th, se) = (r.theta_po[0], r.se[0]);
            let iv = bootstrap_interval(th, se, &a, 0, kind).unwrap();
            if kind == IntervalKind::Symmetric {
                assert!(iv.contains(th));
                assert_relative_eq!(iv.hi - th, a.critical_value(0, kind).unwrap() * se, epsilon = 1e-12);
            }
            for k in -40..=40 {
                let theta0 = th + k as f64 * 0.013 * se;
                let t = (th - theta0) / se;
                let (reject, _) = bootstrap_test(t, &a, 0, kind).unwrap();
                assert_eq!(reject, !iv.contains(theta0), "{kind:?} {k}");
            }
        }
        let (reject, region) = bootstrap_test(0.0, &a, 0, IntervalKind::Symmetric).unwrap();
        assert!(!reject);
        let (reject, _) = bootstrap_test(region.hi, &a, 0, IntervalKind::Symmetric).unwrap();
        assert!(!reject);
        assert!(a.region(2, IntervalKind::Symmetric).is_err());
    }

    #[test]
    fn degenerate_data_gives_zero_critical_value() {
        // exact fit: every resample reproduces the coefficients exactly
        let x = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, -1.0], [1.0, 3.0], [-1.0, 2.0]];
        let y = x.dot(&array![1.5, -2.0]);
        let m = linear_ls_objective(&Dataset::new(x, Some(y)).unwrap()).unwrap();
        let theta = array![1.5, -2.0];
        let fake = RefitResult {
            support: Support::full(2),
            theta_po: theta,
            se: array![1.0, 1.0],
            se_method: crate::inference::SeMethod::InverseHessian,
            hessian_condition: 1.0,
            iterations: 0,
            gradient_norm: 0.0,
        };
        let cfg = BootstrapConfig {
            n_reps: 19,
            failure_policy: FailurePolicy::Drop,
            max_drop_fraction: 0.5,
            ..BootstrapConfig::default()
        };
        let res = bootstrap_critical_values(&m, &fake, &cfg, &RefitOptions::default()).unwrap();
        let used = cfg.n_reps - res.n_dropped;
        assert!(used > 0);
        assert!(res.critical_value(0, IntervalKind::Symmetric).unwrap().abs() < 1e-6);
    }

    #[test]
    fn budget_exceeded_lists_seeds() {
        // resamples that miss the first row leave its column identically zero
        let x = array![[1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [0.0, 1.0]];
        let y = array![1.0, 2.0, 2.5, 1.5];
        let m = linear_ls_objective(&Dataset::new(x, Some(y)).unwrap()).unwrap();
        let r = refit(&m, &Support::full(2), &RefitOptions::default()).unwrap();
        let cfg = BootstrapConfig {
            n_reps: 200,
            failure_policy: FailurePolicy::Drop,
            ..BootstrapConfig::default()
        };
        let err = bootstrap_critical_values(&m, &r, &cfg, &RefitOptions::default()).unwrap_err();
        match err {
            Error::BootstrapBudget { dropped, seeds, .. } => {
                assert!(dropped > 2);
                assert_eq!(seeds.len(), dropped);
            }
            other => panic!("unexpected {other}"),
        }
    }
}
