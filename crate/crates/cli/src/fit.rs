//! Penalized fit, thresholding, refit and intervals on a CSV dataset.

use std::fmt::Write as _;

use anyhow::{Context, Result};
use serde::Serialize;

use scadboot::bootstrap::{bootstrap_interval, FailurePolicy};
use scadboot::inference::asymptotic_interval;
use scadboot::selection::{default_lambda_grid, select_lambda, selection_from_path};
use scadboot::{
    bootstrap_critical_values, linear_ls_objective, logit_objective, refit, BootstrapConfig, Dataset, Interval,
    IntervalKind, PenaltyConfig, RefitOptions, SolverOptions, TauRule,
};

use crate::config::{FitConfig, FitObjective};
use crate::csv::load_csv;
use crate::Output;

/// Everything needed to reproduce the reported numbers, given the data.
#[derive(Debug, Clone, Serialize)]
pub struct FitMetadata {
    pub n: usize,
    pub p: usize,
    pub lambda_star: f64,
    pub tau: f64,
    pub bic_constant: String,
    pub support_size: usize,
    pub alpha: f64,
    pub bootstrap_reps: usize,
    pub bootstrap_dropped: usize,
    pub seed: u64,
    pub se_method: String,
    pub lla_iterations: usize,
    pub lla_converged: bool,
    pub kkt_max_violation: f64,
    pub refit_iterations: usize,
    pub refit_gradient_norm: f64,
    pub hessian_condition: f64,
    pub path_failures: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct CoefficientRow {
    pub index: usize,
    pub name: String,
    pub penalized: f64,
    pub selected: bool,
    /// Refit estimate and standard error on the selected support.
    pub estimate: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct IntervalRow {
    pub index: usize,
    pub kind: IntervalKind,
    pub asymptotic: Interval,
    pub bootstrap: Option<Interval>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub metadata: FitMetadata,
    pub coefficients: Vec<CoefficientRow>,
    pub intervals: Vec<IntervalRow>,
    pub path_csv: String,
}

pub fn run_fit(cfg: &FitConfig) -> Result<Report> {
    let path = cfg.data.as_ref().context("no dataset given (set `data` or pass --data)")?;
    let data = load_csv(path, &cfg.response).context("parse stage failed")?;
    fit_dataset(&data, cfg)
}

pub fn fit_dataset(data: &Dataset, cfg: &FitConfig) -> Result<Report> {
    let model = match cfg.objective {
        FitObjective::Logit => logit_objective(data),
        FitObjective::Linear => linear_ls_objective(data),
    }
    .context("objective setup failed")?;

    let penalty = PenaltyConfig::new(cfg.a, 0.0)
        .context("invalid penalty")?
        .with_bic_constant(cfg.bic_constant);
    let solver = SolverOptions::default();
    let tau_rule = cfg.tau.map_or(TauRule::Scaled, TauRule::Fixed);
    let (path, selection) = (|| {
        let grid = default_lambda_grid(&model, cfg.grid_size, cfg.grid_ratio)?;
        let path = select_lambda(&model, &grid, &penalty, &solver)?;
        let selection = selection_from_path(&path, cfg.bic_constant, cfg.a, tau_rule);
        Ok::<_, scadboot::Error>((path, selection))
    })()
    .context("selection stage failed")?;
    let chosen = &path.points[path.best_index(cfg.bic_constant)].fit;

    let ropts = RefitOptions {
        se_method: cfg.se_method,
        ..RefitOptions::default()
    };
    let fitted = refit(&model, &selection.support, &ropts).context("refit stage failed")?;

    let boot = if cfg.bootstrap_reps > 0 {
        let bcfg = BootstrapConfig {
            n_reps: cfg.bootstrap_reps,
            alpha: cfg.alpha,
            kinds: cfg.kinds.clone(),
            master_seed: cfg.seed,
            failure_policy: FailurePolicy::Drop,
            max_drop_fraction: cfg.max_drop_fraction,
            retain_samples: false,
        };
        Some(bootstrap_critical_values(&model, &fitted, &bcfg, &ropts).context("bootstrap stage failed")?)
    } else {
        None
    };

    let coefficients = (0..data.p())
        .map(|j| CoefficientRow {
            index: j,
            name: data.column_name(j),
            penalized: selection.theta_tilde[j],
            selected: selection.support.contains(j),
            estimate: fitted
                .position(j)
                .ok()
                .map(|k| (fitted.theta_po[k], fitted.se[k])),
        })
        .collect();

    let mut intervals = Vec::new();
    for &j in selection.support.indices() {
        let k = fitted.position(j)?;
        for &kind in &cfg.kinds {
            let bootstrap = match &boot {
                Some(b) => Some(bootstrap_interval(fitted.theta_po[k], fitted.se[k], b, j, kind)?),
                None => None,
            };
            intervals.push(IntervalRow {
                index: j,
                kind,
                asymptotic: asymptotic_interval(&fitted, j, cfg.alpha, kind)?,
                bootstrap,
            });
        }
    }

    let metadata = FitMetadata {
        n: data.n(),
        p: data.p(),
        lambda_star: selection.lambda_star,
        tau: selection.tau,
        bic_constant: cfg.bic_constant.label().to_string(),
        support_size: selection.support.len(),
        alpha: cfg.alpha,
        bootstrap_reps: cfg.bootstrap_reps,
        bootstrap_dropped: boot.as_ref().map_or(0, |b| b.n_dropped),
        seed: cfg.seed,
        se_method: fitted.se_method.label().to_string(),
        lla_iterations: chosen.lla_iters_used,
        lla_converged: chosen.converged,
        kkt_max_violation: chosen.kkt_max_violation,
        refit_iterations: fitted.iterations,
        refit_gradient_norm: fitted.gradient_norm,
        hessian_condition: fitted.hessian_condition,
        path_failures: path.failures.len(),
        warnings: chosen.warnings.clone(),
    };
    Ok(Report {
        metadata,
        coefficients,
        intervals,
        path_csv: path.to_csv(cfg.bic_constant),
    })
}

impl Report {
    pub fn coefficients_csv(&self) -> String {
        let mut out = String::from("index,name,penalized,selected,estimate,se\n");
        for c in &self.coefficients {
            let (est, se) = c.estimate.map_or((String::new(), String::new()), |(e, s)| (e.to_string(), s.to_string()));
            let _ = writeln!(out, "{},{},{},{},{est},{se}", c.index + 1, c.name, c.penalized, c.selected);
        }
        out
    }

    pub fn intervals_csv(&self) -> String {
        let mut out = String::from("index,name,kind,asymptotic_lo,asymptotic_hi,bootstrap_lo,bootstrap_hi\n");
        for iv in &self.intervals {
            let (blo, bhi) = iv
                .bootstrap
                .map_or((String::new(), String::new()), |b| (b.lo.to_string(), b.hi.to_string()));
            let _ = writeln!(
                out,
                "{},{},{},{},{},{blo},{bhi}",
                iv.index + 1,
                self.coefficients[iv.index].name,
                iv.kind.label(),
                iv.asymptotic.lo,
                iv.asymptotic.hi
            );
        }
        out
    }

    /// Point estimates with asymptotic and bootstrap intervals, one block per interval kind.
    pub fn to_text(&self) -> String {
        let m = &self.metadata;
        let mut out = String::new();
        let _ = writeln!(out, "Coefficients and {:.0}% confidence intervals", 100.0 * (1.0 - m.alpha));
        let _ = writeln!(
            out,
            "n = {}, p = {}, lambda* = {:.6}, tau = {:.6}, C_n = {}, selected {} of {}",
            m.n, m.p, m.lambda_star, m.tau, m.bic_constant, m.support_size, m.p
        );
        let _ = writeln!(
            out,
            "standard errors: {}; bootstrap: B = {} ({} dropped), seed {}",
            m.se_method, m.bootstrap_reps, m.bootstrap_dropped, m.seed
        );
        let mut kinds: Vec<IntervalKind> = Vec::new();
        for iv in &self.intervals {
            if !kinds.contains(&iv.kind) {
                kinds.push(iv.kind);
            }
        }
        for kind in kinds {
            let _ = writeln!(out, "\n{}", kind.table_label());
            let _ = writeln!(out, "{:<14}{:>12}{:>24}{:>24}", "Coefficient", "Estimate", "Asymptotic", "Bootstrap");
            for iv in self.intervals.iter().filter(|iv| iv.kind == kind) {
                let c = &self.coefficients[iv.index];
                let est = c.estimate.map_or(f64::NAN, |(e, _)| e);
                let boot = iv.bootstrap.map_or("-".to_string(), |b| b.to_string());
                let _ = writeln!(
                    out,
                    "{:<14}{:>12.3}{:>24}{:>24}",
                    c.name,
                    est,
                    iv.asymptotic.to_string(),
                    boot
                );
            }
        }
        if !m.warnings.is_empty() {
            let _ = writeln!(out, "\nwarnings:");
            for w in &m.warnings {
                let _ = writeln!(out, "  {w}");
            }
        }
        out
    }
}

#[derive(Serialize)]
struct ConfigRecord<'a> {
    fit: &'a FitConfig,
}

/// Report files plus the resolved config, which `--config` accepts back.
pub fn fit_outputs(cfg: &FitConfig, report: &Report) -> Result<Vec<Output>> {
    Ok(vec![
        Output::new("coefficients.csv", report.coefficients_csv()),
        Output::new("intervals.csv", report.intervals_csv()),
        Output::new("path.csv", report.path_csv.clone()),
        Output::new("report.txt", report.to_text()),
        Output::new("metadata.toml", toml::to_string(&report.metadata)?),
        Output::new("fit.toml", toml::to_string(&ConfigRecord { fit: cfg })?),
    ])
}
