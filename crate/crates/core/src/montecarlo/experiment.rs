//! Replication loop shared by the coverage experiments.

use std::collections::{BTreeMap, HashMap};

use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::{Dgp, LogitDgpConfig, SmallCoefDgpConfig};
use super::table::CoverageTable;
use crate::bootstrap::{bootstrap_critical_values, BootstrapConfig, BootstrapResult, FailurePolicy};
use crate::data::Support;
use crate::error::{Error, Result};
use crate::inference::{asymptotic_region, refit, Interval, IntervalKind, RefitOptions, RefitResult, SeMethod};
use crate::objectives::logit_objective;
use crate::penalty::{BicConstant, PenaltyConfig, DEFAULT_CONCAVITY};
use crate::rng::derive_seed_path;
use crate::selection::{default_lambda_grid, fit_path, selection_from_path, TauRule, DEFAULT_GRID_RATIO, DEFAULT_GRID_SIZE};
use crate::solver::SolverOptions;

const TAG_DATA: u64 = 0x6461_7461;
const TAG_BOOT: u64 = 0x626f_6f74;

/// Share of failed replications above which a column is flagged.
pub const FAILURE_FLAG_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Column {
    FullAsymp,
    FullBoot,
    OracleAsymp,
    OracleBoot,
    PoAsympC1,
    PoBootC1,
    PoAsympLlp,
    PoBootLlp,
}

/// Which model a column refits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Full,
    Oracle,
    PseudoOracle(BicConstant),
}

impl Column {
    pub const ALL: [Column; 8] = [
        Column::FullAsymp,
        Column::FullBoot,
        Column::OracleAsymp,
        Column::OracleBoot,
        Column::PoAsympC1,
        Column::PoBootC1,
        Column::PoAsympLlp,
        Column::PoBootLlp,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Column::FullAsymp => "full-asymp",
            Column::FullBoot => "full-boot",
            Column::OracleAsymp => "oracle-asymp",
            Column::OracleBoot => "oracle-boot",
            Column::PoAsympC1 => "po-asymp-c1",
            Column::PoBootC1 => "po-boot-c1",
            Column::PoAsympLlp => "po-asymp-llp",
            Column::PoBootLlp => "po-boot-llp",
        }
    }

    /// Short header used in the aligned text table.
    pub fn header(self) -> &'static str {
        match self {
            Column::FullAsymp => "Full Asym.",
            Column::FullBoot => "Full Boot.",
            Column::OracleAsymp => "Oracle Asym.",
            Column::OracleBoot => "Oracle Boot.",
            Column::PoAsympC1 => "PO Asym. C=1",
            Column::PoBootC1 => "PO Boot. C=1",
            Column::PoAsympLlp => "PO Asym. C=llp",
            Column::PoBootLlp => "PO Boot. C=llp",
        }
    }

    pub fn is_bootstrap(self) -> bool {
        matches!(
            self,
            Column::FullBoot | Column::OracleBoot | Column::PoBootC1 | Column::PoBootLlp
        )
    }

    pub fn estimator(self) -> Estimator {
        match self {
            Column::FullAsymp | Column::FullBoot => Estimator::Full,
            Column::OracleAsymp | Column::OracleBoot => Estimator::Oracle,
            Column::PoAsympC1 | Column::PoBootC1 => Estimator::PseudoOracle(BicConstant::One),
            Column::PoAsympLlp | Column::PoBootLlp => Estimator::PseudoOracle(BicConstant::LogLogP),
        }
    }
}

impl std::fmt::Display for Column {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Column {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Column::ALL
            .iter()
            .copied()
            .find(|c| c.label() == key)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown column '{s}'")))
    }
}

/// Parse a preset name (`all`, `full`, `oracle`, `po`, `boot`, `asymp`) or a
/// comma-separated list of column labels.
pub fn parse_columns(spec: &str) -> Result<Vec<Column>> {
    let preset: Option<Vec<Column>> = match spec.trim().to_ascii_lowercase().as_str() {
        "all" => Some(Column::ALL.to_vec()),
        "full" => Some(vec![Column::FullAsymp, Column::FullBoot]),
        "oracle" | "oracle-only" => Some(vec![Column::OracleAsymp, Column::OracleBoot]),
        "po" | "pseudo-oracle" => Some(vec![
            Column::PoAsympC1,
            Column::PoBootC1,
            Column::PoAsympLlp,
            Column::PoBootLlp,
        ]),
        "boot" => Some(Column::ALL.iter().copied().filter(|c| c.is_bootstrap()).collect()),
        "asymp" => Some(Column::ALL.iter().copied().filter(|c| !c.is_bootstrap()).collect()),
        _ => None,
    };
    if let Some(cols) = preset {
        return Ok(cols);
    }
    let mut cols: Vec<Column> = spec
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    cols.sort();
    cols.dedup();
    if cols.is_empty() {
        return Err(Error::InvalidConfig("no columns requested".into()));
    }
    Ok(cols)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dgp: Dgp,
    pub columns: Vec<Column>,
    /// Zero-based coordinates whose intervals are scored.
    pub coefs: Vec<usize>,
    pub kinds: Vec<IntervalKind>,
    pub alpha: f64,
    pub replications: usize,
    pub bootstrap_reps: usize,
    pub master_seed: u64,
    pub a: f64,
    pub solver: SolverOptions,
    pub refit: RefitOptions,
    pub se_method: Option<SeMethod>,
}

impl ExperimentConfig {
    /// Desk-scale defaults around `dgp`.
    pub fn new(dgp: Dgp, master_seed: u64) -> Self {
        Self {
            dgp,
            columns: Column::ALL.to_vec(),
            coefs: vec![0, 1],
            kinds: vec![
                IntervalKind::LowerOneSided,
                IntervalKind::UpperOneSided,
                IntervalKind::Symmetric,
            ],
            alpha: 0.10,
            replications: 200,
            bootstrap_reps: 399,
            master_seed,
            a: DEFAULT_CONCAVITY,
            solver: SolverOptions::default(),
            refit: RefitOptions::default(),
            se_method: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        if self.replications < 1 {
            return Err(Error::InvalidConfig("at least one Monte Carlo replication is required".into()));
        }
        if self.columns.is_empty() || self.kinds.is_empty() || self.coefs.is_empty() {
            return Err(Error::InvalidConfig("columns, kinds and coefficients must be non-empty".into()));
        }
        if let Some(&c) = self.coefs.iter().find(|&&c| c >= self.dgp.p()) {
            return Err(Error::InvalidConfig(format!("coefficient {c} is outside the dimension")));
        }
        crate::inference::check_alpha(self.alpha)?;
        self.solver.validate()
    }

    fn needs(&self, est: Estimator) -> bool {
        self.columns.iter().any(|c| c.estimator() == est)
    }

    fn needs_bootstrap(&self, est: Estimator) -> bool {
        self.columns.iter().any(|c| c.is_bootstrap() && c.estimator() == est)
    }
}

/// Scored interval for one (column, coefficient, kind).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub covered: bool,
    /// `None` when the column failed or the coefficient was not selected.
    pub interval: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub data_seed: u64,
    /// Selected support per BIC rule, when the pseudo-oracle ran.
    pub selected: BTreeMap<BicConstant, Support>,
    pub cells: BTreeMap<(Column, usize, IntervalKind), CellOutcome>,
    /// Columns that failed, with the reason.
    pub failures: BTreeMap<Column, String>,
    pub true_support: Support,
}

impl ReplicationRecord {
    pub fn selected_equals_truth(&self, rule: BicConstant) -> Option<bool> {
        self.selected.get(&rule).map(|s| *s == self.true_support)
    }

    pub fn selected_covers_truth(&self, rule: BicConstant) -> Option<bool> {
        self.selected
            .get(&rule)
            .map(|s| self.true_support.indices().iter().all(|&j| s.contains(j)))
    }
}

/// Configuration and per-replication records; tables can be built from any prefix.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub config: ExperimentConfig,
    pub records: Vec<ReplicationRecord>,
}

impl ExperimentRun {
    pub fn table(&self) -> CoverageTable {
        CoverageTable::from_records(&self.config, &self.records)
    }

    /// Table over the first `r` replications.
    pub fn prefix_table(&self, r: usize) -> CoverageTable {
        CoverageTable::from_records(&self.config, &self.records[..r.min(self.records.len())])
    }
}

struct Fitted {
    refit: RefitResult,
    boot: Option<std::result::Result<BootstrapResult, String>>,
}

fn score_column(
    cfg: &ExperimentConfig,
    column: Column,
    fitted: &std::result::Result<Fitted, String>,
    theta0: &Array1<f64>,
    record: &mut ReplicationRecord,
) {
    let fitted = match fitted {
        Ok(f) => f,
        Err(e) => {
            record.failures.insert(column, e.clone());
            for &coef in &cfg.coefs {
                for &kind in &cfg.kinds {
                    record.cells.insert((column, coef, kind), CellOutcome { covered: false, interval: None });
                }
            }
            return;
        }
    };
    let boot = if column.is_bootstrap() {
        match fitted.boot.as_ref() {
            Some(Ok(b)) => Some(b),
            Some(Err(e)) => {
                record.failures.insert(column, e.clone());
                None
            }
            None => None,
        }
    } else {
        None
    };
    for &coef in &cfg.coefs {
        for &kind in &cfg.kinds {
            let interval = match fitted.refit.position(coef) {
                Err(_) => None,
                Ok(k) => {
                    let (theta, se) = (fitted.refit.theta_po[k], fitted.refit.se[k]);
                    if column.is_bootstrap() {
                        boot.and_then(|b| b.region(coef, kind).ok()).map(|r| r.interval(theta, se))
                    } else {
                        asymptotic_region(kind, cfg.alpha).ok().map(|r| r.interval(theta, se))
                    }
                }
            };
            let covered = interval.is_some_and(|iv| iv.contains(theta0[coef]));
            record.cells.insert((column, coef, kind), CellOutcome { covered, interval });
        }
    }
}

fn fit_support(
    cfg: &ExperimentConfig,
    model: &crate::objectives::ObjectiveModel,
    support: &Support,
    with_boot: bool,
    boot_seed: u64,
) -> std::result::Result<Fitted, String> {
    let ropts = RefitOptions {
        se_method: cfg.se_method,
        ..cfg.refit.clone()
    };
    let fitted = refit(model, support, &ropts).map_err(|e| e.to_string())?;
    let boot = with_boot.then(|| {
        let bcfg = BootstrapConfig {
            n_reps: cfg.bootstrap_reps,
            alpha: cfg.alpha,
            kinds: cfg.kinds.clone(),
            master_seed: boot_seed,
            failure_policy: FailurePolicy::Drop,
            ..BootstrapConfig::default()
        };
        bootstrap_critical_values(model, &fitted, &bcfg, &ropts).map_err(|e| e.to_string())
    });
    Ok(Fitted { refit: fitted, boot })
}

/// One Monte Carlo replication. Refits and bootstraps are cached by support,
/// and every bootstrap in a replication draws from the same seed.
pub fn run_replication(cfg: &ExperimentConfig, r: usize) -> Result<ReplicationRecord> {
    let data_seed = derive_seed_path(cfg.master_seed, &[r as u64, TAG_DATA]);
    let boot_seed = derive_seed_path(cfg.master_seed, &[r as u64, TAG_BOOT]);
    let data = cfg.dgp.sample(data_seed)?;
    let theta0 = cfg.dgp.theta0()?;
    let model = logit_objective(&data)?;
    let p = model.dim();
    let true_support = cfg.dgp.oracle_support()?;
    let mut record = ReplicationRecord {
        replication: r,
        data_seed,
        selected: BTreeMap::new(),
        cells: BTreeMap::new(),
        failures: BTreeMap::new(),
        true_support: true_support.clone(),
    };

    let mut supports: Vec<(Estimator, std::result::Result<Support, String>)> = Vec::new();
    if cfg.needs(Estimator::Full) {
        supports.push((Estimator::Full, Ok(Support::full(p))));
    }
    if cfg.needs(Estimator::Oracle) {
        supports.push((Estimator::Oracle, Ok(true_support.clone())));
    }
    let rules: Vec<BicConstant> = [BicConstant::One, BicConstant::LogLogP]
        .into_iter()
        .filter(|&b| cfg.needs(Estimator::PseudoOracle(b)))
        .collect();
    if !rules.is_empty() {
        let penalty = PenaltyConfig {
            a: cfg.a,
            ..PenaltyConfig::default()
        };
        let path = default_lambda_grid(&model, DEFAULT_GRID_SIZE, DEFAULT_GRID_RATIO)
            .and_then(|grid| fit_path(&model, &grid, &penalty, &cfg.solver));
        for rule in rules {
            let est = Estimator::PseudoOracle(rule);
            match &path {
                Ok(path) => {
                    let sel = selection_from_path(path, rule, cfg.a, TauRule::Scaled);
                    record.selected.insert(rule, sel.support.clone());
                    supports.push((est, Ok(sel.support)));
                }
                Err(e) => supports.push((est, Err(e.to_string()))),
            }
        }
    }

    let mut cache: HashMap<Vec<usize>, std::result::Result<Fitted, String>> = HashMap::new();
    for (est, support) in &supports {
        let with_boot = cfg.needs_bootstrap(*est);
        let fitted = match support {
            Err(e) => Err(e.clone()),
            Ok(s) => {
                let key = s.indices().to_vec();
                let stale = match cache.get(&key) {
                    None => true,
                    Some(Ok(f)) => with_boot && f.boot.is_none(),
                    Some(Err(_)) => false,
                };
                if stale {
                    cache.insert(key.clone(), fit_support(cfg, &model, s, with_boot, boot_seed));
                }
                match &cache[&key] {
                    Ok(f) => Ok(Fitted {
                        refit: f.refit.clone(),
                        boot: f.boot.clone(),
                    }),
                    Err(e) => Err(e.clone()),
                }
            }
        };
        for &column in cfg.columns.iter().filter(|c| c.estimator() == *est) {
            score_column(cfg, column, &fitted, &theta0, &mut record);
        }
    }
    Ok(record)
}

/// All replications, in parallel; records come back in replication order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    cfg.validate()?;
    let records = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_replication(cfg, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentRun {
        config: cfg.clone(),
        records,
    })
}

/// Coverage experiment under exact sparsity.
pub fn run_coverage_experiment(dgp: LogitDgpConfig, cfg: &ExperimentConfig) -> Result<CoverageTable> {
    let cfg = ExperimentConfig {
        dgp: Dgp::Exact(dgp),
        ..cfg.clone()
    };
    Ok(run_experiment(&cfg)?.table())
}

/// Coverage experiment with small nonzero coefficients outside the oracle support.
pub fn run_small_coef_experiment(dgp: SmallCoefDgpConfig, cfg: &ExperimentConfig) -> Result<CoverageTable> {
    let cfg = ExperimentConfig {
        dgp: Dgp::SmallCoef(dgp),
        ..cfg.clone()
    };
    Ok(run_experiment(&cfg)?.table())
}
