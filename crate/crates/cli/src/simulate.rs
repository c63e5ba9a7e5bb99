//! Coverage experiments from a config.

use anyhow::{bail, Context, Result};
use serde::Serialize;

use scadboot::montecarlo::{parse_columns, run_experiment, ExperimentConfig};

use crate::config::SimulateConfig;
use crate::Output;

#[derive(Debug, Serialize)]
struct Record<'a> {
    simulate: &'a SimulateConfig,
}

pub fn experiment_config(cfg: &SimulateConfig) -> Result<ExperimentConfig> {
    let dgp = cfg.design().dgp(0).context("invalid design")?;
    if cfg.coefs.iter().any(|&c| c == 0 || c > dgp.p()) {
        bail!("coefficients are numbered 1..={}, got {:?}", dgp.p(), cfg.coefs);
    }
    let ecfg = ExperimentConfig {
        columns: parse_columns(&cfg.columns)?,
        coefs: cfg.coefs.iter().map(|c| c - 1).collect(),
        kinds: cfg.kinds.clone(),
        alpha: cfg.alpha,
        replications: cfg.replications,
        bootstrap_reps: cfg.bootstrap_reps,
        se_method: cfg.se_method,
        ..ExperimentConfig::new(dgp, cfg.seed)
    };
    ecfg.validate()?;
    Ok(ecfg)
}

pub fn run_simulate(cfg: &SimulateConfig) -> Result<Vec<Output>> {
    let ecfg = experiment_config(cfg)?;
    let table = run_experiment(&ecfg).context("simulation failed")?.table();
    let text = format!("{}\nMean interval endpoints\n{}", table.to_text(), table.endpoints_text());
    Ok(vec![
        Output::new("coverage.csv", table.to_csv()),
        Output::new("coverage.txt", text),
        Output::new("simulate.toml", toml::to_string(&Record { simulate: cfg })?),
    ])
}
