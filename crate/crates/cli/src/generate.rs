//! Synthetic logit samples with a sidecar recording the truth.

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::GenerateConfig;
use crate::csv::dataset_to_csv;
use crate::Output;

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    n: usize,
    p: usize,
    rho: f64,
    seed: u64,
    response: &'a str,
    theta0: Vec<f64>,
}

pub fn run_generate(cfg: &GenerateConfig) -> Result<Vec<Output>> {
    let dgp = cfg.design().dgp(cfg.seed).context("invalid design")?;
    let data = dgp.sample(cfg.seed).context("sampling failed")?;
    let sidecar = Sidecar {
        n: dgp.n(),
        p: dgp.p(),
        rho: dgp.base().rho,
        seed: cfg.seed,
        response: "y",
        theta0: dgp.theta0()?.to_vec(),
    };
    Ok(vec![
        Output::new(format!("{}.csv", cfg.name), dataset_to_csv(&data, "y")),
        Output::new(format!("{}.toml", cfg.name), toml::to_string(&sidecar)?),
    ])
}
