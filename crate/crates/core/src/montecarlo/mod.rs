//! Simulation designs and the coverage experiment runner.

mod dgp;
mod experiment;
mod table;

pub use dgp::{
    default_theta0, generate_design, generate_logit_sample, generate_small_coef_sample, Dgp, LogitDgpConfig,
    PRule, SmallCoefDgpConfig, DEFAULT_P0, DEFAULT_RHO, THETA0_PATTERN,
};
pub use experiment::{
    parse_columns, run_coverage_experiment, run_experiment, run_replication, run_small_coef_experiment,
    CellOutcome, Column, Estimator, ExperimentConfig, ExperimentRun, ReplicationRecord, FAILURE_FLAG_FRACTION,
};
pub use table::{mc_standard_error, CoverageCell, CoverageTable, SelectionSummary};

#[cfg(test)]
mod tests;
