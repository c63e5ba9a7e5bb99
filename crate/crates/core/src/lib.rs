//! Penalized extremum estimation with the SCAD penalty, BIC tuning, post-selection
//! refits and bootstrap-t confidence intervals.

pub mod bootstrap;
pub mod data;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod montecarlo;
pub mod objectives;
pub mod penalty;
pub mod rng;
pub mod selection;
pub mod solver;

pub use data::{Dataset, Support};
pub use error::{Error, Result};
pub use objectives::{
    gmm_cue_objective, gmm_fixed_objective, linear_ls_objective, logit_objective, rc_logit_objective, restrict,
    DrawScheme, LinearMoments, MomentFunction, ObjectiveKind, ObjectiveModel,
};
pub use penalty::{scad_derivative, scad_value, BicConstant, PenaltyConfig};
pub use solver::{check_kkt, lla_fit, weighted_l1_subproblem, Initializer, PenalizedFit, SolverOptions};
pub use selection::{select_support, threshold, LambdaPath, SelectionResult, TauRule};
pub use inference::{refit, AcceptanceRegion, Interval, IntervalKind, RefitOptions, RefitResult, SeMethod};
pub use bootstrap::{bootstrap_critical_values, BootstrapConfig, BootstrapResult, FailurePolicy};
pub use montecarlo::{
    run_coverage_experiment, run_small_coef_experiment, Column, CoverageTable, ExperimentConfig, LogitDgpConfig,
    SmallCoefDgpConfig,
};
