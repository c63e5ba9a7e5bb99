//! Fixtures shared by the benchmarks.

use scadboot::montecarlo::{generate_logit_sample, LogitDgpConfig, PRule};
use scadboot::{logit_objective, Dataset, ObjectiveModel};

/// A sample from the standard sparse logit design.
pub fn logit_fixture(n: usize, p: usize, seed: u64) -> (Dataset, ObjectiveModel) {
    let data = generate_logit_sample(&LogitDgpConfig::new(n, PRule::Explicit(p), seed)).expect("valid design");
    let model = logit_objective(&data).expect("binary response");
    (data, model)
}
