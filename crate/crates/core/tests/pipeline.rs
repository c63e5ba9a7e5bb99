use scadboot::bootstrap::bootstrap_interval;
use scadboot::inference::asymptotic_interval;
use scadboot::montecarlo::{generate_logit_sample, Dgp, PRule};
use scadboot::{
    bootstrap_critical_values, logit_objective, refit, run_coverage_experiment, run_small_coef_experiment,
    select_support, BootstrapConfig, Column, ExperimentConfig, IntervalKind, LogitDgpConfig, PenaltyConfig,
    RefitOptions, SmallCoefDgpConfig, SolverOptions, TauRule,
};

#[test]
fn selection_refit_and_bootstrap_on_the_sparse_design() {
    let cfg = LogitDgpConfig::new(1000, PRule::NOver10, 21);
    let data = generate_logit_sample(&cfg).unwrap();
    let model = logit_objective(&data).unwrap();
    let (path, sel) = select_support(&model, &PenaltyConfig::default(), TauRule::Scaled, &SolverOptions::default()).unwrap();
    assert_eq!(sel.support, cfg.true_support().unwrap());
    let expected_tau = 1000f64.powf(-0.125) * 3.7 * sel.lambda_star;
    assert!((sel.tau - expected_tau).abs() < 1e-15);
    assert_eq!(sel.lambda_star, path.points[path.selected].lambda);

    let fitted = refit(&model, &sel.support, &RefitOptions::default()).unwrap();
    let bcfg = BootstrapConfig {
        n_reps: 99,
        master_seed: 8,
        ..BootstrapConfig::default()
    };
    let boot = bootstrap_critical_values(&model, &fitted, &bcfg, &RefitOptions::default()).unwrap();
    assert_eq!(boot.n_reps, 99);
    for (k, &j) in sel.support.indices().iter().enumerate() {
        let asym = asymptotic_interval(&fitted, j, 0.1, IntervalKind::Symmetric).unwrap();
        let bt = bootstrap_interval(fitted.theta_po[k], fitted.se[k], &boot, j, IntervalKind::Symmetric).unwrap();
        assert!(asym.lo < fitted.theta_po[k] && fitted.theta_po[k] < asym.hi);
        assert!(bt.lo < fitted.theta_po[k] && fitted.theta_po[k] < bt.hi);
        let ratio = bt.width() / asym.width();
        assert!(ratio > 0.5 && ratio < 3.0, "coefficient {j}: width ratio {ratio}");
    }
}

#[test]
fn experiment_entry_points() {
    let base = LogitDgpConfig::new(300, PRule::Explicit(20), 0);
    let cfg = ExperimentConfig {
        columns: vec![Column::OracleAsymp, Column::PoBootC1],
        replications: 2,
        bootstrap_reps: 19,
        ..ExperimentConfig::new(Dgp::Exact(base.clone()), 5)
    };
    let table = run_coverage_experiment(base.clone(), &cfg).unwrap();
    assert_eq!(table.replications, 2);
    assert_eq!(table.cells.len(), 2 * 2 * 3);

    let small = SmallCoefDgpConfig::at_tau_fraction(base, 0.05, 3, 0.125).unwrap();
    assert!(small.small_values.iter().all(|v| v.abs() < small.tau() / 4.0));
    let table = run_small_coef_experiment(small, &cfg).unwrap();
    assert_eq!(table.p, 20);
    assert!(table.cells.iter().all(|c| (0.0..=1.0).contains(&c.coverage)));
}
